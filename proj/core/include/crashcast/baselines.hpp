#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "crashcast/neuralnet.hpp"

namespace crashcast {

struct MlpModel {
    std::vector<std::string> feature_names;
    NormalizationParams norm;
    std::size_t hidden_width = 0;

    Mat dense1_w;                 // hidden_width x (3 * F)
    std::vector<double> dense1_b;
    std::vector<double> dense2_w; // hidden_width
    double dense2_b = 0.0;
};

struct SvmModel {
    std::vector<std::string> feature_names;
    NormalizationParams norm;
    double lambda = 1e-3;

    Mat w;                        // 3 x (3 * F), one row per class
    std::array<double, 3> bias{};
};

struct TreeNode {
    int feature = -1;   // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0; // leaf mean label
    int left = -1;
    int right = -1;
};

struct TreeModel {
    std::vector<std::string> feature_names;
    NormalizationParams norm;
    std::size_t max_depth = 8;
    std::size_t min_leaf = 5;
    std::vector<TreeNode> nodes; // nodes[0] is the root
};

// Full-batch momentum SGD (velocity form) on MSE; expects normalized data.
MlpModel train_bp_mlp(const Dataset& train, const NormalizationParams& norm, double learning_rate,
                      double momentum, std::size_t epochs, std::uint64_t seed,
                      TrainingTrace& trace);

// One-vs-rest linear classifiers via deterministic epoch-wise subgradient
// descent on the regularized hinge loss, step 1/(lambda * t).
SvmModel train_svm_ovr(const Dataset& train, const NormalizationParams& norm, double lambda,
                       std::size_t epochs, TrainingTrace& trace);

// CART regression: exhaustive best split by variance reduction over midpoints
// of sorted unique values; ties to lower feature index, then lower threshold.
TreeModel train_decision_tree(const Dataset& train, const NormalizationParams& norm,
                              std::size_t max_depth, std::size_t min_leaf);

double predict_mlp(const MlpModel& model, const Window& window);
std::array<double, 3> svm_margins(const SvmModel& model, const Window& window);
double predict_svm(const SvmModel& model, const Window& window);
double predict_tree(const TreeModel& model, const Window& window);

std::vector<double> predict_mlp_all(const MlpModel& model, const Dataset& dataset);
std::vector<double> predict_svm_all(const SvmModel& model, const Dataset& dataset);
std::vector<double> predict_tree_all(const TreeModel& model, const Dataset& dataset);

void save_mlp_model(const std::string& path, const MlpModel& model);
MlpModel load_mlp_model(const std::string& path);
void save_svm_model(const std::string& path, const SvmModel& model);
SvmModel load_svm_model(const std::string& path);
void save_tree_model(const std::string& path, const TreeModel& model);
TreeModel load_tree_model(const std::string& path);

// Batch MSE gradient for the MLP (exposed for finite-difference checks).
double mlp_batch_gradients(MlpModel& model, const std::vector<const Mat*>& inputs,
                           const std::vector<double>& targets, std::vector<double>& grads);
ParamRefs collect_params(MlpModel& model);

} // namespace crashcast
