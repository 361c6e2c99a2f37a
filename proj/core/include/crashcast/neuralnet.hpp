#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "crashcast/features.hpp"
#include "crashcast/label.hpp"
#include "crashcast/mat.hpp"
#include "crashcast/rng.hpp"

namespace crashcast {

struct CnnConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 100;
    std::size_t batch_cap = 10000;
    std::size_t filter_count = 64;
    std::size_t kernel_width = 2;
    std::size_t pool_width = 2;
    std::size_t dense_width = 32;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
};

struct CnnModel {
    std::vector<std::string> feature_names;
    NormalizationParams norm;
    std::size_t filter_count = 0;
    std::size_t kernel_width = 0;
    std::size_t pool_width = 0;
    std::size_t dense_width = 0;

    Mat conv_w;                  // filter_count x (kernel_width * F)
    std::vector<double> conv_b;  // filter_count
    Mat dense1_w;                // dense_width x (filter_count * pooled_len)
    std::vector<double> dense1_b;
    std::vector<double> dense2_w; // dense_width
    double dense2_b = 0.0;

    std::size_t conv_out_len() const { return kWindowSteps - kernel_width + 1; }
    std::size_t pooled_len() const { return conv_out_len() / pool_width; }
};

struct TrainingTrace {
    std::vector<double> epoch_train_mse; // length = epochs
    double final_test_mse = 0.0;
    bool has_test_mse = false;
};

// Flat views over every tensor of a model, in a fixed order. Optimizer state
// and gradients use buffers of matching shapes.
struct ParamRefs {
    std::vector<std::pair<double*, std::size_t>> spans;
    std::size_t total = 0;

    void add(double* p, std::size_t n) {
        spans.push_back({p, n});
        total += n;
    }
};

ParamRefs collect_params(CnnModel& model);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

void adam_step(const ParamRefs& params, const std::vector<double>& grads, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon);

void sgd_momentum_step(const ParamRefs& params, const std::vector<double>& grads,
                       std::vector<double>& velocity, double learning_rate, double momentum);

// out[t][j] = bias_j + sum_{dt,f} input[t+dt][f] * w_j[dt][f]
Mat conv1d_forward(const Mat& input, const Mat& weights, const std::vector<double>& biases,
                   std::size_t kernel_width);

// Non-overlapping max over the time axis; remainder truncated. argmax records
// the winning input row per output cell (ties take the earliest).
Mat maxpool_forward(const Mat& input, std::size_t pool_width, std::vector<std::size_t>* argmax);

double forward(const CnnModel& model, const Mat& window);

// Mean squared error and its gradients over a batch of windows (already
// normalized). grads is laid out per collect_params order.
double cnn_batch_gradients(CnnModel& model, const std::vector<const Mat*>& inputs,
                           const std::vector<double>& targets, std::vector<double>& grads);

CnnModel init_cnn(const std::vector<std::string>& feature_names, const NormalizationParams& norm,
                  const CnnConfig& config);

// Full training loop: Adam on MSE over min(batch_cap, n)-row batches.
// Expects a dataset already normalized with `norm`.
CnnModel train_cnn(const Dataset& train, const NormalizationParams& norm, const CnnConfig& config,
                   TrainingTrace& trace);

// Raw (un-normalized) window in, risk score out.
double predict_cnn(const CnnModel& model, const Window& window);
std::vector<double> predict_cnn_all(const CnnModel& model, const Dataset& dataset);

struct ClassScores {
    std::array<double, 3> scores{}; // classes 0, 0.5, 1
    std::size_t predicted = 0;      // index of argmax, midpoint ties go up
};

ClassScores class_scores(double risk_score);

void save_cnn_model(const std::string& path, const CnnModel& model);
CnnModel load_cnn_model(const std::string& path);

void write_trace_csv(const std::string& path, const TrainingTrace& trace);

// Shared helpers for every model kind.
void init_uniform(Rng& rng, double* data, std::size_t n, std::size_t fan_in);
Mat normalize_window(const Mat& window, const NormalizationParams& params);
double sigmoid(double z);

} // namespace crashcast
