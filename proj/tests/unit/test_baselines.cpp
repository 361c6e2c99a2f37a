#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <set>
#include <vector>

#include "crashcast/baselines.hpp"
#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"

#include "helpers.hpp"

using namespace crashcast;

namespace {

NormalizationParams identity_norm(std::size_t f) {
    NormalizationParams p;
    p.min.assign(f, 0.0);
    p.max.assign(f, 1.0);
    p.constant.assign(f, 0);
    return p;
}

double param_get(const ParamRefs& refs, std::size_t k) {
    for (auto [ptr, n] : refs.spans) {
        if (k < n) return ptr[k];
        k -= n;
    }
    throw std::out_of_range("param index");
}

void param_set(const ParamRefs& refs, std::size_t k, double v) {
    for (auto [ptr, n] : refs.spans) {
        if (k < n) {
            ptr[k] = v;
            return;
        }
        k -= n;
    }
    throw std::out_of_range("param index");
}

double naive_mlp_forward(const MlpModel& m, const Mat& x) {
    std::vector<double> a2(m.hidden_width);
    for (std::size_t u = 0; u < m.hidden_width; ++u) {
        double acc = m.dense1_b[u];
        for (std::size_t v = 0; v < x.size(); ++v) acc += m.dense1_w(u, v) * x.data[v];
        a2[u] = acc > 0.0 ? acc : 0.0;
    }
    double z = m.dense2_b;
    for (std::size_t u = 0; u < m.hidden_width; ++u) z += m.dense2_w[u] * a2[u];
    return 1.0 / (1.0 + std::exp(-z));
}

// ---- independent CART reference ------------------------------------------

struct RefNode {
    int feature = -1;
    double threshold = 0.0;
    double value = 0.0;
    std::unique_ptr<RefNode> left, right;
};

double ref_sse(const std::vector<double>& y, const std::vector<std::size_t>& idx) {
    double mean = 0.0;
    for (std::size_t i : idx) mean += y[i];
    mean /= double(idx.size());
    double sse = 0.0;
    for (std::size_t i : idx) sse += (y[i] - mean) * (y[i] - mean);
    return sse;
}

std::unique_ptr<RefNode> ref_build(const Mat& x, const std::vector<double>& y,
                                   const std::vector<std::size_t>& idx, std::size_t depth,
                                   std::size_t max_depth, std::size_t min_leaf) {
    auto node = std::make_unique<RefNode>();
    double sum = 0.0;
    for (std::size_t i : idx) sum += y[i]; // ascending-index summation order
    node->value = sum / double(idx.size());

    bool pure = true;
    for (std::size_t i : idx)
        if (y[i] != y[idx[0]]) { pure = false; break; }
    if (depth >= max_depth || pure || idx.size() < 2 * min_leaf) return node;

    double node_sse = ref_sse(y, idx);
    bool found = false;
    std::size_t best_f = 0;
    double best_thr = 0.0, best_red = 0.0;
    for (std::size_t f = 0; f < x.cols; ++f) {
        std::set<double> uniq;
        for (std::size_t i : idx) uniq.insert(x(i, f));
        std::vector<double> vals(uniq.begin(), uniq.end());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            double thr = vals[k] + (vals[k + 1] - vals[k]) / 2.0;
            std::vector<std::size_t> left, right;
            for (std::size_t i : idx) (x(i, f) <= thr ? left : right).push_back(i);
            if (left.size() < min_leaf || right.size() < min_leaf) continue;
            double red = node_sse - ref_sse(y, left) - ref_sse(y, right);
            if (red > best_red) {
                found = true;
                best_red = red;
                best_f = f;
                best_thr = thr;
            }
        }
    }
    if (!found) return node;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) (x(i, best_f) <= best_thr ? left : right).push_back(i);
    node->feature = int(best_f);
    node->threshold = best_thr;
    node->left = ref_build(x, y, left, depth + 1, max_depth, min_leaf);
    node->right = ref_build(x, y, right, depth + 1, max_depth, min_leaf);
    return node;
}

double ref_predict(const RefNode* node, const double* flat) {
    while (node->feature >= 0)
        node = (flat[node->feature] <= node->threshold ? node->left : node->right).get();
    return node->value;
}

} // namespace

TEST_CASE("mlp analytic gradients match finite differences") {
    const std::size_t F = 3;
    Dataset seed_ds = testutil::random_dataset(4, F, 61);
    TrainingTrace trace;
    // Zero epochs returns the freshly initialized network untouched.
    MlpModel model = train_bp_mlp(seed_ds, identity_norm(F), 0.01, 0.9, 0, 91, trace);
    CHECK(trace.epoch_train_mse.empty());
    CHECK(model.hidden_width == 32);

    Rng rng(71);
    std::vector<Mat> store;
    for (int i = 0; i < 8; ++i) {
        Mat m(kWindowSteps, F);
        for (auto& v : m.data) v = rng.uniform(0.05, 0.95);
        store.push_back(std::move(m));
    }
    std::vector<const Mat*> inputs;
    std::vector<double> targets;
    for (auto& m : store) {
        inputs.push_back(&m);
        targets.push_back(rng.index(2) ? 1.0 : 0.0);
    }

    std::vector<double> analytic, scratch;
    double base = mlp_batch_gradients(model, inputs, targets, analytic);
    CHECK(base > 0.0);
    ParamRefs refs = collect_params(model);
    REQUIRE(analytic.size() == refs.total);
    REQUIRE(refs.total == 32 * 9 + 32 + 32 + 1);

    const double h = 1e-4;
    std::size_t meaningful = 0;
    for (std::size_t k = 0; k < refs.total; ++k) {
        double orig = param_get(refs, k);
        param_set(refs, k, orig + h);
        double jp = mlp_batch_gradients(model, inputs, targets, scratch);
        param_set(refs, k, orig - h);
        double jm = mlp_batch_gradients(model, inputs, targets, scratch);
        param_set(refs, k, orig);

        double fd = (jp - jm) / (2.0 * h);
        double a = analytic[k];
        if (std::abs(a) < 1e-8 && std::abs(fd) < 1e-8) continue;
        double rel = std::abs(a - fd) / std::max(std::abs(a), std::abs(fd));
        CHECK(rel < 1e-4);
        ++meaningful;
    }
    CHECK(meaningful >= 40);
}

TEST_CASE("predict_mlp matches an independent forward pass") {
    Dataset seed_ds = testutil::random_dataset(4, 2, 15);
    TrainingTrace trace;
    MlpModel m = train_bp_mlp(seed_ds, identity_norm(2), 0.01, 0.9, 0, 33, trace);
    Rng jitter(2);
    for (auto& b : m.dense1_b) b = jitter.uniform(-0.3, 0.3);
    m.dense2_b = jitter.uniform(-0.3, 0.3);

    Rng rng(816);
    for (int i = 0; i < 10; ++i) {
        Mat x(kWindowSteps, 2);
        for (auto& v : x.data) v = rng.uniform(0.05, 0.95);
        Window w = testutil::make_window("A", 720, 0.0, x.data);
        CHECK(predict_mlp(m, w) == doctest::Approx(naive_mlp_forward(m, x)).epsilon(1e-12));
    }
}

TEST_CASE("train_bp_mlp replays as init + gradients + momentum steps") {
    const std::size_t F = 2;
    Dataset ds = testutil::random_dataset(12, F, 27);
    for (std::size_t i = 0; i < ds.windows.size(); ++i)
        ds.windows[i].label = (i % 3 == 0) ? 1.0 : 0.0;
    const double lr = 0.01, mom = 0.9;
    const std::uint64_t seed = 5150;

    TrainingTrace trace;
    MlpModel trained = train_bp_mlp(ds, identity_norm(F), lr, mom, 6, seed, trace);
    REQUIRE(trace.epoch_train_mse.size() == 6);

    // Rebuild the same starting point from the published stream layout.
    MlpModel replica;
    replica.feature_names = ds.feature_names;
    replica.norm = identity_norm(F);
    replica.hidden_width = 32;
    const std::size_t flat = kWindowSteps * F;
    replica.dense1_w = Mat(32, flat);
    replica.dense1_b.assign(32, 0.0);
    replica.dense2_w.assign(32, 0.0);
    replica.dense2_b = 0.0;
    Rng init_rng(derive_seed(seed, "mlp_init"));
    init_uniform(init_rng, replica.dense1_w.data.data(), replica.dense1_w.size(), flat);
    init_uniform(init_rng, replica.dense2_w.data(), replica.dense2_w.size(), 32);

    std::vector<const Mat*> inputs;
    std::vector<double> targets;
    for (const auto& w : ds.windows) {
        inputs.push_back(&w.matrix);
        targets.push_back(w.label);
    }
    std::vector<double> grads, velocity;
    for (std::size_t epoch = 0; epoch < 6; ++epoch) {
        double mse = mlp_batch_gradients(replica, inputs, targets, grads);
        CHECK(mse == trace.epoch_train_mse[epoch]);
        sgd_momentum_step(collect_params(replica), grads, velocity, lr, mom);
    }
    CHECK(replica.dense1_w.data == trained.dense1_w.data);
    CHECK(replica.dense1_b == trained.dense1_b);
    CHECK(replica.dense2_w == trained.dense2_w);
    CHECK(replica.dense2_b == trained.dense2_b);
}

TEST_CASE("train_bp_mlp learns and stays deterministic") {
    Rng rng(1234);
    Dataset ds;
    ds.feature_names = testutil::feature_names(2);
    for (int i = 0; i < 60; ++i) {
        double label = (i % 2) ? 1.0 : 0.0;
        double center = label ? 0.8 : 0.2;
        std::vector<double> flat;
        for (int k = 0; k < 6; ++k) flat.push_back(center + rng.uniform(-0.05, 0.05));
        ds.windows.push_back(testutil::make_window("A", i * 240, label, flat));
    }
    TrainingTrace t1, t2;
    MlpModel a = train_bp_mlp(ds, identity_norm(2), 0.01, 0.9, 150, 7, t1);
    MlpModel b = train_bp_mlp(ds, identity_norm(2), 0.01, 0.9, 150, 7, t2);
    CHECK(t1.epoch_train_mse == t2.epoch_train_mse);
    CHECK(a.dense1_w.data == b.dense1_w.data);
    CHECK(t1.epoch_train_mse.back() < t1.epoch_train_mse.front());
    CHECK(t1.epoch_train_mse.back() < 0.1);

    double pos = 0.0, neg = 0.0;
    for (const auto& w : ds.windows) (w.label == 1.0 ? pos : neg) += predict_mlp(a, w) / 30.0;
    CHECK(pos - neg > 0.4);

    SUBCASE("non-finite loss carries the epoch") {
        // relu masks NaN activations, so poison the target instead
        ds.windows[0].label = std::numeric_limits<double>::quiet_NaN();
        TrainingTrace t3;
        try {
            train_bp_mlp(ds, identity_norm(2), 0.01, 0.9, 5, 7, t3);
            FAIL("expected throw");
        } catch (const NonFiniteLossError& e) {
            CHECK(e.epoch == 0);
        }
    }
}

TEST_CASE("train_svm_ovr first epoch matches the subgradient by hand") {
    // Two windows, one feature: x_a = 0.2 (label 0), x_b = 0.8 (label 1).
    Dataset ds;
    ds.feature_names = testutil::feature_names(1);
    ds.windows.push_back(testutil::make_window("A", 720, 0.0, {0.2, 0.2, 0.2}));
    ds.windows.push_back(testutil::make_window("A", 960, 1.0, {0.8, 0.8, 0.8}));

    TrainingTrace trace;
    SvmModel m = train_svm_ovr(ds, identity_norm(1), 1.0, 1, trace);

    // t=1, eta=1, all margins 0 -> every sample violates. w = (1/n) sum y_i x_i.
    for (std::size_t v = 0; v < 3; ++v) {
        CHECK(m.w(0, v) == doctest::Approx(-0.3).epsilon(1e-15)); // class 0: y=(+1,-1)
        CHECK(m.w(1, v) == doctest::Approx(-0.5).epsilon(1e-15)); // class 0.5: y=(-1,-1)
        CHECK(m.w(2, v) == doctest::Approx(0.3).epsilon(1e-15));  // class 1: y=(-1,+1)
    }
    CHECK(m.bias[0] == 0.0);
    CHECK(m.bias[1] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(m.bias[2] == 0.0);
    CHECK(m.lambda == 1.0);

    // Post-epoch trace: x_a's best margin is class 1's +0.18, so its risk
    // prediction is 1.0 against label 0 -> squared error 1; x_b is correct.
    REQUIRE(trace.epoch_train_mse.size() == 1);
    CHECK(trace.epoch_train_mse[0] == doctest::Approx(0.5).epsilon(1e-12));

    SUBCASE("second epoch only shrinks the satisfied class") {
        TrainingTrace t2;
        SvmModel m2 = train_svm_ovr(ds, identity_norm(1), 1.0, 2, t2);
        // Classes 0 and 1 sit at a subgradient fixed point; class 0.5 has no
        // violators, so only the regularizer acts: w *= (1 - eta*lambda) = 1/2.
        for (std::size_t v = 0; v < 3; ++v) {
            CHECK(m2.w(0, v) == doctest::Approx(-0.3).epsilon(1e-15));
            CHECK(m2.w(1, v) == doctest::Approx(-0.25).epsilon(1e-15));
            CHECK(m2.w(2, v) == doctest::Approx(0.3).epsilon(1e-15));
        }
        CHECK(m2.bias[1] == doctest::Approx(-1.0).epsilon(1e-15));
    }
    SUBCASE("deterministic: same inputs, same model") {
        TrainingTrace t2;
        SvmModel m2 = train_svm_ovr(ds, identity_norm(1), 1.0, 1, t2);
        CHECK(m2.w.data == m.w.data);
        CHECK(m2.bias == m.bias);
    }
}

TEST_CASE("svm margins and predictions") {
    SvmModel m;
    m.feature_names = testutil::feature_names(1);
    m.norm = identity_norm(1);
    m.w = Mat(3, 3);
    m.w.data = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    m.bias = {0.1, 0.0, -0.1};

    Window w = testutil::make_window("A", 720, 0.0, {0.5, 0.25, 0.75});
    auto margins = svm_margins(m, w);
    CHECK(margins[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(margins[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(margins[2] == doctest::Approx(0.65).epsilon(1e-12));
    CHECK(predict_svm(m, w) == 1.0);

    SUBCASE("all-equal margins resolve to the highest class") {
        SvmModel z;
        z.feature_names = m.feature_names;
        z.norm = m.norm;
        z.w = Mat(3, 3);
        z.bias = {0.0, 0.0, 0.0};
        CHECK(predict_svm(z, w) == 1.0);
    }
    SUBCASE("two-way tie between 0.5 and 1 goes to 1") {
        m.bias = {-5.0, 0.4, 0.0};
        m.w.data.assign(9, 0.0);
        m.w(2, 0) = 0.8; // margin_1 = 0.4 == margin_0.5
        CHECK(svm_margins(m, w)[1] == doctest::Approx(svm_margins(m, w)[2]).epsilon(1e-12));
        CHECK(predict_svm(m, w) == 1.0);
    }
}

TEST_CASE("decision tree splits a clean step function") {
    Dataset ds;
    ds.feature_names = testutil::feature_names(1);
    for (int i = 0; i < 10; ++i) {
        double v = double(i) / 10.0;
        ds.windows.push_back(
            testutil::make_window("A", i * 240, i < 5 ? 0.0 : 1.0, {v, v, v}));
    }
    TreeModel m = train_decision_tree(ds, identity_norm(1), 8, 5);
    REQUIRE(m.nodes.size() == 3);
    CHECK(m.nodes[0].feature >= 0);
    CHECK(m.nodes[0].threshold == doctest::Approx(0.45).epsilon(1e-12));
    // Preorder layout: root, then left child, then right child.
    CHECK(m.nodes[0].left == 1);
    CHECK(m.nodes[0].right == 2);
    CHECK(m.nodes[1].feature == -1);
    CHECK(m.nodes[1].value == 0.0);
    CHECK(m.nodes[2].value == 1.0);

    for (const auto& w : ds.windows) CHECK(predict_tree(m, w) == w.label);
}

TEST_CASE("decision tree structural limits") {
    SUBCASE("min_leaf too tight to split") {
        Dataset ds;
        ds.feature_names = testutil::feature_names(1);
        for (int i = 0; i < 8; ++i) {
            double v = double(i);
            ds.windows.push_back(
                testutil::make_window("A", i * 240, i < 4 ? 0.0 : 1.0, {v, v, v}));
        }
        TreeModel m = train_decision_tree(ds, identity_norm(1), 8, 5);
        REQUIRE(m.nodes.size() == 1);
        CHECK(m.nodes[0].feature == -1);
        CHECK(m.nodes[0].value == 0.5);
    }
    SUBCASE("max_depth zero means a single leaf") {
        Dataset ds;
        ds.feature_names = testutil::feature_names(1);
        for (int i = 0; i < 10; ++i) {
            double v = double(i);
            ds.windows.push_back(
                testutil::make_window("A", i * 240, i < 5 ? 0.0 : 1.0, {v, v, v}));
        }
        TreeModel m = train_decision_tree(ds, identity_norm(1), 0, 1);
        REQUIRE(m.nodes.size() == 1);
        CHECK(m.nodes[0].value == 0.5);
    }
    SUBCASE("no positive reduction leaves the node alone") {
        // 0,1,1,0: the only min_leaf-legal boundary gives two equal means.
        Dataset ds;
        ds.feature_names = testutil::feature_names(1);
        const double labels[4] = {0.0, 1.0, 1.0, 0.0};
        for (int i = 0; i < 4; ++i) {
            double v = double(i + 1);
            ds.windows.push_back(testutil::make_window("A", i * 240, labels[i], {v, v, v}));
        }
        TreeModel m = train_decision_tree(ds, identity_norm(1), 8, 2);
        REQUIRE(m.nodes.size() == 1);
        CHECK(m.nodes[0].value == 0.5);
    }
    SUBCASE("degenerate labels throw") {
        Dataset ds = testutil::random_dataset(20, 2, 4);
        for (auto& w : ds.windows) w.label = 1.0;
        CHECK_THROWS_AS(train_decision_tree(ds, identity_norm(2), 8, 5), DegenerateTargetError);
    }
    SUBCASE("empty training set throws") {
        Dataset ds;
        ds.feature_names = testutil::feature_names(1);
        CHECK_THROWS_AS(train_decision_tree(ds, identity_norm(1), 8, 5), InputError);
    }
}

TEST_CASE("decision tree tie-breaking") {
    SUBCASE("equal reductions pick the lower threshold") {
        // 0,1,0,1 on x=1..4 with min_leaf 1: boundaries 1.5 and 3.5 tie.
        Dataset ds;
        ds.feature_names = testutil::feature_names(1);
        const double labels[4] = {0.0, 1.0, 0.0, 1.0};
        for (int i = 0; i < 4; ++i) {
            double v = double(i + 1);
            ds.windows.push_back(testutil::make_window("A", i * 240, labels[i], {v, v, v}));
        }
        TreeModel m = train_decision_tree(ds, identity_norm(1), 1, 1);
        REQUIRE(m.nodes[0].feature >= 0);
        CHECK(m.nodes[0].threshold == doctest::Approx(1.5).epsilon(1e-12));
    }
    SUBCASE("equal reductions pick the lower feature index") {
        // Feature columns are byte-identical, so every candidate ties.
        Dataset ds;
        ds.feature_names = testutil::feature_names(2);
        for (int i = 0; i < 10; ++i) {
            double v = double(i) / 3.0;
            ds.windows.push_back(testutil::make_window(
                "A", i * 240, i < 5 ? 0.0 : 1.0, {v, v, v, v, v, v}));
        }
        TreeModel m = train_decision_tree(ds, identity_norm(2), 8, 5);
        CHECK(m.nodes[0].feature == 0);
    }
}

TEST_CASE("decision tree matches a brute-force reference") {
    for (int trial = 0; trial < 5; ++trial) {
        Rng rng(1000 + trial);
        const std::size_t n = 200, F = 2, flat = kWindowSteps * F;
        Dataset ds;
        ds.feature_names = testutil::feature_names(F);
        Mat x(n, flat);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row(flat);
            for (auto& v : row) v = rng.uniform(0.02, 0.98);
            // Continuous labels tied loosely to the inputs plus noise.
            double label = 0.5 * row[0] + 0.3 * row[4] + 0.2 * rng.uniform();
            Window w = testutil::make_window("A", std::int64_t(i) * 240, 0.0, row);
            w.label = label;
            ds.windows.push_back(std::move(w));
            for (std::size_t v = 0; v < flat; ++v) x(i, v) = row[v];
            y[i] = label;
        }

        TreeModel m = train_decision_tree(ds, identity_norm(F), 6, 8);
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        auto ref = ref_build(x, y, idx, 0, 6, 8);

        for (std::size_t i = 0; i < n; ++i) {
            double got = predict_tree(m, ds.windows[i]);
            double want = ref_predict(ref.get(), &x.data[i * flat]);
            CHECK(got == want); // bit-exact
        }
    }
}

TEST_CASE("predict_tree walks thresholds left-inclusive") {
    TreeModel m;
    m.feature_names = testutil::feature_names(1);
    m.norm = identity_norm(1);
    m.nodes.resize(3);
    m.nodes[0].feature = 0; // flat index 0 = step 0 of feature 0
    m.nodes[0].threshold = 0.5;
    m.nodes[0].left = 1;
    m.nodes[0].right = 2;
    m.nodes[1].value = 0.2;
    m.nodes[2].value = 0.9;

    CHECK(predict_tree(m, testutil::make_window("A", 720, 0, {0.4, 0, 0})) == 0.2);
    CHECK(predict_tree(m, testutil::make_window("A", 720, 0, {0.5, 0, 0})) == 0.2); // boundary
    CHECK(predict_tree(m, testutil::make_window("A", 720, 0, {0.6, 0, 0})) == 0.9);

    SUBCASE("feature index beyond the window throws") {
        m.nodes[0].feature = 9;
        CHECK_THROWS_AS(predict_tree(m, testutil::make_window("A", 720, 0, {0.4, 0, 0})),
                        FeatureMismatchError);
    }
}

TEST_CASE("predict_*_all check feature names") {
    Dataset ds = testutil::random_dataset(6, 2, 19);
    for (std::size_t i = 0; i < ds.windows.size(); ++i)
        ds.windows[i].label = (i % 2) ? 1.0 : 0.0;
    TrainingTrace trace;
    MlpModel mlp = train_bp_mlp(ds, identity_norm(2), 0.01, 0.9, 2, 1, trace);
    SvmModel svm = train_svm_ovr(ds, identity_norm(2), 1e-3, 2, trace);
    TreeModel tree = train_decision_tree(ds, identity_norm(2), 3, 2);

    CHECK(predict_mlp_all(mlp, ds).size() == 6);
    CHECK(predict_svm_all(svm, ds).size() == 6);
    CHECK(predict_tree_all(tree, ds).size() == 6);

    Dataset renamed = ds;
    renamed.feature_names = {"x", "y"};
    CHECK_THROWS_AS(predict_mlp_all(mlp, renamed), FeatureMismatchError);
    CHECK_THROWS_AS(predict_svm_all(svm, renamed), FeatureMismatchError);
    CHECK_THROWS_AS(predict_tree_all(tree, renamed), FeatureMismatchError);
}

TEST_CASE("baseline model files round-trip") {
    testutil::TempDir dir("baseline_io");
    Dataset ds = testutil::random_dataset(10, 2, 47);
    for (std::size_t i = 0; i < ds.windows.size(); ++i)
        ds.windows[i].label = (i % 2) ? 1.0 : 0.0;
    NormalizationParams norm;
    norm.min = {-1.0, 0.0};
    norm.max = {4.0, 2.5};
    norm.constant = {0, 0};
    TrainingTrace trace;

    SUBCASE("mlp") {
        MlpModel m = train_bp_mlp(ds, norm, 0.01, 0.9, 3, 77, trace);
        save_mlp_model(dir.file("m.model"), m);
        MlpModel back = load_mlp_model(dir.file("m.model"));
        CHECK(back.feature_names == m.feature_names);
        CHECK(back.hidden_width == m.hidden_width);
        CHECK(back.dense1_w.data == m.dense1_w.data);
        CHECK(back.dense1_b == m.dense1_b);
        CHECK(back.dense2_w == m.dense2_w);
        CHECK(back.dense2_b == m.dense2_b);
        CHECK(back.norm.min == m.norm.min);
        save_mlp_model(dir.file("m2.model"), back);
        CHECK(read_entire_file(dir.file("m.model")) == read_entire_file(dir.file("m2.model")));
    }
    SUBCASE("svm") {
        SvmModel m = train_svm_ovr(ds, norm, 1e-3, 4, trace);
        save_svm_model(dir.file("s.model"), m);
        SvmModel back = load_svm_model(dir.file("s.model"));
        CHECK(back.feature_names == m.feature_names);
        CHECK(back.lambda == m.lambda);
        CHECK(back.w.data == m.w.data);
        CHECK(back.bias == m.bias);
        save_svm_model(dir.file("s2.model"), back);
        CHECK(read_entire_file(dir.file("s.model")) == read_entire_file(dir.file("s2.model")));
    }
    SUBCASE("tree") {
        TreeModel m = train_decision_tree(ds, norm, 4, 2);
        save_tree_model(dir.file("t.model"), m);
        TreeModel back = load_tree_model(dir.file("t.model"));
        REQUIRE(back.nodes.size() == m.nodes.size());
        CHECK(back.max_depth == m.max_depth);
        CHECK(back.min_leaf == m.min_leaf);
        for (std::size_t i = 0; i < m.nodes.size(); ++i) {
            CHECK(back.nodes[i].feature == m.nodes[i].feature);
            CHECK(back.nodes[i].threshold == m.nodes[i].threshold);
            CHECK(back.nodes[i].value == m.nodes[i].value);
            CHECK(back.nodes[i].left == m.nodes[i].left);
            CHECK(back.nodes[i].right == m.nodes[i].right);
        }
        save_tree_model(dir.file("t2.model"), back);
        CHECK(read_entire_file(dir.file("t.model")) == read_entire_file(dir.file("t2.model")));
    }
}

TEST_CASE("corrupt model files fail with line numbers") {
    testutil::TempDir dir("corrupt_io");
    Dataset ds = testutil::random_dataset(10, 1, 3);
    for (std::size_t i = 0; i < ds.windows.size(); ++i)
        ds.windows[i].label = (i % 2) ? 1.0 : 0.0;
    TrainingTrace trace;
    NormalizationParams norm = identity_norm(1);

    auto rewrite = [&](const std::string& src, std::size_t line_idx, const std::string& repl) {
        std::string text = read_entire_file(src);
        std::vector<std::string> lines;
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t nl = text.find('\n', pos);
            if (nl == std::string::npos) nl = text.size();
            lines.push_back(text.substr(pos, nl - pos));
            pos = nl + 1;
        }
        if (line_idx < lines.size()) lines[line_idx] = repl;
        std::string out;
        for (const auto& l : lines) out += l + "\n";
        write_entire_file(dir.file("bad.model"), out);
    };

    SUBCASE("mlp wrong line count") {
        MlpModel m = train_bp_mlp(ds, norm, 0.01, 0.9, 1, 2, trace);
        save_mlp_model(dir.file("m.model"), m);
        std::string text = read_entire_file(dir.file("m.model"));
        write_entire_file(dir.file("bad.model"), text + "extra\n");
        CHECK_THROWS_AS(load_mlp_model(dir.file("bad.model")), FormatError);
    }
    SUBCASE("mlp hidden width zero") {
        MlpModel m = train_bp_mlp(ds, norm, 0.01, 0.9, 1, 2, trace);
        save_mlp_model(dir.file("m.model"), m);
        rewrite(dir.file("m.model"), 2, "3 1 0");
        CHECK_THROWS_AS(load_mlp_model(dir.file("bad.model")), FormatError);
    }
    SUBCASE("svm bad lambda and class count") {
        SvmModel m = train_svm_ovr(ds, norm, 1e-3, 1, trace);
        save_svm_model(dir.file("s.model"), m);
        rewrite(dir.file("s.model"), 2, "3 1 2 0.001");
        CHECK_THROWS_AS(load_svm_model(dir.file("bad.model")), FormatError);
        rewrite(dir.file("s.model"), 2, "3 1 3 0");
        CHECK_THROWS_AS(load_svm_model(dir.file("bad.model")), FormatError);
    }
    SUBCASE("svm weight row with wrong width") {
        SvmModel m = train_svm_ovr(ds, norm, 1e-3, 1, trace);
        save_svm_model(dir.file("s.model"), m);
        rewrite(dir.file("s.model"), 4, "0.1 0.2");
        try {
            load_svm_model(dir.file("bad.model"));
            FAIL("expected throw");
        } catch (const FormatError& e) {
            CHECK(e.line == 5);
        }
    }
    SUBCASE("tree node count mismatch") {
        TreeModel m = train_decision_tree(ds, norm, 4, 2);
        save_tree_model(dir.file("t.model"), m);
        rewrite(dir.file("t.model"), 2, "3 1 4 2 99");
        CHECK_THROWS_AS(load_tree_model(dir.file("bad.model")), FormatError);
    }
    SUBCASE("tree bad node tag") {
        TreeModel m = train_decision_tree(ds, norm, 4, 2);
        save_tree_model(dir.file("t.model"), m);
        rewrite(dir.file("t.model"), 4, "q 0.5");
        CHECK_THROWS_AS(load_tree_model(dir.file("bad.model")), FormatError);
    }
    SUBCASE("tree truncated node list") {
        TreeModel m = train_decision_tree(ds, norm, 4, 2);
        REQUIRE(m.nodes.size() >= 3);
        save_tree_model(dir.file("t.model"), m);
        std::string text = read_entire_file(dir.file("t.model"));
        std::size_t cut = text.rfind('\n', text.size() - 2);
        write_entire_file(dir.file("bad.model"), text.substr(0, cut + 1));
        CHECK_THROWS_AS(load_tree_model(dir.file("bad.model")), FormatError);
    }
    SUBCASE("tree trailing content") {
        TreeModel m = train_decision_tree(ds, norm, 4, 2);
        save_tree_model(dir.file("t.model"), m);
        std::string text = read_entire_file(dir.file("t.model"));
        write_entire_file(dir.file("bad.model"), text + "l 0.5\n");
        try {
            load_tree_model(dir.file("bad.model"));
            FAIL("expected throw");
        } catch (const FormatError& e) {
            CHECK(e.line > 4);
        }
    }
    SUBCASE("tree feature index out of range") {
        TreeModel m = train_decision_tree(ds, norm, 4, 2);
        save_tree_model(dir.file("t.model"), m);
        rewrite(dir.file("t.model"), 4, "n 99 0.5");
        CHECK_THROWS_AS(load_tree_model(dir.file("bad.model")), FormatError);
    }
}
