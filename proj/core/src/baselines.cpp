#include "crashcast/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"
#include "crashcast/model_io.hpp"

namespace crashcast {

namespace {

constexpr double kClassCenters[3] = {0.0, 0.5, 1.0};

void check_features(const std::vector<std::string>& model_names, const Dataset& dataset) {
    if (dataset.feature_names != model_names)
        throw FeatureMismatchError("dataset features do not match model features");
}

} // namespace

ParamRefs collect_params(MlpModel& model) {
    ParamRefs refs;
    refs.add(model.dense1_w.data.data(), model.dense1_w.size());
    refs.add(model.dense1_b.data(), model.dense1_b.size());
    refs.add(model.dense2_w.data(), model.dense2_w.size());
    refs.add(&model.dense2_b, 1);
    return refs;
}

namespace {

struct MlpState {
    std::vector<double> z2, a2;
    double z3 = 0.0, y = 0.0;
};

void mlp_forward(const MlpModel& model, const double* xf, std::size_t flat, MlpState& s) {
    s.z2.assign(model.hidden_width, 0.0);
    s.a2.assign(model.hidden_width, 0.0);
    for (std::size_t u = 0; u < model.hidden_width; ++u) {
        double acc = model.dense1_b[u];
        for (std::size_t v = 0; v < flat; ++v) acc += model.dense1_w(u, v) * xf[v];
        s.z2[u] = acc;
        s.a2[u] = acc > 0.0 ? acc : 0.0;
    }
    double acc = model.dense2_b;
    for (std::size_t u = 0; u < model.hidden_width; ++u) acc += model.dense2_w[u] * s.a2[u];
    s.z3 = acc;
    s.y = sigmoid(acc);
}

} // namespace

double mlp_batch_gradients(MlpModel& model, const std::vector<const Mat*>& inputs,
                           const std::vector<double>& targets, std::vector<double>& grads) {
    if (inputs.size() != targets.size())
        throw LengthMismatchError("inputs/targets length mismatch");
    ParamRefs refs = collect_params(model);
    grads.assign(refs.total, 0.0);
    const std::size_t flat = model.dense1_w.cols;

    double* g_w1 = grads.data();
    double* g_b1 = g_w1 + model.dense1_w.size();
    double* g_w2 = g_b1 + model.dense1_b.size();
    double* g_b2 = g_w2 + model.dense2_w.size();

    const double n = static_cast<double>(inputs.size());
    double mse = 0.0;
    MlpState s;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Mat& x = *inputs[i];
        if (x.size() != flat) throw DimensionMismatchError("window size mismatch in MLP batch");
        mlp_forward(model, x.data.data(), flat, s);
        double err = s.y - targets[i];
        mse += err * err / n;
        double dz3 = (2.0 * err / n) * s.y * (1.0 - s.y);
        g_b2[0] += dz3;
        for (std::size_t u = 0; u < model.hidden_width; ++u) {
            g_w2[u] += dz3 * s.a2[u];
            double dz2 = s.z2[u] > 0.0 ? model.dense2_w[u] * dz3 : 0.0;
            if (dz2 == 0.0) continue;
            g_b1[u] += dz2;
            double* wrow = g_w1 + u * flat;
            for (std::size_t v = 0; v < flat; ++v) wrow[v] += dz2 * x.data[v];
        }
    }
    return mse;
}

MlpModel train_bp_mlp(const Dataset& train, const NormalizationParams& norm, double learning_rate,
                      double momentum, std::size_t epochs, std::uint64_t seed,
                      TrainingTrace& trace) {
    const std::size_t F = train.feature_names.size();
    const std::size_t flat = kWindowSteps * F;
    MlpModel model;
    model.feature_names = train.feature_names;
    model.norm = norm;
    model.hidden_width = 32;
    model.dense1_w = Mat(model.hidden_width, flat);
    model.dense1_b.assign(model.hidden_width, 0.0);
    model.dense2_w.assign(model.hidden_width, 0.0);
    model.dense2_b = 0.0;

    Rng rng(derive_seed(seed, "mlp_init"));
    init_uniform(rng, model.dense1_w.data.data(), model.dense1_w.size(), flat);
    init_uniform(rng, model.dense2_w.data(), model.dense2_w.size(), model.hidden_width);

    std::vector<const Mat*> inputs;
    std::vector<double> targets;
    inputs.reserve(train.windows.size());
    targets.reserve(train.windows.size());
    for (const auto& w : train.windows) {
        inputs.push_back(&w.matrix);
        targets.push_back(w.label);
    }

    std::vector<double> grads, velocity;
    trace.epoch_train_mse.clear();
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        double mse = mlp_batch_gradients(model, inputs, targets, grads);
        if (!std::isfinite(mse)) throw NonFiniteLossError(epoch);
        trace.epoch_train_mse.push_back(mse);
        ParamRefs refs = collect_params(model);
        sgd_momentum_step(refs, grads, velocity, learning_rate, momentum);
    }
    return model;
}

SvmModel train_svm_ovr(const Dataset& train, const NormalizationParams& norm, double lambda,
                       std::size_t epochs, TrainingTrace& trace) {
    const std::size_t F = train.feature_names.size();
    const std::size_t flat = kWindowSteps * F;
    const std::size_t n = train.windows.size();
    if (n == 0) throw InputError("empty training set");

    SvmModel model;
    model.feature_names = train.feature_names;
    model.norm = norm;
    model.lambda = lambda;
    model.w = Mat(3, flat);
    model.bias = {0.0, 0.0, 0.0};

    std::vector<std::array<double, 3>> y(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 3; ++c)
            y[i][c] = train.windows[i].label == kClassCenters[c] ? 1.0 : -1.0;

    std::vector<double> gw(flat);
    trace.epoch_train_mse.clear();
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        double eta = 1.0 / (lambda * static_cast<double>(epoch));
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t v = 0; v < flat; ++v) gw[v] = lambda * model.w(c, v);
            double gb = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* xf = train.windows[i].matrix.data.data();
                double margin = model.bias[c];
                for (std::size_t v = 0; v < flat; ++v) margin += model.w(c, v) * xf[v];
                if (y[i][c] * margin < 1.0) {
                    double scale = y[i][c] / static_cast<double>(n);
                    for (std::size_t v = 0; v < flat; ++v) gw[v] -= scale * xf[v];
                    gb -= scale;
                }
            }
            for (std::size_t v = 0; v < flat; ++v) model.w(c, v) -= eta * gw[v];
            model.bias[c] -= eta * gb;
        }

        // Trace the risk-prediction MSE so every iterative model logs the
        // same quantity per epoch.
        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* xf = train.windows[i].matrix.data.data();
            std::size_t best = 0;
            double best_margin = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                double margin = model.bias[c];
                for (std::size_t v = 0; v < flat; ++v) margin += model.w(c, v) * xf[v];
                if (c == 0 || margin >= best_margin) {
                    best_margin = margin;
                    best = c;
                }
            }
            double err = kClassCenters[best] - train.windows[i].label;
            mse += err * err / static_cast<double>(n);
        }
        trace.epoch_train_mse.push_back(mse);
    }
    return model;
}

namespace {

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double reduction = 0.0;
    std::size_t left_count = 0;
};

// Best (feature, threshold) over midpoints of sorted unique values within the
// node, requiring min_leaf rows on both sides.
SplitChoice best_split(const Mat& x, const std::vector<double>& y,
                       const std::vector<std::size_t>& idx, std::size_t min_leaf) {
    const std::size_t n = idx.size();
    SplitChoice best;

    double sy = 0.0, sy2 = 0.0;
    for (std::size_t i : idx) {
        sy += y[i];
        sy2 += y[i] * y[i];
    }
    double sse_node = sy2 - sy * sy / static_cast<double>(n);

    std::vector<std::size_t> order(idx);
    std::vector<double> px(n + 1), px2(n + 1);
    for (std::size_t f = 0; f < x.cols; ++f) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (x(a, f) != x(b, f)) return x(a, f) < x(b, f);
            return a < b;
        });
        px[0] = 0.0;
        px2[0] = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            px[i + 1] = px[i] + y[order[i]];
            px2[i + 1] = px2[i] + y[order[i]] * y[order[i]];
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double a = x(order[i], f), b = x(order[i + 1], f);
            if (a == b) continue;
            double thr = a + (b - a) / 2.0;
            // The midpoint of two adjacent doubles can round onto an
            // endpoint; resolve the split by the partition it really induces.
            std::size_t pos = i + 1;
            if (thr >= b) {
                while (pos < n && x(order[pos], f) <= thr) ++pos;
            }
            if (pos < min_leaf || n - pos < min_leaf || pos == n) continue;
            double ls = px[pos], ls2 = px2[pos];
            double rs = sy - ls, rs2 = sy2 - ls2;
            double reduction = sse_node - (ls2 - ls * ls / static_cast<double>(pos)) -
                               (rs2 - rs * rs / static_cast<double>(n - pos));
            if (reduction > best.reduction) {
                best.found = true;
                best.feature = f;
                best.threshold = thr;
                best.reduction = reduction;
                best.left_count = pos;
            }
        }
    }
    if (best.reduction <= 0.0) best.found = false;
    return best;
}

int build_tree(const Mat& x, const std::vector<double>& y, std::vector<std::size_t> idx,
               std::size_t depth, std::size_t max_depth, std::size_t min_leaf,
               std::vector<TreeNode>& nodes) {
    int self = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{});

    double ymin = y[idx[0]], ymax = y[idx[0]], sum = 0.0;
    for (std::size_t i : idx) {
        ymin = std::min(ymin, y[i]);
        ymax = std::max(ymax, y[i]);
        sum += y[i];
    }
    double mean = sum / static_cast<double>(idx.size());

    SplitChoice split;
    if (depth < max_depth && ymin != ymax && idx.size() >= 2 * min_leaf)
        split = best_split(x, y, idx, min_leaf);
    if (!split.found) {
        nodes[self].value = mean;
        return self;
    }

    std::vector<std::size_t> left, right;
    left.reserve(split.left_count);
    right.reserve(idx.size() - split.left_count);
    for (std::size_t i : idx)
        (x(i, split.feature) <= split.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    nodes[self].feature = static_cast<int>(split.feature);
    nodes[self].threshold = split.threshold;
    int l = build_tree(x, y, std::move(left), depth + 1, max_depth, min_leaf, nodes);
    int r = build_tree(x, y, std::move(right), depth + 1, max_depth, min_leaf, nodes);
    nodes[self].left = l;
    nodes[self].right = r;
    return self;
}

} // namespace

TreeModel train_decision_tree(const Dataset& train, const NormalizationParams& norm,
                              std::size_t max_depth, std::size_t min_leaf) {
    const std::size_t n = train.windows.size();
    if (n == 0) throw InputError("empty training set");
    const std::size_t flat = kWindowSteps * train.feature_names.size();

    Mat x(n, flat);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Mat& m = train.windows[i].matrix;
        std::copy(m.data.begin(), m.data.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * flat));
        y[i] = train.windows[i].label;
    }
    bool degenerate = true;
    for (std::size_t i = 1; i < n; ++i)
        if (y[i] != y[0]) { degenerate = false; break; }
    if (degenerate) throw DegenerateTargetError("all crash-risk labels identical");

    TreeModel model;
    model.feature_names = train.feature_names;
    model.norm = norm;
    model.max_depth = max_depth;
    model.min_leaf = min_leaf;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    build_tree(x, y, std::move(idx), 0, max_depth, min_leaf, model.nodes);
    return model;
}

double predict_mlp(const MlpModel& model, const Window& window) {
    Mat x = normalize_window(window.matrix, model.norm);
    MlpState s;
    mlp_forward(model, x.data.data(), x.size(), s);
    return s.y;
}

std::array<double, 3> svm_margins(const SvmModel& model, const Window& window) {
    Mat x = normalize_window(window.matrix, model.norm);
    if (x.size() != model.w.cols)
        throw FeatureMismatchError("window size does not match SVM weights");
    std::array<double, 3> margins{};
    for (std::size_t c = 0; c < 3; ++c) {
        double acc = model.bias[c];
        for (std::size_t v = 0; v < x.size(); ++v) acc += model.w(c, v) * x.data[v];
        margins[c] = acc;
    }
    return margins;
}

double predict_svm(const SvmModel& model, const Window& window) {
    auto margins = svm_margins(model, window);
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c)
        if (margins[c] >= margins[best]) best = c; // ties resolve to higher risk
    return kClassCenters[best];
}

double predict_tree(const TreeModel& model, const Window& window) {
    Mat x = normalize_window(window.matrix, model.norm);
    if (model.nodes.empty()) throw FormatError(0, "empty tree model");
    const TreeNode* node = &model.nodes[0];
    while (node->feature >= 0) {
        std::size_t f = static_cast<std::size_t>(node->feature);
        if (f >= x.size()) throw FeatureMismatchError("tree feature index out of range");
        node = &model.nodes[static_cast<std::size_t>(
            x.data[f] <= node->threshold ? node->left : node->right)];
    }
    return node->value;
}

std::vector<double> predict_mlp_all(const MlpModel& model, const Dataset& dataset) {
    check_features(model.feature_names, dataset);
    std::vector<double> out;
    out.reserve(dataset.windows.size());
    for (const auto& w : dataset.windows) out.push_back(predict_mlp(model, w));
    return out;
}

std::vector<double> predict_svm_all(const SvmModel& model, const Dataset& dataset) {
    check_features(model.feature_names, dataset);
    std::vector<double> out;
    out.reserve(dataset.windows.size());
    for (const auto& w : dataset.windows) out.push_back(predict_svm(model, w));
    return out;
}

std::vector<double> predict_tree_all(const TreeModel& model, const Dataset& dataset) {
    check_features(model.feature_names, dataset);
    std::vector<double> out;
    out.reserve(dataset.windows.size());
    for (const auto& w : dataset.windows) out.push_back(predict_tree(model, w));
    return out;
}

void save_mlp_model(const std::string& path, const MlpModel& model) {
    std::string buf = "crashcast-model mlp v1\n";
    buf += format_name_line(model.feature_names);
    buf += '\n';
    buf += std::to_string(kWindowSteps) + ' ' + std::to_string(model.feature_names.size()) + ' ' +
           std::to_string(model.hidden_width) + '\n';
    buf += format_norm_line(model.norm);
    buf += '\n';
    buf += format_double_line(model.dense1_w.data.data(), model.dense1_w.size());
    buf += '\n';
    buf += format_double_line(model.dense1_b.data(), model.dense1_b.size());
    buf += '\n';
    buf += format_double_line(model.dense2_w.data(), model.dense2_w.size());
    buf += '\n';
    buf += format_double(model.dense2_b);
    buf += '\n';
    write_entire_file(path, buf);
}

MlpModel load_mlp_model(const std::string& path) {
    auto lines = read_model_lines(path);
    if (lines.size() != 8) throw FormatError(lines.size(), "mlp model file must have 8 lines");
    if (lines[0] != "crashcast-model mlp v1")
        throw FormatError(1, "unsupported model header '" + lines[0] + "'");
    MlpModel model;
    model.feature_names = parse_name_line(lines[1], 2);
    const std::size_t F = model.feature_names.size();
    auto dims = parse_double_line(lines[2], 3, 3);
    if (dims[0] != kWindowSteps) throw FormatError(3, "timestep count must be 3");
    if (dims[1] != static_cast<double>(F))
        throw FormatError(3, "feature count does not match name list");
    model.hidden_width = static_cast<std::size_t>(dims[2]);
    if (model.hidden_width == 0) throw FormatError(3, "hidden width must be positive");
    model.norm = parse_norm_line(lines[3], 4, F);
    const std::size_t flat = kWindowSteps * F;
    auto w1 = parse_double_line(lines[4], 5, model.hidden_width * flat);
    model.dense1_w = Mat(model.hidden_width, flat);
    model.dense1_w.data = std::move(w1);
    model.dense1_b = parse_double_line(lines[5], 6, model.hidden_width);
    model.dense2_w = parse_double_line(lines[6], 7, model.hidden_width);
    model.dense2_b = parse_double_line(lines[7], 8, 1)[0];
    return model;
}

void save_svm_model(const std::string& path, const SvmModel& model) {
    std::string buf = "crashcast-model svm v1\n";
    buf += format_name_line(model.feature_names);
    buf += '\n';
    buf += std::to_string(kWindowSteps) + ' ' + std::to_string(model.feature_names.size()) +
           " 3 " + format_double(model.lambda) + '\n';
    buf += format_norm_line(model.norm);
    buf += '\n';
    for (std::size_t c = 0; c < 3; ++c) {
        buf += format_double_line(&model.w.data[c * model.w.cols], model.w.cols);
        buf += '\n';
    }
    buf += format_double_line(model.bias.data(), 3);
    buf += '\n';
    write_entire_file(path, buf);
}

SvmModel load_svm_model(const std::string& path) {
    auto lines = read_model_lines(path);
    if (lines.size() != 8) throw FormatError(lines.size(), "svm model file must have 8 lines");
    if (lines[0] != "crashcast-model svm v1")
        throw FormatError(1, "unsupported model header '" + lines[0] + "'");
    SvmModel model;
    model.feature_names = parse_name_line(lines[1], 2);
    const std::size_t F = model.feature_names.size();
    auto dims = parse_double_line(lines[2], 3, 4);
    if (dims[0] != kWindowSteps) throw FormatError(3, "timestep count must be 3");
    if (dims[1] != static_cast<double>(F))
        throw FormatError(3, "feature count does not match name list");
    if (dims[2] != 3.0) throw FormatError(3, "class count must be 3");
    model.lambda = dims[3];
    if (!(model.lambda > 0.0)) throw FormatError(3, "lambda must be positive");
    model.norm = parse_norm_line(lines[3], 4, F);
    const std::size_t flat = kWindowSteps * F;
    model.w = Mat(3, flat);
    for (std::size_t c = 0; c < 3; ++c) {
        auto row = parse_double_line(lines[4 + c], 5 + c, flat);
        std::copy(row.begin(), row.end(),
                  model.w.data.begin() + static_cast<std::ptrdiff_t>(c * flat));
    }
    auto bias = parse_double_line(lines[7], 8, 3);
    std::copy(bias.begin(), bias.end(), model.bias.begin());
    return model;
}

namespace {

void serialize_node(const TreeModel& model, int index, std::string& buf) {
    const TreeNode& node = model.nodes[static_cast<std::size_t>(index)];
    if (node.feature < 0) {
        buf += "l ";
        buf += format_double(node.value);
        buf += '\n';
        return;
    }
    buf += "n ";
    buf += std::to_string(node.feature);
    buf += ' ';
    buf += format_double(node.threshold);
    buf += '\n';
    serialize_node(model, node.left, buf);
    serialize_node(model, node.right, buf);
}

int parse_node(const std::vector<std::string>& lines, std::size_t& cursor, std::size_t flat,
               std::vector<TreeNode>& nodes) {
    if (cursor >= lines.size()) throw FormatError(lines.size(), "truncated tree node list");
    const std::string& line = lines[cursor];
    std::size_t line_no = cursor + 1;
    ++cursor;

    int self = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{});
    if (line.size() >= 2 && line[0] == 'l' && line[1] == ' ') {
        nodes[static_cast<std::size_t>(self)].value =
            parse_double_field(std::string_view(line).substr(2), line_no);
        return self;
    }
    if (line.size() >= 2 && line[0] == 'n' && line[1] == ' ') {
        std::string_view rest = std::string_view(line).substr(2);
        std::size_t space = rest.find(' ');
        if (space == std::string_view::npos)
            throw FormatError(line_no, "internal node needs feature and threshold");
        std::int64_t feat = parse_int_field(rest.substr(0, space), line_no);
        if (feat < 0 || static_cast<std::size_t>(feat) >= flat)
            throw FormatError(line_no, "tree feature index out of range");
        double thr = parse_double_field(rest.substr(space + 1), line_no);
        nodes[static_cast<std::size_t>(self)].feature = static_cast<int>(feat);
        nodes[static_cast<std::size_t>(self)].threshold = thr;
        int l = parse_node(lines, cursor, flat, nodes);
        int r = parse_node(lines, cursor, flat, nodes);
        nodes[static_cast<std::size_t>(self)].left = l;
        nodes[static_cast<std::size_t>(self)].right = r;
        return self;
    }
    throw FormatError(line_no, "tree node line must start with 'n' or 'l'");
}

} // namespace

void save_tree_model(const std::string& path, const TreeModel& model) {
    std::string buf = "crashcast-model tree v1\n";
    buf += format_name_line(model.feature_names);
    buf += '\n';
    buf += std::to_string(kWindowSteps) + ' ' + std::to_string(model.feature_names.size()) + ' ' +
           std::to_string(model.max_depth) + ' ' + std::to_string(model.min_leaf) + ' ' +
           std::to_string(model.nodes.size()) + '\n';
    buf += format_norm_line(model.norm);
    buf += '\n';
    serialize_node(model, 0, buf);
    write_entire_file(path, buf);
}

TreeModel load_tree_model(const std::string& path) {
    auto lines = read_model_lines(path);
    if (lines.size() < 5) throw FormatError(lines.size(), "tree model file too short");
    if (lines[0] != "crashcast-model tree v1")
        throw FormatError(1, "unsupported model header '" + lines[0] + "'");
    TreeModel model;
    model.feature_names = parse_name_line(lines[1], 2);
    const std::size_t F = model.feature_names.size();
    auto dims = parse_double_line(lines[2], 3, 5);
    if (dims[0] != kWindowSteps) throw FormatError(3, "timestep count must be 3");
    if (dims[1] != static_cast<double>(F))
        throw FormatError(3, "feature count does not match name list");
    model.max_depth = static_cast<std::size_t>(dims[2]);
    model.min_leaf = static_cast<std::size_t>(dims[3]);
    std::size_t node_count = static_cast<std::size_t>(dims[4]);
    model.norm = parse_norm_line(lines[3], 4, F);

    std::size_t cursor = 4;
    parse_node(lines, cursor, kWindowSteps * F, model.nodes);
    if (cursor != lines.size())
        throw FormatError(cursor + 1, "trailing content after tree nodes");
    if (model.nodes.size() != node_count)
        throw FormatError(3, "node count does not match serialized tree");
    return model;
}

} // namespace crashcast
