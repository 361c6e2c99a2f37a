#include "crashcast/neuralnet.hpp"

#include <cmath>

#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"
#include "crashcast/model_io.hpp"

namespace crashcast {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void init_uniform(Rng& rng, double* data, std::size_t n, std::size_t fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
}

Mat normalize_window(const Mat& window, const NormalizationParams& params) {
    if (window.cols != params.min.size())
        throw FeatureMismatchError("window has " + std::to_string(window.cols) +
                                   " features, normalization expects " +
                                   std::to_string(params.min.size()));
    Mat out = window;
    for (std::size_t t = 0; t < out.rows; ++t)
        for (std::size_t f = 0; f < out.cols; ++f) {
            if (params.constant[f]) {
                out(t, f) = 0.0;
                continue;
            }
            double v = (out(t, f) - params.min[f]) / (params.max[f] - params.min[f]);
            out(t, f) = std::clamp(v, 0.0, 1.0);
        }
    return out;
}

ParamRefs collect_params(CnnModel& model) {
    ParamRefs refs;
    refs.add(model.conv_w.data.data(), model.conv_w.size());
    refs.add(model.conv_b.data(), model.conv_b.size());
    refs.add(model.dense1_w.data.data(), model.dense1_w.size());
    refs.add(model.dense1_b.data(), model.dense1_b.size());
    refs.add(model.dense2_w.data(), model.dense2_w.size());
    refs.add(&model.dense2_b, 1);
    return refs;
}

void adam_step(const ParamRefs& params, const std::vector<double>& grads, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon) {
    if (grads.size() != params.total)
        throw DimensionMismatchError("gradient vector size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.total, 0.0);
        state.v.assign(params.total, 0.0);
    }
    ++state.step;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    std::size_t k = 0;
    for (auto [ptr, n] : params.spans)
        for (std::size_t i = 0; i < n; ++i, ++k) {
            state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * grads[k];
            state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * grads[k] * grads[k];
            double mhat = state.m[k] / bc1;
            double vhat = state.v[k] / bc2;
            ptr[i] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
        }
}

void sgd_momentum_step(const ParamRefs& params, const std::vector<double>& grads,
                       std::vector<double>& velocity, double learning_rate, double momentum) {
    if (grads.size() != params.total)
        throw DimensionMismatchError("gradient vector size mismatch");
    if (velocity.empty()) velocity.assign(params.total, 0.0);
    std::size_t k = 0;
    for (auto [ptr, n] : params.spans)
        for (std::size_t i = 0; i < n; ++i, ++k) {
            velocity[k] = -learning_rate * grads[k] + momentum * velocity[k];
            ptr[i] += velocity[k];
        }
}

Mat conv1d_forward(const Mat& input, const Mat& weights, const std::vector<double>& biases,
                   std::size_t kernel_width) {
    if (input.rows < kernel_width)
        throw DimensionMismatchError("input shorter than kernel");
    const std::size_t filters = weights.rows;
    if (weights.cols != kernel_width * input.cols || biases.size() != filters)
        throw DimensionMismatchError("conv weight shape mismatch");
    const std::size_t out_len = input.rows - kernel_width + 1;
    Mat out(out_len, filters);
    for (std::size_t t = 0; t < out_len; ++t)
        for (std::size_t j = 0; j < filters; ++j) {
            double acc = biases[j];
            for (std::size_t dt = 0; dt < kernel_width; ++dt)
                for (std::size_t f = 0; f < input.cols; ++f)
                    acc += input(t + dt, f) * weights(j, dt * input.cols + f);
            out(t, j) = acc;
        }
    return out;
}

Mat maxpool_forward(const Mat& input, std::size_t pool_width, std::vector<std::size_t>* argmax) {
    const std::size_t out_len = input.rows / pool_width;
    if (out_len == 0) throw EmptyAfterPoolError("pool width exceeds input length");
    Mat out(out_len, input.cols);
    if (argmax) argmax->assign(out_len * input.cols, 0);
    for (std::size_t p = 0; p < out_len; ++p)
        for (std::size_t c = 0; c < input.cols; ++c) {
            std::size_t best_row = p * pool_width;
            double best = input(best_row, c);
            for (std::size_t k = 1; k < pool_width; ++k) {
                double v = input(p * pool_width + k, c);
                if (v > best) {
                    best = v;
                    best_row = p * pool_width + k;
                }
            }
            out(p, c) = best;
            if (argmax) (*argmax)[p * input.cols + c] = best_row;
        }
    return out;
}

namespace {

struct ForwardState {
    Mat z1;    // conv pre-activation
    Mat a1;    // relu(z1)
    Mat pooled;
    std::vector<std::size_t> argmax;
    std::vector<double> z2;
    std::vector<double> a2;
    double z3 = 0.0;
    double y = 0.0;
};

void forward_pass(const CnnModel& model, const Mat& x, ForwardState& s) {
    s.z1 = conv1d_forward(x, model.conv_w, model.conv_b, model.kernel_width);
    s.a1 = s.z1;
    for (double& v : s.a1.data) v = v > 0.0 ? v : 0.0;
    s.pooled = maxpool_forward(s.a1, model.pool_width, &s.argmax);

    const std::size_t flat = s.pooled.size();
    s.z2.assign(model.dense_width, 0.0);
    s.a2.assign(model.dense_width, 0.0);
    for (std::size_t u = 0; u < model.dense_width; ++u) {
        double acc = model.dense1_b[u];
        for (std::size_t v = 0; v < flat; ++v) acc += model.dense1_w(u, v) * s.pooled.data[v];
        s.z2[u] = acc;
        s.a2[u] = acc > 0.0 ? acc : 0.0;
    }
    double acc = model.dense2_b;
    for (std::size_t u = 0; u < model.dense_width; ++u) acc += model.dense2_w[u] * s.a2[u];
    s.z3 = acc;
    s.y = sigmoid(acc);
}

struct GradViews {
    double* conv_w;
    double* conv_b;
    double* dense1_w;
    double* dense1_b;
    double* dense2_w;
    double* dense2_b;
};

GradViews grad_views(const CnnModel& model, std::vector<double>& grads) {
    GradViews g;
    std::size_t off = 0;
    g.conv_w = grads.data() + off;
    off += model.conv_w.size();
    g.conv_b = grads.data() + off;
    off += model.conv_b.size();
    g.dense1_w = grads.data() + off;
    off += model.dense1_w.size();
    g.dense1_b = grads.data() + off;
    off += model.dense1_b.size();
    g.dense2_w = grads.data() + off;
    off += model.dense2_w.size();
    g.dense2_b = grads.data() + off;
    return g;
}

// Accumulate d(loss)/d(params) for one sample given dL/dy.
void backward_pass(const CnnModel& model, const Mat& x, const ForwardState& s, double dy,
                   GradViews& g, std::vector<double>& scratch_dpool,
                   std::vector<double>& scratch_dz1) {
    const std::size_t F = x.cols;
    const std::size_t flat = s.pooled.size();

    double dz3 = dy * s.y * (1.0 - s.y);
    g.dense2_b[0] += dz3;

    scratch_dpool.assign(flat, 0.0);
    for (std::size_t u = 0; u < model.dense_width; ++u) {
        g.dense2_w[u] += dz3 * s.a2[u];
        double da2 = model.dense2_w[u] * dz3;
        double dz2 = s.z2[u] > 0.0 ? da2 : 0.0;
        if (dz2 == 0.0) continue;
        g.dense1_b[u] += dz2;
        double* wrow = g.dense1_w + u * flat;
        for (std::size_t v = 0; v < flat; ++v) {
            wrow[v] += dz2 * s.pooled.data[v];
            scratch_dpool[v] += model.dense1_w(u, v) * dz2;
        }
    }

    scratch_dz1.assign(s.z1.size(), 0.0);
    for (std::size_t p = 0; p < s.pooled.rows; ++p)
        for (std::size_t c = 0; c < s.pooled.cols; ++c) {
            double d = scratch_dpool[p * s.pooled.cols + c];
            if (d == 0.0) continue;
            std::size_t row = s.argmax[p * s.pooled.cols + c];
            if (s.z1(row, c) > 0.0) scratch_dz1[row * s.z1.cols + c] += d;
        }

    for (std::size_t t = 0; t < s.z1.rows; ++t)
        for (std::size_t j = 0; j < s.z1.cols; ++j) {
            double dz1 = scratch_dz1[t * s.z1.cols + j];
            if (dz1 == 0.0) continue;
            g.conv_b[j] += dz1;
            double* wrow = g.conv_w + j * model.conv_w.cols;
            for (std::size_t dt = 0; dt < model.kernel_width; ++dt)
                for (std::size_t f = 0; f < F; ++f) wrow[dt * F + f] += dz1 * x(t + dt, f);
        }
}

} // namespace

double forward(const CnnModel& model, const Mat& window) {
    if (window.cols != model.feature_names.size())
        throw FeatureMismatchError("window feature count " + std::to_string(window.cols) +
                                   " != model feature count " +
                                   std::to_string(model.feature_names.size()));
    ForwardState s;
    forward_pass(model, window, s);
    return s.y;
}

double cnn_batch_gradients(CnnModel& model, const std::vector<const Mat*>& inputs,
                           const std::vector<double>& targets, std::vector<double>& grads) {
    if (inputs.size() != targets.size())
        throw LengthMismatchError("inputs/targets length mismatch");
    ParamRefs refs = collect_params(model);
    grads.assign(refs.total, 0.0);
    GradViews g = grad_views(model, grads);

    const double n = static_cast<double>(inputs.size());
    double mse = 0.0;
    ForwardState s;
    std::vector<double> dpool, dz1;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        forward_pass(model, *inputs[i], s);
        double err = s.y - targets[i];
        mse += err * err / n;
        backward_pass(model, *inputs[i], s, 2.0 * err / n, g, dpool, dz1);
    }
    return mse;
}

CnnModel init_cnn(const std::vector<std::string>& feature_names, const NormalizationParams& norm,
                  const CnnConfig& config) {
    const std::size_t F = feature_names.size();
    if (config.kernel_width > kWindowSteps)
        throw DimensionMismatchError("kernel width exceeds timestep count");
    CnnModel model;
    model.feature_names = feature_names;
    model.norm = norm;
    model.filter_count = config.filter_count;
    model.kernel_width = config.kernel_width;
    model.pool_width = config.pool_width;
    model.dense_width = config.dense_width;
    if (model.pooled_len() == 0)
        throw EmptyAfterPoolError("pool width exceeds conv output length");

    model.conv_w = Mat(config.filter_count, config.kernel_width * F);
    model.conv_b.assign(config.filter_count, 0.0);
    model.dense1_w = Mat(config.dense_width, config.filter_count * model.pooled_len());
    model.dense1_b.assign(config.dense_width, 0.0);
    model.dense2_w.assign(config.dense_width, 0.0);
    model.dense2_b = 0.0;

    Rng rng(derive_seed(config.seed, "cnn_init"));
    init_uniform(rng, model.conv_w.data.data(), model.conv_w.size(), config.kernel_width * F);
    init_uniform(rng, model.dense1_w.data.data(), model.dense1_w.size(),
                 config.filter_count * model.pooled_len());
    init_uniform(rng, model.dense2_w.data(), model.dense2_w.size(), config.dense_width);
    return model;
}

CnnModel train_cnn(const Dataset& train, const NormalizationParams& norm, const CnnConfig& config,
                   TrainingTrace& trace) {
    CnnModel model = init_cnn(train.feature_names, norm, config);
    const std::size_t n = train.windows.size();
    if (n == 0) throw InputError("empty training set");
    const std::size_t batch = std::min(config.batch_cap, n);

    AdamState state;
    std::vector<double> grads;
    std::vector<const Mat*> inputs(batch);
    std::vector<double> targets(batch);
    trace.epoch_train_mse.clear();
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        // Full-batch at the default sizes; larger sets cycle through
        // contiguous batch_cap-row slices.
        std::size_t start = (epoch * batch) % n;
        for (std::size_t i = 0; i < batch; ++i) {
            const Window& w = train.windows[(start + i) % n];
            inputs[i] = &w.matrix;
            targets[i] = w.label;
        }
        double mse = cnn_batch_gradients(model, inputs, targets, grads);
        if (!std::isfinite(mse)) throw NonFiniteLossError(epoch);
        trace.epoch_train_mse.push_back(mse);
        ParamRefs refs = collect_params(model);
        adam_step(refs, grads, state, config.learning_rate, config.adam_beta1, config.adam_beta2,
                  config.adam_epsilon);
    }
    return model;
}

double predict_cnn(const CnnModel& model, const Window& window) {
    Mat x = normalize_window(window.matrix, model.norm);
    return forward(model, x);
}

std::vector<double> predict_cnn_all(const CnnModel& model, const Dataset& dataset) {
    if (dataset.feature_names != model.feature_names)
        throw FeatureMismatchError("dataset features do not match model features");
    std::vector<double> out;
    out.reserve(dataset.windows.size());
    for (const auto& w : dataset.windows) out.push_back(predict_cnn(model, w));
    return out;
}

ClassScores class_scores(double risk_score) {
    static constexpr double centers[3] = {0.0, 0.5, 1.0};
    ClassScores out;
    for (std::size_t c = 0; c < 3; ++c) {
        double s = 1.0 - std::fabs(risk_score - centers[c]) / 0.5;
        out.scores[c] = s > 0.0 ? s : 0.0;
    }
    // >= sends exact midpoint ties (0.25, 0.75) to the higher-risk class.
    out.predicted = 0;
    for (std::size_t c = 1; c < 3; ++c)
        if (out.scores[c] >= out.scores[out.predicted]) out.predicted = c;
    return out;
}

void save_cnn_model(const std::string& path, const CnnModel& model) {
    std::string buf = "crashcast-model v1\n";
    buf += format_name_line(model.feature_names);
    buf += '\n';
    buf += std::to_string(kWindowSteps) + ' ' + std::to_string(model.feature_names.size()) + ' ' +
           std::to_string(model.filter_count) + ' ' + std::to_string(model.kernel_width) + ' ' +
           std::to_string(model.pool_width) + ' ' + std::to_string(model.dense_width);
    buf += '\n';
    buf += format_norm_line(model.norm);
    buf += '\n';
    buf += format_double_line(model.conv_w.data.data(), model.conv_w.size());
    buf += '\n';
    buf += format_double_line(model.conv_b.data(), model.conv_b.size());
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

CnnModel load_cnn_model(const std::string& path) {
    auto lines = read_model_lines(path);
    if (lines.size() != 10) throw FormatError(lines.size(), "cnn model file must have 10 lines");
    if (lines[0] != "crashcast-model v1")
        throw FormatError(1, "unsupported model header '" + lines[0] + "'");

    CnnModel model;
    model.feature_names = parse_name_line(lines[1], 2);
    const std::size_t F = model.feature_names.size();

    auto dims = parse_double_line(lines[2], 3, 6);
    if (dims[0] != kWindowSteps) throw FormatError(3, "timestep count must be 3");
    if (dims[1] != static_cast<double>(F))
        throw FormatError(3, "feature count does not match name list");
    model.filter_count = static_cast<std::size_t>(dims[2]);
    model.kernel_width = static_cast<std::size_t>(dims[3]);
    model.pool_width = static_cast<std::size_t>(dims[4]);
    model.dense_width = static_cast<std::size_t>(dims[5]);
    if (model.filter_count == 0 || model.kernel_width == 0 || model.kernel_width > kWindowSteps ||
        model.pool_width == 0 || model.dense_width == 0 || model.pooled_len() == 0)
        throw FormatError(3, "inconsistent architecture dimensions");

    model.norm = parse_norm_line(lines[3], 4, F);

    auto conv_w = parse_double_line(lines[4], 5, model.filter_count * model.kernel_width * F);
    model.conv_w = Mat(model.filter_count, model.kernel_width * F);
    model.conv_w.data = std::move(conv_w);
    model.conv_b = parse_double_line(lines[5], 6, model.filter_count);
    auto d1 = parse_double_line(lines[6], 7,
                                model.dense_width * model.filter_count * model.pooled_len());
    model.dense1_w = Mat(model.dense_width, model.filter_count * model.pooled_len());
    model.dense1_w.data = std::move(d1);
    model.dense1_b = parse_double_line(lines[7], 8, model.dense_width);
    model.dense2_w = parse_double_line(lines[8], 9, model.dense_width);
    model.dense2_b = parse_double_line(lines[9], 10, 1)[0];
    return model;
}

void write_trace_csv(const std::string& path, const TrainingTrace& trace) {
    std::string buf = "epoch,train_mse\n";
    for (std::size_t e = 0; e < trace.epoch_train_mse.size(); ++e) {
        buf += std::to_string(e + 1);
        buf += ',';
        buf += format_double(trace.epoch_train_mse[e]);
        buf += '\n';
    }
    write_entire_file(path, buf);
}

} // namespace crashcast
