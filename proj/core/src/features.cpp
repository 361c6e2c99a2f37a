#include "crashcast/features.hpp"

#include <algorithm>
#include <cmath>

#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"
#include "crashcast/rng.hpp"

namespace crashcast {

Mat time_averaged(const Dataset& dataset) {
    const std::size_t nfeat = dataset.feature_names.size();
    Mat out(dataset.windows.size(), nfeat);
    for (std::size_t i = 0; i < dataset.windows.size(); ++i) {
        const Mat& m = dataset.windows[i].matrix;
        for (std::size_t f = 0; f < nfeat; ++f) {
            double s = 0.0;
            for (std::size_t t = 0; t < kWindowSteps; ++t) s += m(t, f);
            out(i, f) = s / static_cast<double>(kWindowSteps);
        }
    }
    return out;
}

CorrelationMatrix pearson_matrix(const Dataset& dataset) {
    Mat x = time_averaged(dataset);
    const std::size_t n = x.rows;
    const std::size_t nfeat = x.cols;

    std::vector<double> mean(nfeat, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < nfeat; ++f) mean[f] += x(i, f);
    for (auto& m : mean) m /= static_cast<double>(n);

    std::vector<double> var(nfeat, 0.0);
    std::vector<double> cov(nfeat * nfeat, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < nfeat; ++a) {
            double da = x(i, a) - mean[a];
            var[a] += da * da;
            for (std::size_t b = a + 1; b < nfeat; ++b)
                cov[a * nfeat + b] += da * (x(i, b) - mean[b]);
        }

    CorrelationMatrix out;
    out.n = nfeat;
    out.r.assign(nfeat * nfeat, 0.0);
    out.defined.assign(nfeat * nfeat, 0);
    for (std::size_t a = 0; a < nfeat; ++a) {
        if (var[a] <= 0.0) continue;
        out.r[a * nfeat + a] = 1.0;
        out.defined[a * nfeat + a] = 1;
        for (std::size_t b = a + 1; b < nfeat; ++b) {
            if (var[b] <= 0.0) continue;
            double r = cov[a * nfeat + b] / std::sqrt(var[a] * var[b]);
            out.r[a * nfeat + b] = r;
            out.r[b * nfeat + a] = r;
            out.defined[a * nfeat + b] = 1;
            out.defined[b * nfeat + a] = 1;
        }
    }
    return out;
}

namespace {

struct TreeTask {
    std::size_t lo, hi; // index range into the shared row-index array
};

} // namespace

std::vector<double> extra_trees_importance(const Dataset& dataset, std::size_t tree_count,
                                           std::uint64_t rng_seed) {
    const std::size_t nfeat = dataset.feature_names.size();
    const std::size_t n = dataset.windows.size();
    Mat x = time_averaged(dataset);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = dataset.windows[i].label;

    bool degenerate = true;
    for (std::size_t i = 1; i < n; ++i)
        if (y[i] != y[0]) { degenerate = false; break; }
    if (n == 0 || degenerate)
        throw DegenerateTargetError("all crash-risk labels identical");

    const std::uint64_t base = derive_seed(rng_seed, "extra_trees");
    std::vector<double> importance(nfeat, 0.0);

    for (std::size_t tree = 0; tree < tree_count; ++tree) {
        const std::uint64_t tree_seed = derive_seed(base, static_cast<std::uint64_t>(tree));
        // One stream per feature NAME so column permutations permute the
        // importances identically.
        std::vector<Rng> streams;
        streams.reserve(nfeat);
        for (std::size_t f = 0; f < nfeat; ++f)
            streams.emplace_back(derive_seed(tree_seed, dataset.feature_names[f]));

        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;

        std::vector<TreeTask> stack;
        stack.push_back({0, n});
        while (!stack.empty()) {
            TreeTask task = stack.back();
            stack.pop_back();
            const std::size_t cnt = task.hi - task.lo;
            if (cnt < 5) continue;

            double sy = 0.0, sy2 = 0.0;
            double ymin = y[idx[task.lo]], ymax = ymin;
            for (std::size_t i = task.lo; i < task.hi; ++i) {
                double v = y[idx[i]];
                sy += v;
                sy2 += v * v;
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
            if (ymin == ymax) continue; // pure node
            double sse_node = sy2 - sy * sy / static_cast<double>(cnt);

            double best_reduction = 0.0;
            std::size_t best_feature = nfeat;
            double best_cut = 0.0;
            for (std::size_t f = 0; f < nfeat; ++f) {
                double fmin = x(idx[task.lo], f), fmax = fmin;
                for (std::size_t i = task.lo + 1; i < task.hi; ++i) {
                    double v = x(idx[i], f);
                    fmin = std::min(fmin, v);
                    fmax = std::max(fmax, v);
                }
                if (!(fmax > fmin)) continue;
                double cut = fmin + (fmax - fmin) * streams[f].uniform_open();
                double ls = 0.0, ls2 = 0.0;
                std::size_t ln = 0;
                for (std::size_t i = task.lo; i < task.hi; ++i) {
                    if (x(idx[i], f) < cut) {
                        double v = y[idx[i]];
                        ls += v;
                        ls2 += v * v;
                        ++ln;
                    }
                }
                if (ln == 0 || ln == cnt) continue;
                std::size_t rn = cnt - ln;
                double rs = sy - ls, rs2 = sy2 - ls2;
                double reduction = sse_node - (ls2 - ls * ls / static_cast<double>(ln)) -
                                   (rs2 - rs * rs / static_cast<double>(rn));
                if (reduction > best_reduction) {
                    best_reduction = reduction;
                    best_feature = f;
                    best_cut = cut;
                }
            }
            if (best_feature == nfeat) continue;

            importance[best_feature] += best_reduction;
            auto mid = std::stable_partition(
                idx.begin() + static_cast<std::ptrdiff_t>(task.lo),
                idx.begin() + static_cast<std::ptrdiff_t>(task.hi),
                [&](std::size_t i) { return x(i, best_feature) < best_cut; });
            std::size_t split = static_cast<std::size_t>(mid - idx.begin());
            stack.push_back({split, task.hi});
            stack.push_back({task.lo, split});
        }
    }

    double total = 0.0;
    for (double v : importance) total += v;
    if (total <= 0.0) {
        // No split anywhere reduced variance (e.g. all-constant features):
        // fall back to a uniform vector so the sum-to-1 contract holds.
        std::fill(importance.begin(), importance.end(), 1.0 / static_cast<double>(nfeat));
        return importance;
    }
    for (double& v : importance) v /= total;
    return importance;
}

std::vector<std::size_t> select_features(const std::vector<double>& importance,
                                         const CorrelationMatrix& corr,
                                         double corr_threshold) {
    const std::size_t nfeat = corr.n;
    struct Pair {
        double abs_r;
        std::size_t i, j;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < nfeat; ++i)
        for (std::size_t j = i + 1; j < nfeat; ++j)
            if (corr.is_defined(i, j) && std::fabs(corr.at(i, j)) > corr_threshold)
                pairs.push_back({std::fabs(corr.at(i, j)), i, j});
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.abs_r != b.abs_r) return a.abs_r > b.abs_r;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    std::vector<char> dropped(nfeat, 0);
    for (const auto& p : pairs) {
        // Keep the more important member; equal importances keep the lower index.
        std::size_t victim = importance[p.i] < importance[p.j] ? p.i : p.j;
        dropped[victim] = 1;
    }

    std::vector<std::size_t> kept;
    for (std::size_t f = 0; f < nfeat; ++f)
        if (!dropped[f]) kept.push_back(f);
    return kept;
}

NormalizationParams fit_minmax(const Dataset& train) {
    const std::size_t nfeat = train.feature_names.size();
    if (train.windows.empty()) throw InputError("cannot fit normalization on empty dataset");
    NormalizationParams p;
    p.min.assign(nfeat, 0.0);
    p.max.assign(nfeat, 0.0);
    p.constant.assign(nfeat, 0);
    for (std::size_t f = 0; f < nfeat; ++f) {
        double lo = train.windows[0].matrix(0, f);
        double hi = lo;
        for (const auto& w : train.windows)
            for (std::size_t t = 0; t < kWindowSteps; ++t) {
                lo = std::min(lo, w.matrix(t, f));
                hi = std::max(hi, w.matrix(t, f));
            }
        p.min[f] = lo;
        p.max[f] = hi;
        p.constant[f] = (hi == lo) ? 1 : 0;
    }
    return p;
}

void apply_minmax(Dataset& dataset, const NormalizationParams& params) {
    const std::size_t nfeat = dataset.feature_names.size();
    if (params.min.size() != nfeat)
        throw FeatureMismatchError("normalization params cover " +
                                   std::to_string(params.min.size()) + " features, dataset has " +
                                   std::to_string(nfeat));
    for (auto& w : dataset.windows)
        for (std::size_t t = 0; t < kWindowSteps; ++t)
            for (std::size_t f = 0; f < nfeat; ++f) {
                if (params.constant[f]) {
                    w.matrix(t, f) = 0.0;
                    continue;
                }
                double v = (w.matrix(t, f) - params.min[f]) / (params.max[f] - params.min[f]);
                w.matrix(t, f) = std::clamp(v, 0.0, 1.0);
            }
}

Dataset reduce_dataset(const Dataset& dataset, const std::vector<std::size_t>& kept) {
    Dataset out;
    for (std::size_t f : kept) out.feature_names.push_back(dataset.feature_names[f]);
    out.windows.reserve(dataset.windows.size());
    for (const auto& w : dataset.windows) {
        Window r;
        r.sensor_id = w.sensor_id;
        r.end_time = w.end_time;
        r.label = w.label;
        r.provenance = w.provenance;
        r.matrix = Mat(kWindowSteps, kept.size());
        for (std::size_t t = 0; t < kWindowSteps; ++t)
            for (std::size_t f = 0; f < kept.size(); ++f)
                r.matrix(t, f) = w.matrix(t, kept[f]);
        out.windows.push_back(std::move(r));
    }
    return out;
}

void write_selection_report(const std::string& path, const std::vector<std::string>& names,
                            const std::vector<double>& importance,
                            const std::vector<std::size_t>& kept) {
    std::vector<char> is_kept(names.size(), 0);
    for (std::size_t f : kept) is_kept[f] = 1;
    std::string buf = "feature,importance,kept\n";
    for (std::size_t f = 0; f < names.size(); ++f) {
        buf += names[f];
        buf += ',';
        buf += format_double(importance[f]);
        buf += ',';
        buf += is_kept[f] ? '1' : '0';
        buf += '\n';
    }
    write_entire_file(path, buf);
}

void write_correlation_csv(const std::string& path, const std::vector<std::string>& names,
                           const CorrelationMatrix& corr) {
    std::string buf = "feature";
    for (const auto& name : names) {
        buf += ',';
        buf += name;
    }
    buf += '\n';
    for (std::size_t i = 0; i < corr.n; ++i) {
        buf += names[i];
        for (std::size_t j = 0; j < corr.n; ++j) {
            buf += ',';
            buf += corr.is_defined(i, j) ? format_double(corr.at(i, j)) : "undefined";
        }
        buf += '\n';
    }
    write_entire_file(path, buf);
}

} // namespace crashcast
