#include <benchmark/benchmark.h>

#include "crashcast/eval.hpp"
#include "crashcast/features.hpp"
#include "crashcast/ingest.hpp"
#include "crashcast/neuralnet.hpp"
#include "crashcast/rng.hpp"

using namespace crashcast;

namespace {

Dataset make_dataset(std::size_t windows, std::size_t features, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    for (std::size_t f = 0; f < features; ++f) d.feature_names.push_back("f" + std::to_string(f));
    d.windows.resize(windows);
    for (std::size_t i = 0; i < windows; ++i) {
        Window& w = d.windows[i];
        w.sensor_id = "S01";
        w.end_time = static_cast<std::int64_t>(i) * kIntervalSeconds;
        w.label = i % 6 == 0 ? 1.0 : 0.0;
        w.matrix = Mat(kWindowSteps, features);
        for (double& v : w.matrix.data) v = rng.uniform();
    }
    return d;
}

NormalizationParams unit_norm(std::size_t features) {
    NormalizationParams p;
    p.min.assign(features, 0.0);
    p.max.assign(features, 1.0);
    p.constant.assign(features, 0);
    return p;
}

void BM_ConvForward(benchmark::State& state) {
    CnnConfig cfg;
    cfg.seed = 7;
    std::vector<std::string> names(10, "f");
    CnnModel model = init_cnn(names, unit_norm(10), cfg);
    Mat window(kWindowSteps, 10);
    Rng rng(11);
    for (double& v : window.data) v = rng.uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(model, window));
    }
}
BENCHMARK(BM_ConvForward);

void BM_CnnTrainEpoch(benchmark::State& state) {
    Dataset d = make_dataset(512, 10, 3);
    NormalizationParams norm = unit_norm(10);
    for (auto _ : state) {
        CnnConfig cfg;
        cfg.seed = 7;
        cfg.epochs = 1;
        TrainingTrace trace;
        benchmark::DoNotOptimize(train_cnn(d, norm, cfg, trace));
    }
}
BENCHMARK(BM_CnnTrainEpoch)->Unit(benchmark::kMillisecond);

void BM_RocAuc(benchmark::State& state) {
    Rng rng(5);
    std::size_t n = static_cast<std::size_t>(state.range(0));
    std::vector<double> scores(n);
    std::vector<bool> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
        truth[i] = i % 3 == 0;
        scores[i] = rng.uniform() + (truth[i] ? 0.3 : 0.0);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(auc(roc_curve(scores, truth)));
    }
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(10000);

void BM_ExtraTrees(benchmark::State& state) {
    Dataset d = make_dataset(1000, 14, 9);
    for (auto _ : state) {
        benchmark::DoNotOptimize(extra_trees_importance(d, 25, 13));
    }
}
BENCHMARK(BM_ExtraTrees)->Unit(benchmark::kMillisecond);

void BM_Aggregate(benchmark::State& state) {
    Rng rng(17);
    std::vector<RawSensorRecord> records(20000);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].timestamp = static_cast<std::int64_t>(rng.index(86400));
        records[i].sensor_id = "S" + std::to_string(rng.index(4));
        for (double& v : records[i].traffic) v = rng.uniform() * 100.0;
    }
    for (auto _ : state) {
        auto copy = records;
        benchmark::DoNotOptimize(aggregate_intervals(std::move(copy)));
    }
}
BENCHMARK(BM_Aggregate)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
