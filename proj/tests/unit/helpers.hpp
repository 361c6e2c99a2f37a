#pragma once

// Shared fixtures for the unit tests: tiny window/dataset builders and a
// self-cleaning temp directory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crashcast/label.hpp"
#include "crashcast/rng.hpp"

namespace testutil {

inline crashcast::Window make_window(std::string sensor, std::int64_t end_time, double label,
                                     const std::vector<double>& flat_values) {
    crashcast::Window w;
    w.sensor_id = std::move(sensor);
    w.end_time = end_time;
    w.label = label;
    std::size_t f = flat_values.size() / crashcast::kWindowSteps;
    w.matrix = crashcast::Mat(crashcast::kWindowSteps, f);
    w.matrix.data = flat_values;
    w.provenance = label == 1.0   ? crashcast::Provenance::CrashHigh
                   : label == 0.5 ? crashcast::Provenance::CrashFar
                                  : crashcast::Provenance::MatchedNonCrash;
    return w;
}

inline std::vector<std::string> feature_names(std::size_t f) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < f; ++i) names.push_back("f" + std::to_string(i));
    return names;
}

// Random dataset with labels drawn from {0, 0.5, 1}.
inline crashcast::Dataset random_dataset(std::size_t n, std::size_t f, std::uint64_t seed) {
    crashcast::Dataset ds;
    ds.feature_names = feature_names(f);
    crashcast::Rng rng(seed);
    static const double kLabels[3] = {0.0, 0.5, 1.0};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> flat(crashcast::kWindowSteps * f);
        for (auto& v : flat) v = rng.uniform();
        ds.windows.push_back(
            make_window("S" + std::to_string(i % 4), 240 * static_cast<std::int64_t>(i),
                        kLabels[rng.index(3)], flat));
    }
    return ds;
}

// Unique per-test scratch directory under the system temp root, destroyed on
// scope exit so reruns never see stale files.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("crashcast_ut_" + tag);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace testutil
