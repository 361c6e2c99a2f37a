#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crashcast/ingest.hpp"
#include "crashcast/mat.hpp"

namespace crashcast {

inline constexpr std::size_t kWindowSteps = 3;

enum class LabelPolicy { NearFar, SingleWindow };

enum class Provenance { CrashHigh, CrashFar, MatchedNonCrash };

struct Window {
    std::string sensor_id;
    std::int64_t end_time = 0; // end of the last (newest) interval
    double label = 0.0;        // one of {0, 0.5, 1}
    Mat matrix;                // kWindowSteps x F, rows oldest->newest
    Provenance provenance = Provenance::MatchedNonCrash;
};

struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<Window> windows;

    std::size_t count_label(double value) const {
        std::size_t n = 0;
        for (const auto& w : windows)
            if (w.label == value) ++n;
        return n;
    }
};

struct LabelSummary {
    std::size_t crash_windows = 0;      // label 1.0
    std::size_t far_windows = 0;        // label 0.5
    std::size_t noncrash_windows = 0;   // label 0.0
    std::size_t skipped_crashes = 0;    // events lacking the high window
    std::size_t insufficient_events = 0; // events with < ratio candidate days
};

double assign_risk_label(Provenance origin);

// One high-risk window per crash with full 12-minute history; near-far policy
// adds a low-risk window over minutes 24-12 before the crash when present.
std::vector<Window> extract_crash_windows(const std::vector<IntervalRecord>& intervals,
                                          const std::vector<CrashEvent>& crashes,
                                          LabelPolicy policy,
                                          LabelSummary& summary);

// Per crash, up to `ratio` windows at the same sensor and same local
// time-of-day on uniformly drawn other days with no crash within +-30 min.
std::vector<Window> sample_matched_noncrash(const std::vector<IntervalRecord>& intervals,
                                            const std::vector<CrashEvent>& crashes,
                                            unsigned ratio,
                                            std::uint64_t rng_seed,
                                            LabelSummary& summary,
                                            std::int64_t utc_offset = kDefaultUtcOffset);

// Stratified split: per class, floor(count * train_fraction) rows to train.
// Outputs keep the original window order.
void split_train_test(const Dataset& dataset, double train_fraction, std::uint64_t seed,
                      Dataset& train, Dataset& test);

void write_dataset_csv(const std::string& path, const Dataset& dataset);
Dataset read_dataset_csv(const std::string& path);

} // namespace crashcast
