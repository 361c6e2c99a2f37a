#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "crashcast/ingest.hpp"
#include "crashcast/label.hpp"

namespace crashcast {

struct FeatureStats {
    double mean = 0.0, std_dev = 0.0, min = 0.0, max = 0.0;
};

// Target statistics and layout for one synthetic study year. Traffic entries
// are indexed like kFeatureNames[0..11].
struct SynthSpec {
    std::array<FeatureStats, kTrafficFeatureCount> traffic;
    FeatureStats temperature;
    double precipitation_rate = 0.17;

    std::size_t sensor_count = 36;
    std::size_t crash_count = 1293;
    std::size_t study_days = 365;
    std::int64_t start_epoch = 1609448400; // 2021-01-01 00:00 at UTC+03:00
    std::int64_t utc_offset = kDefaultUtcOffset;
    std::int64_t reading_period = kIntervalSeconds;

    double speed_drop_fraction = 0.3;
    double volume_surge_fraction = 0.3;
    std::int64_t onset_minutes = 12;
    double noise_scale = 0.1;

    double diurnal_amplitude = 0.2; // rush-hour peaks at 08:00 and 18:00 local
    double redundancy_rho = 0.9;    // lane-volume parent/child correlation
    bool allow_zero_std = false;    // degenerate fixtures only

    static SynthSpec defaults();
    void validate() const;
};

struct SynthPaths {
    std::string sensors, weather, crashes;
};

// Writes the three CSV files; byte-identical for identical (spec, seed).
void generate(const SynthSpec& spec, std::uint64_t seed, const SynthPaths& paths);

struct VerifyRow {
    std::string feature;
    double target_mean = 0.0, target_std = 0.0;
    double spec_min = 0.0, spec_max = 0.0;
    double mean = 0.0, std_dev = 0.0, min = 0.0, max = 0.0;
    std::size_t count = 0;
};

struct VerifyReport {
    std::vector<VerifyRow> rows; // 12 traffic features + temperature + precipitation
};

// Streams back over the generated files; any value outside [min, max] is a
// hard BoundViolationError.
VerifyReport verify_spec(const SynthPaths& paths, const SynthSpec& spec);

void write_verify_csv(const std::string& path, const VerifyReport& report);

} // namespace crashcast
