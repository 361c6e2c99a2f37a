#include "crashcast/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"
#include "crashcast/rng.hpp"

namespace crashcast {

namespace {

constexpr double kRushPeaks[2] = {8.0, 18.0}; // local hours
constexpr double kRushHalfWidth = 3.0;
constexpr std::size_t kSpeedFeatures = 2; // indices 0..1; 2..11 are volumes

// Lane children are affine in their parents so four of the eight entry-lane
// volumes are redundant by construction: vl1<-vl2, vl4<-vl3, vl7<-vl5, vl8<-vl6.
constexpr std::size_t kBaseDraws[8] = {0, 1, 2, 3, 5, 6, 8, 9};
constexpr std::size_t kChildPairs[4][2] = {{4, 5}, {7, 6}, {10, 8}, {11, 9}};

double rush_bump(double hour, double peak) {
    double d = std::fabs(hour - peak);
    if (d >= kRushHalfWidth) return 0.0;
    double c = std::cos(M_PI * d / (2.0 * kRushHalfWidth));
    return c * c;
}

// Zero-mean profile in [-1/3, 1] whose peaks scale traffic by the full
// diurnal amplitude.
double diurnal_profile(double hour) {
    double b = rush_bump(hour, kRushPeaks[0]) + rush_bump(hour, kRushPeaks[1]);
    return (b - 0.25) / 0.75;
}

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double round_decimals(double v, int decimals) {
    double s = decimals == 1 ? 10.0 : 1.0;
    return std::round(v * s) / s;
}

std::string sensor_name(std::size_t index, std::size_t count) {
    int width = 1;
    for (std::size_t c = count; c >= 10; c /= 10) ++width;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "S%0*zu", width, index + 1);
    return std::string(buf);
}

class ChunkedWriter {
public:
    explicit ChunkedWriter(const std::string& path)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw InputError("cannot open " + path + " for writing");
        buf_.reserve(kFlushAt + 4096);
    }

    void append(const std::string& s) {
        buf_ += s;
        if (buf_.size() >= kFlushAt) flush();
    }
    void append(char c) {
        buf_ += c;
        if (buf_.size() >= kFlushAt) flush();
    }

    void finish() {
        flush();
        out_.close();
        if (!out_) throw InputError("write failed for " + path_);
    }

private:
    static constexpr std::size_t kFlushAt = 1 << 22;

    void flush() {
        if (buf_.empty()) return;
        out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out_) throw InputError("write failed for " + path_);
        buf_.clear();
    }

    std::string path_;
    std::ofstream out_;
    std::string buf_;
};

struct Welford {
    std::size_t n = 0;
    double mean = 0.0, m2 = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        ++n;
        double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double std_dev() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
};

} // namespace

SynthSpec SynthSpec::defaults() {
    SynthSpec s;
    // Published per-feature mean/std/min/max for the study corridor. The vl8
    // bounds appear garbled in print; 0..55 keeps min <= mean <= max.
    s.traffic[0] = {75.06, 26.23, 3.0, 123.0};  // up_speed
    s.traffic[1] = {72.49, 29.50, 4.0, 247.0};  // down_speed
    s.traffic[2] = {176.52, 57.40, 1.0, 314.0}; // up_volume
    s.traffic[3] = {113.78, 61.95, 0.0, 296.0}; // down_volume
    s.traffic[4] = {12.63, 16.50, 0.0, 246.0};  // vl1
    s.traffic[5] = {16.19, 19.84, 0.0, 207.0};  // vl2
    s.traffic[6] = {16.41, 23.34, 0.0, 93.0};   // vl3
    s.traffic[7] = {14.42, 20.88, 0.0, 88.0};   // vl4
    s.traffic[8] = {13.70, 18.02, 0.0, 105.0};  // vl5
    s.traffic[9] = {11.16, 12.08, 0.0, 68.0};   // vl6
    s.traffic[10] = {2.35, 5.43, 0.0, 61.0};    // vl7
    s.traffic[11] = {2.40, 5.11, 0.0, 55.0};    // vl8
    s.temperature = {17.71, 7.00, 0.0, 29.0};
    return s;
}

void SynthSpec::validate() const {
    auto check_stats = [&](const FeatureStats& f, const char* name) {
        if (!(f.min <= f.mean && f.mean <= f.max))
            throw InputError(std::string(name) + ": min <= mean <= max violated");
        if (f.std_dev < 0.0 || (f.std_dev == 0.0 && !allow_zero_std))
            throw InputError(std::string(name) + ": std must be positive");
    };
    for (std::size_t i = 0; i < kTrafficFeatureCount; ++i)
        check_stats(traffic[i], kFeatureNames[i]);
    check_stats(temperature, "temperature");
    if (precipitation_rate < 0.0 || precipitation_rate > 1.0)
        throw InputError("precipitation rate must lie in [0, 1]");
    if (sensor_count == 0 || study_days == 0) throw InputError("need sensors and days");
    if (reading_period <= 0 || kSecondsPerDay % reading_period != 0)
        throw InputError("reading period must divide a day");
    if (speed_drop_fraction < 0.0 || speed_drop_fraction >= 1.0 ||
        volume_surge_fraction < 0.0)
        throw InputError("precursor fractions out of range");
    if (onset_minutes <= 0) throw InputError("onset must be positive");
    if (noise_scale < 0.0) throw InputError("noise scale must be non-negative");
    if (redundancy_rho < 0.0 || redundancy_rho > 1.0)
        throw InputError("redundancy correlation must lie in [0, 1]");

    std::int64_t span = static_cast<std::int64_t>(study_days) * kSecondsPerDay - 1440;
    if (span <= 0) throw SpecInfeasibleError("study too short for any crash");
    std::size_t capacity =
        sensor_count * static_cast<std::size_t>(span / 3601 + 1);
    if (crash_count > capacity)
        throw SpecInfeasibleError("crash count exceeds 30-minute spacing capacity");
}

namespace {

std::vector<WeatherRecord> make_weather(const SynthSpec& spec, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "weather"));
    std::int64_t d0 = local_day_index(spec.start_epoch, spec.utc_offset);
    std::vector<WeatherRecord> out;
    out.reserve(spec.study_days);
    for (std::size_t day = 0; day < spec.study_days; ++day) {
        WeatherRecord rec;
        rec.date = civil_from_days(d0 + static_cast<std::int64_t>(day));
        double t = rng.normal(spec.temperature.mean, spec.temperature.std_dev);
        t = clip(round_decimals(clip(t, spec.temperature.min, spec.temperature.max), 1),
                 spec.temperature.min, spec.temperature.max);
        rec.temperature = t;
        rec.precipitation = rng.bernoulli(spec.precipitation_rate) ? 1 : 0;
        out.push_back(rec);
    }
    return out;
}

std::vector<CrashEvent> make_crashes(const SynthSpec& spec, std::uint64_t seed,
                                     std::vector<std::vector<std::int64_t>>& per_sensor) {
    Rng rng(derive_seed(seed, "crashes"));
    std::int64_t span = static_cast<std::int64_t>(spec.study_days) * kSecondsPerDay - 1440;
    per_sensor.assign(spec.sensor_count, {});

    std::vector<std::pair<std::int64_t, std::size_t>> placed;
    placed.reserve(spec.crash_count);
    std::size_t attempts = 0;
    const std::size_t max_attempts = spec.crash_count * 400 + 100000;
    while (placed.size() < spec.crash_count) {
        if (++attempts > max_attempts)
            throw SpecInfeasibleError("crash placement rejected too often; "
                                      "lower crash_count or add days/sensors");
        std::size_t s = static_cast<std::size_t>(rng.index(spec.sensor_count));
        std::int64_t t = spec.start_epoch + 1440 +
                         static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(span)));
        auto& times = per_sensor[s];
        auto lo = std::lower_bound(times.begin(), times.end(), t - 1800);
        if (lo != times.end() && *lo <= t + 1800) continue;
        times.insert(std::upper_bound(times.begin(), times.end(), t), t);
        placed.emplace_back(t, s);
    }

    std::sort(placed.begin(), placed.end());
    std::vector<CrashEvent> events;
    events.reserve(placed.size());
    for (const auto& [t, s] : placed)
        events.push_back(CrashEvent{t, sensor_name(s, spec.sensor_count)});
    return events;
}

void write_sensor_rows(const SynthSpec& spec, std::uint64_t seed, const std::string& path,
                       const std::vector<std::vector<std::int64_t>>& crash_times) {
    ChunkedWriter out(path);
    out.append("timestamp,sensor_id,up_speed,down_speed,up_volume,down_volume,"
               "vl1,vl2,vl3,vl4,vl5,vl6,vl7,vl8\n");

    const std::int64_t onset = spec.onset_minutes * 60;
    const std::size_t per_day = static_cast<std::size_t>(kSecondsPerDay / spec.reading_period);
    const std::size_t total = spec.study_days * per_day;
    const std::uint64_t row_stream = derive_seed(seed, "sensor_rows");
    const double rho = spec.redundancy_rho;
    const double child_noise = std::sqrt(1.0 - rho * rho);

    double raw[kTrafficFeatureCount];
    for (std::size_t s = 0; s < spec.sensor_count; ++s) {
        Rng rng(derive_seed(row_stream, static_cast<std::uint64_t>(s)));
        const std::string id = sensor_name(s, spec.sensor_count);
        const auto& times = crash_times[s];
        std::size_t next_crash = 0;

        for (std::size_t k = 0; k < total; ++k) {
            std::int64_t t =
                spec.start_epoch + static_cast<std::int64_t>(k) * spec.reading_period;
            double hour =
                static_cast<double>(local_time_of_day(t, spec.utc_offset)) / 3600.0;
            double g = diurnal_profile(hour);

            while (next_crash < times.size() && times[next_crash] <= t) ++next_crash;
            bool in_onset = next_crash < times.size() && times[next_crash] - t <= onset;

            for (std::size_t f : kBaseDraws)
                raw[f] = rng.normal(spec.traffic[f].mean, spec.traffic[f].std_dev);
            for (const auto& pair : kChildPairs) {
                const FeatureStats& c = spec.traffic[pair[0]];
                const FeatureStats& p = spec.traffic[pair[1]];
                double scale = p.std_dev > 0.0 ? c.std_dev / p.std_dev : 0.0;
                raw[pair[0]] = c.mean + rho * scale * (raw[pair[1]] - p.mean) +
                               child_noise * c.std_dev * rng.normal();
            }

            out.append(std::to_string(t));
            out.append(',');
            out.append(id);
            for (std::size_t f = 0; f < kTrafficFeatureCount; ++f) {
                const FeatureStats& st = spec.traffic[f];
                bool is_speed = f < kSpeedFeatures;
                double v = raw[f] * (is_speed ? 1.0 - spec.diurnal_amplitude * g
                                              : 1.0 + spec.diurnal_amplitude * g);
                if (in_onset) {
                    v *= is_speed ? 1.0 - spec.speed_drop_fraction
                                  : 1.0 + spec.volume_surge_fraction;
                    v += spec.noise_scale * st.std_dev * rng.normal();
                }
                v = clip(v, st.min, st.max);
                v = clip(round_decimals(v, is_speed ? 1 : 0), st.min, st.max);
                out.append(',');
                out.append(format_double(v));
            }
            out.append('\n');
        }
    }
    out.finish();
}

} // namespace

void generate(const SynthSpec& spec, std::uint64_t seed, const SynthPaths& paths) {
    spec.validate();
    write_weather_csv(paths.weather, make_weather(spec, seed));
    std::vector<std::vector<std::int64_t>> crash_times;
    write_crash_csv(paths.crashes, make_crashes(spec, seed, crash_times));
    write_sensor_rows(spec, seed, paths.sensors, crash_times);
}

VerifyReport verify_spec(const SynthPaths& paths, const SynthSpec& spec) {
    std::array<Welford, kTrafficFeatureCount> traffic;
    stream_sensor_csv(paths.sensors, [&](const RawSensorRecord& rec) {
        for (std::size_t f = 0; f < kTrafficFeatureCount; ++f) {
            double v = rec.traffic[f];
            if (v < spec.traffic[f].min || v > spec.traffic[f].max)
                throw BoundViolationError(std::string(kFeatureNames[f]) + " = " +
                                          format_double(v) + " outside [" +
                                          format_double(spec.traffic[f].min) + ", " +
                                          format_double(spec.traffic[f].max) + "]");
            traffic[f].add(v);
        }
    });

    Welford temp, precip;
    for (const auto& rec : parse_weather_csv(paths.weather)) {
        if (rec.temperature < spec.temperature.min || rec.temperature > spec.temperature.max)
            throw BoundViolationError("temperature = " + format_double(rec.temperature) +
                                      " outside [" + format_double(spec.temperature.min) +
                                      ", " + format_double(spec.temperature.max) + "]");
        temp.add(rec.temperature);
        precip.add(rec.precipitation);
    }

    VerifyReport report;
    for (std::size_t f = 0; f < kTrafficFeatureCount; ++f) {
        const FeatureStats& st = spec.traffic[f];
        report.rows.push_back({kFeatureNames[f], st.mean, st.std_dev, st.min, st.max,
                               traffic[f].mean, traffic[f].std_dev(), traffic[f].lo,
                               traffic[f].hi, traffic[f].n});
    }
    report.rows.push_back({"temperature", spec.temperature.mean, spec.temperature.std_dev,
                           spec.temperature.min, spec.temperature.max, temp.mean,
                           temp.std_dev(), temp.lo, temp.hi, temp.n});
    double p = spec.precipitation_rate;
    report.rows.push_back({"precipitation", p, std::sqrt(p * (1.0 - p)), 0.0, 1.0,
                           precip.mean, precip.std_dev(), precip.lo, precip.hi, precip.n});
    return report;
}

void write_verify_csv(const std::string& path, const VerifyReport& report) {
    std::string buf = "feature,target_mean,target_std,spec_min,spec_max,"
                      "sample_mean,sample_std,sample_min,sample_max,count\n";
    for (const auto& row : report.rows) {
        buf += row.feature;
        buf += ',' + format_double(row.target_mean) + ',' + format_double(row.target_std);
        buf += ',' + format_double(row.spec_min) + ',' + format_double(row.spec_max);
        buf += ',' + format_double(row.mean) + ',' + format_double(row.std_dev);
        buf += ',' + format_double(row.min) + ',' + format_double(row.max);
        buf += ',' + std::to_string(row.count) + '\n';
    }
    write_entire_file(path, buf);
}

} // namespace crashcast
