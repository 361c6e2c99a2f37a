#include "crashcast/label.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"
#include "crashcast/rng.hpp"
#include "crashcast/timeutil.hpp"

namespace crashcast {

namespace {

// Binary-search view over the (sensor_id, interval_start)-sorted interval list.
class IntervalIndex {
public:
    explicit IntervalIndex(const std::vector<IntervalRecord>& intervals)
        : intervals_(intervals) {
        std::size_t i = 0;
        while (i < intervals.size()) {
            std::size_t begin = i;
            while (i < intervals.size() && intervals[i].sensor_id == intervals[begin].sensor_id)
                ++i;
            spans_[intervals[begin].sensor_id] = {begin, i};
        }
    }

    const IntervalRecord* find(const std::string& sensor, std::int64_t start) const {
        auto it = spans_.find(sensor);
        if (it == spans_.end()) return nullptr;
        auto [lo, hi] = it->second;
        auto first = intervals_.begin() + static_cast<std::ptrdiff_t>(lo);
        auto last = intervals_.begin() + static_cast<std::ptrdiff_t>(hi);
        auto pos = std::lower_bound(first, last, start,
                                    [](const IntervalRecord& r, std::int64_t s) {
                                        return r.interval_start < s;
                                    });
        if (pos == last || pos->interval_start != start) return nullptr;
        return &*pos;
    }

private:
    const std::vector<IntervalRecord>& intervals_;
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> spans_;
};

// Assemble the 3-row window ending at end_time; null when any interval is absent.
bool build_window(const IntervalIndex& index, const std::string& sensor,
                  std::int64_t end_time, double label, Provenance origin, Window& out) {
    Mat m(kWindowSteps, kFeatureCount);
    for (std::size_t t = 0; t < kWindowSteps; ++t) {
        std::int64_t start =
            end_time - static_cast<std::int64_t>(kWindowSteps - t) * kIntervalSeconds;
        const IntervalRecord* rec = index.find(sensor, start);
        if (!rec) return false;
        for (std::size_t f = 0; f < kFeatureCount; ++f) m(t, f) = rec->features[f];
    }
    out.sensor_id = sensor;
    out.end_time = end_time;
    out.label = label;
    out.matrix = std::move(m);
    out.provenance = origin;
    return true;
}

} // namespace

double assign_risk_label(Provenance origin) {
    switch (origin) {
        case Provenance::CrashHigh: return 1.0;
        case Provenance::CrashFar: return 0.5;
        case Provenance::MatchedNonCrash: return 0.0;
    }
    return 0.0;
}

std::vector<Window> extract_crash_windows(const std::vector<IntervalRecord>& intervals,
                                          const std::vector<CrashEvent>& crashes,
                                          LabelPolicy policy,
                                          LabelSummary& summary) {
    IntervalIndex index(intervals);
    std::vector<Window> out;
    for (const auto& ev : crashes) {
        std::int64_t crash_interval = floor_div(ev.timestamp, kIntervalSeconds) * kIntervalSeconds;
        Window high;
        if (!build_window(index, ev.sensor_id, crash_interval,
                          assign_risk_label(Provenance::CrashHigh), Provenance::CrashHigh, high)) {
            ++summary.skipped_crashes;
            continue;
        }
        out.push_back(std::move(high));
        ++summary.crash_windows;
        if (policy == LabelPolicy::NearFar) {
            Window far;
            if (build_window(index, ev.sensor_id,
                             crash_interval - static_cast<std::int64_t>(kWindowSteps) * kIntervalSeconds,
                             assign_risk_label(Provenance::CrashFar), Provenance::CrashFar, far)) {
                out.push_back(std::move(far));
                ++summary.far_windows;
            }
        }
    }
    return out;
}

std::vector<Window> sample_matched_noncrash(const std::vector<IntervalRecord>& intervals,
                                            const std::vector<CrashEvent>& crashes,
                                            unsigned ratio,
                                            std::uint64_t rng_seed,
                                            LabelSummary& summary,
                                            std::int64_t utc_offset) {
    if (intervals.empty() || crashes.empty()) return {};
    IntervalIndex index(intervals);

    std::unordered_map<std::string, std::vector<std::int64_t>> crash_times;
    for (const auto& ev : crashes) crash_times[ev.sensor_id].push_back(ev.timestamp);
    for (auto& [sensor, times] : crash_times) std::sort(times.begin(), times.end());

    std::int64_t min_start = intervals.front().interval_start;
    std::int64_t max_start = intervals.front().interval_start;
    for (const auto& rec : intervals) {
        min_start = std::min(min_start, rec.interval_start);
        max_start = std::max(max_start, rec.interval_start);
    }
    std::int64_t day_lo = local_day_index(min_start, utc_offset);
    std::int64_t day_hi = local_day_index(max_start, utc_offset);

    const std::uint64_t stream = derive_seed(rng_seed, "matched");
    std::vector<Window> out;
    for (const auto& ev : crashes) {
        std::int64_t crash_interval = floor_div(ev.timestamp, kIntervalSeconds) * kIntervalSeconds;
        std::int64_t crash_day = local_day_index(ev.timestamp, utc_offset);

        // Per-event stream keyed by (sensor, timestamp) so results do not
        // depend on the crash list's order.
        Rng rng(mix64(stream ^ fnv1a64(ev.sensor_id) ^ mix64(static_cast<std::uint64_t>(ev.timestamp))));

        std::vector<std::int64_t> pool;
        pool.reserve(static_cast<std::size_t>(day_hi - day_lo + 1));
        for (std::int64_t d = day_lo; d <= day_hi; ++d)
            if (d != crash_day) pool.push_back(d);

        const std::vector<std::int64_t>& times = crash_times[ev.sensor_id];
        unsigned accepted = 0;
        std::size_t remaining = pool.size();
        while (accepted < ratio && remaining > 0) {
            std::size_t j = rng.index(remaining);
            std::int64_t day = pool[j];
            pool[j] = pool[--remaining];

            std::int64_t shift = (day - crash_day) * kSecondsPerDay;
            std::int64_t moment = ev.timestamp + shift;
            auto lo = std::lower_bound(times.begin(), times.end(), moment - 1800);
            if (lo != times.end() && *lo <= moment + 1800) continue;

            Window w;
            if (!build_window(index, ev.sensor_id, crash_interval + shift,
                              assign_risk_label(Provenance::MatchedNonCrash),
                              Provenance::MatchedNonCrash, w))
                continue;
            out.push_back(std::move(w));
            ++accepted;
        }
        summary.noncrash_windows += accepted;
        if (accepted < ratio) ++summary.insufficient_events;
    }
    return out;
}

void split_train_test(const Dataset& dataset, double train_fraction, std::uint64_t seed,
                      Dataset& train, Dataset& test) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InputError("train_fraction must be in (0, 1)");

    const double classes[3] = {0.0, 0.5, 1.0};
    std::vector<char> to_train(dataset.windows.size(), 0);
    Rng rng(derive_seed(seed, "split"));
    for (double cls : classes) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < dataset.windows.size(); ++i)
            if (dataset.windows[i].label == cls) members.push_back(i);
        if (members.empty()) continue;
        if (members.size() < 2)
            throw ClassTooSmallError("class " + format_double(cls) + " has " +
                                     std::to_string(members.size()) + " window(s)");
        rng.shuffle(members);
        std::size_t take = static_cast<std::size_t>(
            std::floor(static_cast<double>(members.size()) * train_fraction));
        for (std::size_t k = 0; k < take; ++k) to_train[members[k]] = 1;
    }

    train.feature_names = dataset.feature_names;
    test.feature_names = dataset.feature_names;
    train.windows.clear();
    test.windows.clear();
    for (std::size_t i = 0; i < dataset.windows.size(); ++i)
        (to_train[i] ? train : test).windows.push_back(dataset.windows[i]);
}

void write_dataset_csv(const std::string& path, const Dataset& dataset) {
    std::string buf = "sensor_id,end_time,label";
    for (std::size_t t = 0; t < kWindowSteps; ++t)
        for (const auto& name : dataset.feature_names) {
            buf += ",f";
            buf += std::to_string(t);
            buf += '_';
            buf += name;
        }
    buf += '\n';
    for (const auto& w : dataset.windows) {
        buf += w.sensor_id;
        buf += ',';
        buf += std::to_string(w.end_time);
        buf += ',';
        buf += format_double(w.label);
        for (std::size_t t = 0; t < kWindowSteps; ++t)
            for (std::size_t f = 0; f < dataset.feature_names.size(); ++f) {
                buf += ',';
                buf += format_double(w.matrix(t, f));
            }
        buf += '\n';
    }
    write_entire_file(path, buf);
}

Dataset read_dataset_csv(const std::string& path) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line)) throw EmptyFileError(path);

    auto header = split_fields(line);
    if (header.size() < 3 || header[0] != "sensor_id" || header[1] != "end_time" ||
        header[2] != "label")
        throw FormatError(1, "unexpected dataset header in " + path);
    std::size_t ncols = header.size() - 3;
    if (ncols == 0 || ncols % kWindowSteps != 0)
        throw FormatError(1, "feature columns not a multiple of 3");
    std::size_t nfeat = ncols / kWindowSteps;

    Dataset ds;
    for (std::size_t f = 0; f < nfeat; ++f) {
        std::string_view col = header[3 + f];
        if (col.size() < 4 || col.substr(0, 3) != "f0_")
            throw FormatError(1, "expected f0_ column, got '" + std::string(col) + "'");
        ds.feature_names.emplace_back(col.substr(3));
    }
    for (std::size_t t = 1; t < kWindowSteps; ++t) {
        std::string prefix = "f" + std::to_string(t) + "_";
        for (std::size_t f = 0; f < nfeat; ++f) {
            std::string want = prefix + ds.feature_names[f];
            if (header[3 + t * nfeat + f] != want)
                throw FormatError(1, "expected column '" + want + "'");
        }
    }

    while (reader.next(line)) {
        auto fields = split_fields(line);
        if (fields.size() != 3 + ncols)
            throw MalformedRowError(reader.line_no(),
                                    "expected " + std::to_string(3 + ncols) + " fields, got " +
                                        std::to_string(fields.size()));
        Window w;
        w.sensor_id = std::string(fields[0]);
        if (w.sensor_id.empty())
            throw MalformedRowError(reader.line_no(), "empty sensor_id");
        w.end_time = parse_int_field(fields[1], reader.line_no());
        w.label = parse_double_field(fields[2], reader.line_no());
        if (w.label != 0.0 && w.label != 0.5 && w.label != 1.0)
            throw MalformedRowError(reader.line_no(), "label must be 0, 0.5, or 1");
        w.provenance = w.label == 1.0 ? Provenance::CrashHigh
                       : w.label == 0.5 ? Provenance::CrashFar
                                        : Provenance::MatchedNonCrash;
        w.matrix = Mat(kWindowSteps, nfeat);
        for (std::size_t t = 0; t < kWindowSteps; ++t)
            for (std::size_t f = 0; f < nfeat; ++f)
                w.matrix(t, f) = parse_double_field(fields[3 + t * nfeat + f], reader.line_no());
        ds.windows.push_back(std::move(w));
    }
    if (ds.windows.empty()) throw EmptyFileError(path);
    return ds;
}

} // namespace crashcast
