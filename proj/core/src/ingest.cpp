#include "crashcast/ingest.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"

namespace crashcast {

namespace {

const char* kSensorHeader =
    "timestamp,sensor_id,up_speed,down_speed,up_volume,down_volume,"
    "vl1,vl2,vl3,vl4,vl5,vl6,vl7,vl8";
const char* kWeatherHeader = "date,temperature,precipitation";
const char* kCrashHeader = "timestamp,sensor_id";

// Verify the header matches the wire format exactly; name the first absent
// column so the error points at the real problem.
void check_header(const std::string& got, const char* expected, const std::string& path) {
    if (got == expected) return;
    auto got_fields = split_fields(got);
    for (auto want : split_fields(expected)) {
        if (std::find(got_fields.begin(), got_fields.end(), want) == got_fields.end())
            throw MissingColumnError(std::string(want));
    }
    throw FormatError(1, "unexpected header in " + path);
}

} // namespace

void stream_sensor_csv(const std::string& path,
                       const std::function<void(const RawSensorRecord&)>& consumer) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line)) throw EmptyFileError(path);
    check_header(line, kSensorHeader, path);

    bool any = false;
    RawSensorRecord rec;
    while (reader.next(line)) {
        auto fields = split_fields(line);
        if (fields.size() != 2 + kTrafficFeatureCount)
            throw MalformedRowError(reader.line_no(),
                                    "expected 14 fields, got " + std::to_string(fields.size()));
        rec.timestamp = parse_int_field(fields[0], reader.line_no());
        rec.sensor_id = std::string(fields[1]);
        if (rec.sensor_id.empty())
            throw MalformedRowError(reader.line_no(), "empty sensor_id");
        for (std::size_t i = 0; i < kTrafficFeatureCount; ++i) {
            double v = parse_double_field(fields[2 + i], reader.line_no());
            if (v < 0.0)
                throw MalformedRowError(reader.line_no(),
                                        std::string("negative ") + kFeatureNames[i]);
            rec.traffic[i] = v;
        }
        any = true;
        consumer(rec);
    }
    if (!any) throw EmptyFileError(path);
}

std::vector<RawSensorRecord> parse_sensor_csv(const std::string& path) {
    std::vector<RawSensorRecord> out;
    stream_sensor_csv(path, [&](const RawSensorRecord& rec) { out.push_back(rec); });
    return out;
}

std::vector<WeatherRecord> parse_weather_csv(const std::string& path) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line)) throw EmptyFileError(path);
    check_header(line, kWeatherHeader, path);

    std::vector<WeatherRecord> out;
    std::unordered_set<std::int64_t> seen;
    while (reader.next(line)) {
        auto fields = split_fields(line);
        if (fields.size() != 3)
            throw MalformedRowError(reader.line_no(),
                                    "expected 3 fields, got " + std::to_string(fields.size()));
        WeatherRecord rec;
        rec.date = parse_date_field(fields[0], reader.line_no());
        rec.temperature = parse_double_field(fields[1], reader.line_no());
        std::int64_t p = parse_int_field(fields[2], reader.line_no());
        if (p != 0 && p != 1)
            throw MalformedRowError(reader.line_no(), "precipitation must be 0 or 1");
        rec.precipitation = static_cast<int>(p);
        std::int64_t key = days_from_civil(rec.date.year, rec.date.month, rec.date.day);
        if (!seen.insert(key).second)
            throw MalformedRowError(reader.line_no(),
                                    "duplicate date " + format_date(rec.date));
        out.push_back(rec);
    }
    if (out.empty()) throw EmptyFileError(path);
    return out;
}

std::vector<CrashEvent> parse_crash_csv(const std::string& path) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line)) throw EmptyFileError(path);
    check_header(line, kCrashHeader, path);

    std::vector<CrashEvent> out;
    std::unordered_map<std::string, std::unordered_set<std::int64_t>> seen;
    while (reader.next(line)) {
        auto fields = split_fields(line);
        if (fields.size() != 2)
            throw MalformedRowError(reader.line_no(),
                                    "expected 2 fields, got " + std::to_string(fields.size()));
        CrashEvent ev;
        ev.timestamp = parse_int_field(fields[0], reader.line_no());
        ev.sensor_id = std::string(fields[1]);
        if (ev.sensor_id.empty())
            throw MalformedRowError(reader.line_no(), "empty sensor_id");
        std::int64_t bucket = floor_div(ev.timestamp, kIntervalSeconds);
        if (!seen[ev.sensor_id].insert(bucket).second)
            throw MalformedRowError(reader.line_no(),
                                    "duplicate crash in same interval at " + ev.sensor_id);
        out.push_back(std::move(ev));
    }
    if (out.empty()) throw EmptyFileError(path);
    return out;
}

std::vector<IntervalRecord> aggregate_intervals(std::vector<RawSensorRecord> records) {
    // Canonical summation order (total order over all fields) makes the
    // result bit-identical under any input permutation.
    std::sort(records.begin(), records.end(),
              [](const RawSensorRecord& a, const RawSensorRecord& b) {
                  if (a.sensor_id != b.sensor_id) return a.sensor_id < b.sensor_id;
                  std::int64_t ba = floor_div(a.timestamp, kIntervalSeconds);
                  std::int64_t bb = floor_div(b.timestamp, kIntervalSeconds);
                  if (ba != bb) return ba < bb;
                  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                  return a.traffic < b.traffic;
              });

    std::vector<IntervalRecord> out;
    std::size_t i = 0;
    while (i < records.size()) {
        const std::string& sensor = records[i].sensor_id;
        std::int64_t start = floor_div(records[i].timestamp, kIntervalSeconds) * kIntervalSeconds;
        std::array<double, kTrafficFeatureCount> sum{};
        std::uint32_t n = 0;
        while (i < records.size() && records[i].sensor_id == sensor &&
               floor_div(records[i].timestamp, kIntervalSeconds) * kIntervalSeconds == start) {
            for (std::size_t f = 0; f < kTrafficFeatureCount; ++f)
                sum[f] += records[i].traffic[f];
            ++n;
            ++i;
        }
        IntervalRecord rec;
        rec.sensor_id = sensor;
        rec.interval_start = start;
        rec.sample_count = n;
        for (std::size_t f = 0; f < kTrafficFeatureCount; ++f)
            rec.features[f] = sum[f] / n;
        out.push_back(std::move(rec));
    }
    return out;
}

void join_weather(std::vector<IntervalRecord>& intervals,
                  const std::vector<WeatherRecord>& weather, std::int64_t utc_offset) {
    std::unordered_map<std::int64_t, const WeatherRecord*> by_day;
    for (const auto& w : weather)
        by_day[days_from_civil(w.date.year, w.date.month, w.date.day)] = &w;

    for (auto& rec : intervals) {
        std::int64_t day = local_day_index(rec.interval_start, utc_offset);
        auto it = by_day.find(day);
        if (it == by_day.end())
            throw MissingWeatherError(format_date(civil_from_days(day)));
        rec.features[kTrafficFeatureCount] = it->second->temperature;
        rec.features[kTrafficFeatureCount + 1] = it->second->precipitation;
    }
}

void write_sensor_csv(const std::string& path, const std::vector<RawSensorRecord>& records) {
    std::string buf;
    buf.reserve(records.size() * 80 + 128);
    buf += kSensorHeader;
    buf += '\n';
    for (const auto& rec : records) {
        buf += std::to_string(rec.timestamp);
        buf += ',';
        buf += rec.sensor_id;
        for (double v : rec.traffic) {
            buf += ',';
            buf += format_double(v);
        }
        buf += '\n';
    }
    write_entire_file(path, buf);
}

void write_weather_csv(const std::string& path, const std::vector<WeatherRecord>& records) {
    std::string buf = kWeatherHeader;
    buf += '\n';
    for (const auto& rec : records) {
        buf += format_date(rec.date);
        buf += ',';
        buf += format_double(rec.temperature);
        buf += ',';
        buf += std::to_string(rec.precipitation);
        buf += '\n';
    }
    write_entire_file(path, buf);
}

void write_crash_csv(const std::string& path, const std::vector<CrashEvent>& events) {
    std::string buf = kCrashHeader;
    buf += '\n';
    for (const auto& ev : events) {
        buf += std::to_string(ev.timestamp);
        buf += ',';
        buf += ev.sensor_id;
        buf += '\n';
    }
    write_entire_file(path, buf);
}

} // namespace crashcast
