#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crashcast/timeutil.hpp"

namespace crashcast {

// Fixed feature order used by every module downstream.
inline constexpr std::size_t kFeatureCount = 14;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "up_speed", "down_speed", "up_volume", "down_volume",
    "vl1", "vl2", "vl3", "vl4", "vl5", "vl6", "vl7", "vl8",
    "temperature", "precipitation"};

inline constexpr std::size_t kTrafficFeatureCount = 12;
inline constexpr std::int64_t kIntervalSeconds = 240;

struct RawSensorRecord {
    std::int64_t timestamp = 0;
    std::string sensor_id;
    std::array<double, kTrafficFeatureCount> traffic{}; // up_speed..vl8
};

struct WeatherRecord {
    CivilDate date;
    double temperature = 0.0;
    int precipitation = 0;
};

struct CrashEvent {
    std::int64_t timestamp = 0;
    std::string sensor_id;
};

struct IntervalRecord {
    std::string sensor_id;
    std::int64_t interval_start = 0;
    std::array<double, kFeatureCount> features{};
    std::uint32_t sample_count = 0;
};

std::vector<RawSensorRecord> parse_sensor_csv(const std::string& path);
std::vector<WeatherRecord> parse_weather_csv(const std::string& path);
std::vector<CrashEvent> parse_crash_csv(const std::string& path);

// Row-at-a-time variant so a full study year never has to sit in memory.
void stream_sensor_csv(const std::string& path,
                       const std::function<void(const RawSensorRecord&)>& consumer);

// Mean per (sensor_id, 240 s bucket); output sorted by (sensor_id, interval_start).
// Weather columns (features 12-13) are left at zero until join_weather fills them.
std::vector<IntervalRecord> aggregate_intervals(std::vector<RawSensorRecord> records);

// Weather rows carry local calendar dates; intervals are mapped to them via
// the fixed UTC offset.
void join_weather(std::vector<IntervalRecord>& intervals,
                  const std::vector<WeatherRecord>& weather,
                  std::int64_t utc_offset = kDefaultUtcOffset);

// Writers share the canonical numeric formatting with the generator.
void write_sensor_csv(const std::string& path, const std::vector<RawSensorRecord>& records);
void write_weather_csv(const std::string& path, const std::vector<WeatherRecord>& records);
void write_crash_csv(const std::string& path, const std::vector<CrashEvent>& events);

} // namespace crashcast
