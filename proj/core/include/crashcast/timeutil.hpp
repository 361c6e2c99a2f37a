#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "crashcast/errors.hpp"

namespace crashcast {

struct CivilDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    bool operator==(const CivilDate&) const = default;
    auto operator<=>(const CivilDate&) const = default;
};

// Days since 1970-01-01 for a proleptic Gregorian date (Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

constexpr std::int64_t kSecondsPerDay = 86400;

// The study area sits at a fixed UTC+03:00 (no DST); local calendar dates in
// the weather file and "same time of day" matching both use this offset.
inline constexpr std::int64_t kDefaultUtcOffset = 3 * 3600;

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

inline std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
    return a - floor_div(a, b) * b;
}

inline CivilDate utc_date_of(std::int64_t epoch_sec) {
    return civil_from_days(floor_div(epoch_sec, kSecondsPerDay));
}

inline std::int64_t epoch_from_civil(const CivilDate& d) {
    return days_from_civil(d.year, d.month, d.day) * kSecondsPerDay;
}

// Local wall-clock helpers for a fixed UTC offset (no DST).
inline std::int64_t local_day_index(std::int64_t epoch_sec, std::int64_t utc_offset_sec) {
    return floor_div(epoch_sec + utc_offset_sec, kSecondsPerDay);
}

inline std::int64_t local_time_of_day(std::int64_t epoch_sec, std::int64_t utc_offset_sec) {
    return floor_mod(epoch_sec + utc_offset_sec, kSecondsPerDay);
}

inline std::string format_date(const CivilDate& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return std::string(buf);
}

inline CivilDate parse_date_field(std::string_view s, std::size_t line_no) {
    auto fail = [&]() -> CivilDate {
        throw MalformedRowError(line_no, "invalid date '" + std::string(s) + "'");
    };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return fail();
    auto digits = [&](std::size_t pos, std::size_t n) -> int {
        int v = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            if (s[i] < '0' || s[i] > '9') fail();
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    CivilDate d{digits(0, 4), digits(5, 2), digits(8, 2)};
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) return fail();
    // Round-trip check rejects impossible days like Feb 30.
    if (civil_from_days(days_from_civil(d.year, d.month, d.day)) != d) return fail();
    return d;
}

} // namespace crashcast
