#include "epiquota/trajectory.hpp"

#include "epiquota/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <tuple>

#include <fmt/format.h>

namespace epiquota {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;
constexpr std::size_t kMaxProblems = 20;

// Reads exactly `width` digits (or 1..width when width_min < width).
bool take_digits(std::string_view& s, std::size_t width_min, std::size_t width_max, int& out) {
    std::size_t n = 0;
    while (n < width_max && n < s.size() && s[n] >= '0' && s[n] <= '9') {
        ++n;
    }
    if (n < width_min) {
        return false;
    }
    std::from_chars(s.data(), s.data() + n, out);
    s.remove_prefix(n);
    return true;
}

bool take_char(std::string_view& s, char c) {
    if (s.empty() || s.front() != c) {
        return false;
    }
    s.remove_prefix(1);
    return true;
}

void skip_spaces(std::string_view& s) {
    while (!s.empty() && s.front() == ' ') {
        s.remove_prefix(1);
    }
}

std::optional<std::int64_t> to_seconds(int year, int month, int day, int hour, int minute, int second) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                             std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
        return std::nullopt;
    }
    const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
    return days * kSecondsPerDay + hour * 3600 + minute * 60 + second;
}

std::optional<Timestamp> parse_us_style(std::string_view s) {
    int month = 0, day = 0, year = 0, hour = 0, minute = 0, second = 0;
    if (!take_digits(s, 1, 2, month) || !take_char(s, '/') || !take_digits(s, 1, 2, day) || !take_char(s, '/') ||
        !take_digits(s, 4, 4, year)) {
        return std::nullopt;
    }
    take_char(s, ',');
    skip_spaces(s);
    if (!take_digits(s, 1, 2, hour) || !take_char(s, ':') || !take_digits(s, 2, 2, minute) || !take_char(s, ':') ||
        !take_digits(s, 2, 2, second) || !s.empty()) {
        return std::nullopt;
    }
    const auto secs = to_seconds(year, month, day, hour, minute, second);
    if (!secs) {
        return std::nullopt;
    }
    return Timestamp{*secs, std::nullopt};
}

std::optional<Timestamp> parse_iso(std::string_view s) {
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (!take_digits(s, 4, 4, year) || !take_char(s, '-') || !take_digits(s, 2, 2, month) || !take_char(s, '-') ||
        !take_digits(s, 2, 2, day)) {
        return std::nullopt;
    }
    if (!take_char(s, 'T') && !take_char(s, ' ')) {
        return std::nullopt;
    }
    if (!take_digits(s, 2, 2, hour) || !take_char(s, ':') || !take_digits(s, 2, 2, minute) || !take_char(s, ':') ||
        !take_digits(s, 2, 2, second)) {
        return std::nullopt;
    }
    if (take_char(s, '.')) {
        int fraction = 0;
        if (!take_digits(s, 1, 9, fraction)) {
            return std::nullopt;
        }
    }
    std::optional<int> offset;
    if (take_char(s, 'Z')) {
        offset = 0;
    } else if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
        const int sign = s.front() == '-' ? -1 : 1;
        s.remove_prefix(1);
        int oh = 0, om = 0;
        if (!take_digits(s, 2, 2, oh)) {
            return std::nullopt;
        }
        take_char(s, ':');
        if (!take_digits(s, 2, 2, om) || oh > 23 || om > 59) {
            return std::nullopt;
        }
        offset = sign * (oh * 3600 + om * 60);
    }
    if (!s.empty()) {
        return std::nullopt;
    }
    const auto secs = to_seconds(year, month, day, hour, minute, second);
    if (!secs) {
        return std::nullopt;
    }
    return Timestamp{*secs, offset};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    const std::string t = io::trim(text);
    if (t.find('/') != std::string::npos) {
        return parse_us_style(t);
    }
    return parse_iso(t);
}

std::int64_t civil_day(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) {
        throw InputError("date", fmt::format("{:04}-{:02}-{:02} is not a calendar date", year, month, day));
    }
    return sys_days{ymd}.time_since_epoch().count();
}

std::int64_t local_day(const Timestamp& t, const DayBoundary& boundary) {
    std::int64_t seconds = t.local_seconds;
    if (t.utc_offset_seconds) {
        seconds = seconds - *t.utc_offset_seconds + boundary.utc_offset_seconds;
    }
    return floor_div(seconds, kSecondsPerDay);
}

TrajectoryFile parse_trajectory_csv(std::string text) {
    io::CsvReader reader(std::move(text));
    std::vector<std::string> fields;
    if (!reader.next_row(fields)) {
        throw InputError("header", "empty trajectory file");
    }
    std::string header;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        header += (k ? "," : "") + io::trim(fields[k]);
    }
    if (header != kTrajectoryHeader) {
        throw InputError("header", fmt::format("expected '{}', got '{}'", kTrajectoryHeader, header));
    }

    TrajectoryFile out;
    auto reject = [&out, &reader](const std::string& why) {
        ++out.malformed;
        if (out.problems.size() < kMaxProblems) {
            out.problems.push_back(fmt::format("line {}: {}", reader.line(), why));
        }
    };
    while (reader.next_row(fields)) {
        if (fields.size() == 1 && io::trim(fields[0]).empty()) {
            continue;
        }
        if (fields.size() != 8) {
            reject(fmt::format("expected 8 fields, got {}", fields.size()));
            continue;
        }
        TrajectoryRecord rec;
        rec.uid = io::trim(fields[0]);
        const auto start = parse_timestamp(fields[1]);
        const auto end = parse_timestamp(fields[4]);
        if (!start || !end) {
            reject("unparseable timestamp");
            continue;
        }
        rec.start_time = *start;
        rec.end_time = *end;
        try {
            rec.start_lng = io::parse_double(fields[2], "start_lng");
            rec.start_lat = io::parse_double(fields[3], "start_lat");
            rec.end_lng = io::parse_double(fields[5], "end_lng");
            rec.end_lat = io::parse_double(fields[6], "end_lat");
            rec.weight = io::parse_double(fields[7], "weight");
        } catch (const InputError& e) {
            reject(e.what());
            continue;
        }
        const auto utc = [](const Timestamp& t) { return t.local_seconds - t.utc_offset_seconds.value_or(0); };
        if (utc(rec.end_time) < utc(rec.start_time)) {
            reject("end_time before start_time");
            continue;
        }
        if (!(rec.weight >= 0.0) || !std::isfinite(rec.weight)) {
            reject("negative or non-finite weight");
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

TrajectoryFile read_trajectory_csv(const std::filesystem::path& path) {
    return parse_trajectory_csv(io::read_file(path));
}

OdAggregation aggregate_daily_od(const std::vector<TrajectoryRecord>& records, std::size_t divisions,
                                 const DivisionAssignment& assignment, const DayBoundary& boundary) {
    OdAggregation out;
    struct Assigned {
        std::int64_t day;
        std::size_t origin;
        std::size_t destination;
        double weight;
    };
    std::vector<Assigned> assigned;
    assigned.reserve(records.size());
    for (const auto& rec : records) {
        const auto pair = assignment(rec);
        if (!pair) {
            ++out.out_of_area;
            continue;
        }
        if (pair->first.index >= divisions || pair->second.index >= divisions) {
            ++out.malformed;
            continue;
        }
        assigned.push_back({local_day(rec.start_time, boundary), pair->first.index, pair->second.index, rec.weight});
    }

    std::int64_t first = 0;
    if (boundary.first_day) {
        first = *boundary.first_day;
    } else if (!assigned.empty()) {
        first = std::min_element(assigned.begin(), assigned.end(), [](const Assigned& a, const Assigned& b) {
                    return a.day < b.day;
                })->day;
    }
    std::int64_t last = first - 1;
    if (boundary.days) {
        last = first + *boundary.days - 1;
    } else if (!assigned.empty()) {
        last = std::max_element(assigned.begin(), assigned.end(), [](const Assigned& a, const Assigned& b) {
                   return a.day < b.day;
               })->day;
    }
    out.first_day = first;
    const std::int64_t span = last >= first ? last - first + 1 : 0;
    for (std::int64_t d = 0; d < span; ++d) {
        out.matrices.push_back(MobilityMatrix::zeros(static_cast<int>(d), divisions));
    }
    for (const auto& a : assigned) {
        if (a.day < first || a.day > last) {
            ++out.out_of_window;
            continue;
        }
        out.matrices[static_cast<std::size_t>(a.day - first)].flows(static_cast<Eigen::Index>(a.origin),
                                                                   static_cast<Eigen::Index>(a.destination)) +=
            a.weight;
        ++out.used;
    }
    return out;
}

double haversine_km(double lng1, double lat1, double lng2, double lat2) {
    constexpr double kEarthRadiusKm = 6371.0088;
    const double rad = std::numbers::pi / 180.0;
    const double dlat = (lat2 - lat1) * rad;
    const double dlng = (lng2 - lng1) * rad;
    const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlng / 2) * std::sin(dlng / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

DivisionAssignment nearest_centroid_assignment(std::vector<Centroid> centroids, double max_km) {
    return [centroids = std::move(centroids), max_km](const TrajectoryRecord& rec)
               -> std::optional<std::pair<DivisionId, DivisionId>> {
        auto nearest = [&](double lng, double lat) -> std::optional<std::size_t> {
            std::optional<std::size_t> best;
            double best_km = max_km;
            for (std::size_t k = 0; k < centroids.size(); ++k) {
                const double km = haversine_km(lng, lat, centroids[k].lng, centroids[k].lat);
                if (km <= best_km) {
                    best_km = km;
                    best = k;
                }
            }
            return best;
        };
        const auto origin = nearest(rec.start_lng, rec.start_lat);
        const auto destination = nearest(rec.end_lng, rec.end_lat);
        if (!origin || !destination) {
            return std::nullopt;
        }
        return std::pair{DivisionId{*origin}, DivisionId{*destination}};
    };
}

std::string format_od_csv(const std::vector<MobilityMatrix>& matrices) {
    std::string out = "day,origin,destination,flow\n";
    for (const auto& m : matrices) {
        for (Eigen::Index i = 0; i < m.flows.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.flows.cols(); ++j) {
                const double v = m.flows(i, j);
                if (v != 0.0) {
                    out += fmt::format("{},{},{},{}\n", m.day, i, j, io::format_double(v));
                }
            }
        }
    }
    return out;
}

std::vector<MobilityMatrix> parse_od_csv(std::string text, std::size_t divisions) {
    io::CsvReader reader(std::move(text));
    std::vector<std::string> fields;
    if (!reader.next_row(fields) || fields.size() != 4 || io::trim(fields[0]) != "day" ||
        io::trim(fields[1]) != "origin" || io::trim(fields[2]) != "destination" || io::trim(fields[3]) != "flow") {
        throw InputError("od.header", "expected 'day,origin,destination,flow'");
    }
    std::map<long long, MobilityMatrix> by_day;
    long long max_day = -1;
    while (reader.next_row(fields)) {
        if (fields.size() == 1 && io::trim(fields[0]).empty()) {
            continue;
        }
        const std::string where = fmt::format("od line {}", reader.line());
        if (fields.size() != 4) {
            throw InputError(where, "expected 4 fields");
        }
        const long long day = io::parse_int(fields[0], where + " day");
        const long long o = io::parse_int(fields[1], where + " origin");
        const long long d = io::parse_int(fields[2], where + " destination");
        const double flow = io::parse_double(fields[3], where + " flow");
        if (day < 0 || o < 0 || d < 0 || o >= static_cast<long long>(divisions) ||
            d >= static_cast<long long>(divisions)) {
            throw InputError(where, "day or division index out of range");
        }
        if (!(flow >= 0.0) || !std::isfinite(flow)) {
            throw InputError(where + " flow", "must be a finite non-negative count");
        }
        auto it = by_day.find(day);
        if (it == by_day.end()) {
            it = by_day.emplace(day, MobilityMatrix::zeros(static_cast<int>(day), divisions)).first;
        }
        it->second.flows(o, d) += flow;
        max_day = std::max(max_day, day);
    }
    std::vector<MobilityMatrix> out;
    for (long long day = 0; day <= max_day; ++day) {
        const auto it = by_day.find(day);
        out.push_back(it == by_day.end() ? MobilityMatrix::zeros(static_cast<int>(day), divisions) : it->second);
    }
    return out;
}

}  // namespace epiquota
