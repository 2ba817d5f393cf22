#pragma once

#include "epiquota/core.hpp"
#include "epiquota/mobility.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace epiquota {

// Wall-clock instant as seconds since 1970-01-01T00:00:00 of the local civil
// calendar, plus the UTC offset when the source text carried one.
struct Timestamp {
    std::int64_t local_seconds = 0;
    std::optional<int> utc_offset_seconds;

    friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

// Accepts "MM/DD/YYYY, H:MM:SS" and ISO-8601 ("YYYY-MM-DDTHH:MM:SS[.fff][Z|±HH:MM]").
std::optional<Timestamp> parse_timestamp(std::string_view text);

struct TrajectoryRecord {
    std::string uid;
    Timestamp start_time;
    Timestamp end_time;
    double start_lng = 0.0;
    double start_lat = 0.0;
    double end_lng = 0.0;
    double end_lat = 0.0;
    double weight = 0.0;  // expanded trip count
};

inline constexpr std::string_view kTrajectoryHeader =
    "uid,start_time,start_lng,start_lat,end_time,end_lng,end_lat,weight";

struct TrajectoryFile {
    std::vector<TrajectoryRecord> records;
    std::size_t malformed = 0;
    std::vector<std::string> problems;  // first few malformed-row messages
};

// Throws InputError when the header differs; bad rows are counted and skipped.
TrajectoryFile parse_trajectory_csv(std::string text);
TrajectoryFile read_trajectory_csv(const std::filesystem::path& path);

// Maps a record to (origin, destination), or nullopt when it leaves the area.
using DivisionAssignment = std::function<std::optional<std::pair<DivisionId, DivisionId>>(const TrajectoryRecord&)>;

// Which calendar day a record belongs to. Zoned timestamps are shifted to
// `utc_offset_seconds` first; naive ones are taken as already local.
struct DayBoundary {
    int utc_offset_seconds = 0;
    std::optional<std::int64_t> first_day;  // days since 1970-01-01; default: earliest record
    std::optional<int> days;                // default: through the latest record
};

std::int64_t local_day(const Timestamp& t, const DayBoundary& boundary);
// Days since 1970-01-01 for a civil date; throws InputError on an invalid date.
std::int64_t civil_day(int year, unsigned month, unsigned day);

struct OdAggregation {
    std::vector<MobilityMatrix> matrices;  // day 0 .. days-1 relative to first_day
    std::int64_t first_day = 0;
    std::size_t used = 0;
    std::size_t out_of_area = 0;
    std::size_t out_of_window = 0;
    std::size_t malformed = 0;
};

OdAggregation aggregate_daily_od(const std::vector<TrajectoryRecord>& records, std::size_t divisions,
                                 const DivisionAssignment& assignment, const DayBoundary& boundary);

struct Centroid {
    double lng = 0.0;
    double lat = 0.0;
};

// Assigns each trip end to the nearest centroid within `max_km` (great-circle).
DivisionAssignment nearest_centroid_assignment(std::vector<Centroid> centroids, double max_km);
double haversine_km(double lng1, double lat1, double lng2, double lat2);

// `day,origin,destination,flow`, zero entries omitted, sorted by day then indices.
std::string format_od_csv(const std::vector<MobilityMatrix>& matrices);
std::vector<MobilityMatrix> parse_od_csv(std::string text, std::size_t divisions);

}  // namespace epiquota
