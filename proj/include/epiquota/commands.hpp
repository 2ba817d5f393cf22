#pragma once

#include "epiquota/agent.hpp"
#include "epiquota/env.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epiquota::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kMetricsHeader = "policy,seed,H_bar,Q_bar,TTS,c_bar,r_bar,D\n";

// "3", "1,2,5", "0-9" and mixtures such as "1,4-6". Duplicates are rejected.
std::vector<std::uint64_t> parse_seeds(std::string_view text);

// Comma separated policy ids, each checked against the known set.
std::vector<std::string> parse_policy_list(std::string_view text);

struct MetricsRow {
    std::string policy;
    std::string seed;  // a seed, or "mean" / "sd"
    EpisodeMetrics metrics;
    std::optional<double> tts;  // mean rows carry a fractional TTS
    std::optional<double> d;
};

// One row per (policy, seed) in input order, then a mean and an sd row per
// policy. With `pool_d` the Pareto distance uses bounds pooled over every
// (policy, seed) outcome; otherwise D is printed as "/".
std::vector<MetricsRow> metrics_table(const std::vector<std::string>& policies,
                                      const std::vector<std::vector<EpisodeMetrics>>& per_seed,
                                      const std::vector<std::uint64_t>& seeds, bool pool_d);
std::string format_metrics_csv(const std::vector<MetricsRow>& rows);

// Runs fn(0) .. fn(n-1) on up to `jobs` threads; rethrows the first failure
// in index order.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

// <root>/<first 12 hex of hash>-<UTC timestamp>, with a numeric suffix when
// that directory already exists.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& hash);

// Full command line: argv[0] is ignored. Returns the process exit code
// (0 ok, 2 input error, 3 invariant breach).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace epiquota::cli
