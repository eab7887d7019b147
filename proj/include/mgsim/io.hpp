#pragma once

// Configuration files, CSV results and the profile schedule format.

#include "mgsim/experiments.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mgsim {

/// Settings of the three studies.
struct ExperimentConfig {
    std::array<double, 3> pre_step_pu{0.1, 0.6, 0.3};   ///< per-phase load, per-unit of phase rating
    std::array<double, 3> post_step_pu{-0.4, 0.2, -0.1};
    double step_time_s = 1.0;
    double duration_s = 2.0;
    double settling_band = 0.02;
    double settling_floor_pu = 0.002;
    SweepConfig sweep;
    std::filesystem::path profile;  ///< resolved against the config file directory
    double dwell_s = 1.0;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct Config {
    SystemConfig system;
    ExperimentConfig experiment;

    friend bool operator==(const Config&, const Config&) = default;
};

/// Parses an INI document: `[section]` headers, `key = value` lines, `#` or
/// `;` comments. Omitted keys keep their defaults; unknown sections or keys,
/// malformed values and out-of-range values throw ConfigError naming the key
/// and line. `origin` prefixes messages and anchors relative paths.
[[nodiscard]] Config parse_config_text(const std::string& text, const std::filesystem::path& origin = {});
[[nodiscard]] Config parse_config(const std::filesystem::path& path);

/// Writes every key with its current value; parsing the output yields the
/// same Config.
[[nodiscard]] std::string format_config(const Config& cfg);

[[nodiscard]] StepCompareConfig step_compare_config(const Config& cfg);

/// `t_s` column first, then the channels in order, %.17g.
void write_timeseries(const TimeSeries& ts, const std::filesystem::path& path);
[[nodiscard]] TimeSeries read_timeseries(const std::filesystem::path& path);

/// Columns config,puf,vuf on a 0..1 scale, curves in canonical order. Failed
/// points leave vuf empty.
void write_sweep(const SweepResult& sr, const std::filesystem::path& path);

void write_step_metrics(const StepCompareResult& r, const std::filesystem::path& path);
void write_profile_result(const ProfileResult& r, const std::filesystem::path& path);

/// Columns interval,load_p_a_w,load_p_b_w,load_p_c_w,pv_p_a_w,pv_p_b_w,pv_p_c_w.
[[nodiscard]] std::vector<ProfileInterval> read_profile(const std::filesystem::path& path);
[[nodiscard]] std::vector<ProfileInterval> parse_profile(std::istream& in, const std::string& origin);

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
[[nodiscard]] std::vector<std::vector<std::string>> parse_csv(std::istream& in);

/// Writes `content` atomically: a sibling temporary file is renamed into place.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace mgsim
