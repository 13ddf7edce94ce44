#pragma once

#include <string>
#include <utility>
#include <vector>

namespace bodycomp {

struct FlagDecision {
    std::string case_id;
    std::string metric_name;
    double metric_value = 0.0;
    double threshold = 0.0;
    bool flagged = false;
};

/// flagged iff value > threshold, input order preserved. NaN thresholds throw DomainError.
std::vector<FlagDecision> flag_cases(const std::vector<std::pair<std::string, double>>& values, double threshold,
                                     const std::string& metric_name = "avg_variance");

/// Threshold that flags (at most) the top `fraction` of values under strict exceedance.
double quantile_threshold(std::vector<double> values, double fraction);

enum class Quadrant { LowDiffLowUnc, LowDiffHighUnc, HighDiffLowUnc, HighDiffHighUnc };

struct QuadrantSummary {
    std::size_t low_diff_low_unc = 0;
    std::size_t low_diff_high_unc = 0;
    std::size_t high_diff_low_unc = 0;
    std::size_t high_diff_high_unc = 0;
    double diff_threshold_pct = 2.5;
    double uncertainty_threshold = 0.0;

    std::size_t total() const noexcept
    {
        return low_diff_low_unc + low_diff_high_unc + high_diff_low_unc + high_diff_high_unc;
    }
};

inline constexpr double kDefaultDiffThresholdPct = 2.5;

Quadrant classify_quadrant(double abs_area_diff_pct, double metric_value, double diff_threshold_pct,
                           double uncertainty_threshold);

/// `cases` are (|area difference %|, uncertainty value) pairs.
QuadrantSummary quadrant_summary(const std::vector<std::pair<double, double>>& cases, double diff_threshold_pct,
                                 double uncertainty_threshold);

std::string flag_report_csv(const std::vector<FlagDecision>& decisions);

}  // namespace bodycomp
