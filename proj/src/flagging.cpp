#include "bodycomp/flagging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bodycomp/csv.hpp"
#include "bodycomp/error.hpp"

namespace bodycomp {

std::vector<FlagDecision> flag_cases(const std::vector<std::pair<std::string, double>>& values, double threshold,
                                     const std::string& metric_name)
{
    if (std::isnan(threshold))
        throw Error(ErrorKind::DomainError, "flag threshold is NaN");
    std::vector<FlagDecision> out;
    out.reserve(values.size());
    for (const auto& [id, value] : values)
        out.push_back({id, metric_name, value, threshold, value > threshold});
    return out;
}

double quantile_threshold(std::vector<double> values, double fraction)
{
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw Error(ErrorKind::DomainError, "fraction must lie in [0,1]");
    if (values.empty())
        throw Error(ErrorKind::EmptyInput, "no values for quantile threshold");
    std::sort(values.begin(), values.end());
    const auto flagged = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(values.size())));
    if (flagged >= values.size())
        return -std::numeric_limits<double>::infinity();
    return values[values.size() - flagged - 1];
}

Quadrant classify_quadrant(double abs_area_diff_pct, double metric_value, double diff_threshold_pct,
                           double uncertainty_threshold)
{
    const bool high_diff = abs_area_diff_pct > diff_threshold_pct;
    const bool high_unc = metric_value > uncertainty_threshold;
    if (high_diff)
        return high_unc ? Quadrant::HighDiffHighUnc : Quadrant::HighDiffLowUnc;
    return high_unc ? Quadrant::LowDiffHighUnc : Quadrant::LowDiffLowUnc;
}

QuadrantSummary quadrant_summary(const std::vector<std::pair<double, double>>& cases, double diff_threshold_pct,
                                 double uncertainty_threshold)
{
    if (!std::isfinite(diff_threshold_pct) || !std::isfinite(uncertainty_threshold))
        throw Error(ErrorKind::DomainError, "quadrant thresholds must be finite");
    QuadrantSummary s;
    s.diff_threshold_pct = diff_threshold_pct;
    s.uncertainty_threshold = uncertainty_threshold;
    for (const auto& [diff, value] : cases) {
        switch (classify_quadrant(diff, value, diff_threshold_pct, uncertainty_threshold)) {
        case Quadrant::LowDiffLowUnc: ++s.low_diff_low_unc; break;
        case Quadrant::LowDiffHighUnc: ++s.low_diff_high_unc; break;
        case Quadrant::HighDiffLowUnc: ++s.high_diff_low_unc; break;
        case Quadrant::HighDiffHighUnc: ++s.high_diff_high_unc; break;
        }
    }
    return s;
}

std::string flag_report_csv(const std::vector<FlagDecision>& decisions)
{
    std::string out = csv_line({"case_id", "metric_name", "metric_value", "threshold", "flagged"});
    for (const auto& d : decisions)
        out += csv_line({d.case_id, d.metric_name, format_fixed(d.metric_value, 9), format_fixed(d.threshold, 9),
                         d.flagged ? "true" : "false"});
    return out;
}

}  // namespace bodycomp
