#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bodycomp/mask_fusion.hpp"

namespace bodycomp {

/// Binary entropy in bits, with 0 log 0 = 0. Throws DomainError outside [0,1].
double binary_entropy(double p);

/// Logistic (Platt) map on the logit: sigmoid(a * logit(p) + b).
struct CalibrationModel {
    double a = 1.0;
    double b = 0.0;
    bool fitted = false;

    static CalibrationModel identity() { return {1.0, 0.0, true}; }
};

struct PlattFitOptions {
    double gradient_tolerance = 1e-8;
    int max_iterations = 100;
};

/// Newton maximisation of the Bernoulli log-likelihood. Throws SingleClass, LengthMismatch,
/// NonConvergence (message carries the final gradient norm).
CalibrationModel fit_platt(const std::vector<double>& scores, const std::vector<int>& labels,
                           PlattFitOptions options = {});

/// Throws Unfitted.
double apply_platt(const CalibrationModel& model, double p);

/// `score,label` rows, optional header.
std::pair<std::vector<double>, std::vector<int>> read_calibration_pairs(const std::filesystem::path& path);
void save_calibration(const CalibrationModel& model, const std::filesystem::path& path);
CalibrationModel load_calibration(const std::filesystem::path& path);

struct UncertaintyReport {
    double avg_probability = 0.0;
    std::optional<double> avg_probability_sm;
    std::optional<double> avg_calibrated_probability;
    double cov_pixelwise_pct = 0.0;
    double cov_sma_pct = 0.0;
    double avg_variance = 0.0;
    std::optional<double> avg_variance_sm;
    double avg_entropy = 0.0;
    double expected_entropy = 0.0;
    /// Per-pixel variance across members.
    Grid<double> uncertainty_map;

    /// Value of a metric by its snake_case name; nullopt for absent or unknown metrics.
    std::optional<double> metric(std::string_view name) const;
};

/// Metric names accepted by UncertaintyReport::metric.
const std::vector<std::string>& uncertainty_metric_names();

/// Nine-metric report for one slice. `per_member_sma` holds one SMA per dispersion member.
/// Throws LengthMismatch, DimensionMismatch.
UncertaintyReport compute_report(const ProbabilityStack& stack, const MuscleMask& mask,
                                 const std::vector<double>& per_member_sma,
                                 const std::optional<CalibrationModel>& calibration = std::nullopt);

/// Min-max scaled 8-bit rendering of the variance map; constant maps render all zero.
Grid<std::uint8_t> render_uncertainty_map(const Grid<double>& map);

/// Throws GeometryMismatch.
ExportedImage export_uncertainty_map(const UncertaintyReport& report, const SliceHeader& template_header);

}  // namespace bodycomp
