#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bodycomp {

/// Throws OutOfRange unless weight is in (20, 300) kg and height in (0.5, 2.5) m.
double bmi(double weight_kg, double height_m);

enum class CachexiaStatus { Cachectic, NonCachectic };

CachexiaStatus classify_cachexia_two_stage(double weight_loss_pct_6mo, double bmi_value);
std::string to_string(CachexiaStatus status);

/// Throws LengthMismatch (also for n < 3), ConstantInput.
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

struct CorrSignificance {
    double t = 0.0;
    double p = 1.0;
    bool significant = false;
    /// |r| == 1: t is infinite and p is pinned to 0.
    bool degenerate = false;
};

/// Two-sided Student t test of r with n - 2 degrees of freedom, alpha 0.05.
/// Throws DomainError for n < 3 or |r| > 1.
CorrSignificance corr_significance(double r, std::size_t n, double alpha = 0.05);

/// Harrell's C. Pairs tied in time are not admissible. Throws LengthMismatch, NoAdmissiblePairs.
double concordance_index(const std::vector<double>& times, const std::vector<bool>& events,
                         const std::vector<double>& risk_scores);

struct CovariateRow {
    std::string patient_id;
    double age = 0.0;
    std::string sex;
    std::string race;
    std::string ethnicity;
    double weight_kg = 0.0;
    double height_m = 0.0;
    std::string stage;
    double bmi = 0.0;
    double sma_cm2 = 0.0;
    double smi = 0.0;
    double time_to_event = 0.0;
    bool event_observed = false;
    /// Optional label column for the classifiers (cachexia or recurrence).
    std::optional<int> label;
};

/// Reads CovariateRow columns by header name. A missing bmi is derived from weight and height.
/// Throws MalformedData on unparsable cells, DomainError on a negative time or inconsistent bmi.
std::vector<CovariateRow> read_covariates(const std::filesystem::path& path);

}  // namespace bodycomp
