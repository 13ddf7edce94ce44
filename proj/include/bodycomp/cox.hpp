#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bodycomp/stats.hpp"

namespace bodycomp {

struct CoxOptions {
    double gradient_tolerance = 1e-7;
    int max_iterations = 500;
};

struct CoxModel {
    std::vector<std::string> columns;
    Eigen::VectorXd coefficients;
    /// Column means the design was centred on while fitting.
    Eigen::VectorXd centering;
    double penalizer = 0.0;
    double log_likelihood = 0.0;  // penalised, at the optimum
    double gradient_norm = 0.0;   // infinity norm
    int iterations = 0;
    bool fitted = false;

    /// x'beta per row (uncentred; a constant shift does not change any ranking).
    Eigen::VectorXd risk_scores(const Eigen::MatrixXd& x) const;
};

/// Efron-tie partial log-likelihood of `beta` minus (penalizer/2)|beta|^2.
double cox_log_likelihood(const Eigen::MatrixXd& x, const std::vector<double>& times,
                          const std::vector<bool>& events, const Eigen::VectorXd& beta, double penalizer);

/// Newton-Raphson with step halving. Throws NoEvents (< 2 events), Collinearity (names the
/// dependent columns), NonConvergence, LengthMismatch, DomainError (negative penalizer).
CoxModel fit_coxph(const Eigen::MatrixXd& x, const std::vector<double>& times, const std::vector<bool>& events,
                   double penalizer, std::vector<std::string> columns = {}, CoxOptions options = {});

/// Encoding of covariate rows into a numeric design. Continuous columns are z-scored with the
/// population standard deviation of the rows the encoding was built on; categorical columns are
/// one-hot with the first sorted level as reference. Unseen levels encode as the reference.
struct CovariateEncoding {
    struct Continuous {
        std::string name;
        double mean = 0.0;
        double stddev = 0.0;  // 0 leaves the column at zero
    };
    struct Categorical {
        std::string name;
        std::vector<std::string> levels;  // levels[0] is the reference
    };
    std::vector<Continuous> continuous;
    std::vector<Categorical> categorical;

    static CovariateEncoding build(const std::vector<CovariateRow>& rows);
    std::vector<std::string> column_names() const;
    Eigen::MatrixXd encode(const std::vector<CovariateRow>& rows) const;
};

struct CoxFit {
    CovariateEncoding encoding;
    CoxModel model;
};

CoxFit fit_coxph(const std::vector<CovariateRow>& rows, double penalizer, CoxOptions options = {});

struct CoxReport {
    double penalizer = 0.0;
    CoxFit fit;
    double concordance_train = 0.0;
    /// Absent when the test split has no admissible pair.
    std::optional<double> concordance_test;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

inline const std::vector<double> kDefaultPenalizers = {0.1, 0.5, 1.0, 1.5, 2.0};

/// Seeded shuffle split; the encoding is built on the training rows only.
CoxReport cox_train_test(const std::vector<CovariateRow>& rows, double penalizer, double test_fraction,
                         std::uint64_t seed);

/// One report per penalizer, fitted concurrently, returned in input order.
std::vector<CoxReport> cox_penalizer_sweep(const std::vector<CovariateRow>& rows,
                                           const std::vector<double>& penalizers, double test_fraction,
                                           std::uint64_t seed);

std::string cox_report_json(const std::vector<CoxReport>& reports);

}  // namespace bodycomp
