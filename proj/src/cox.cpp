#include "bodycomp/cox.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <json.hpp>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "bodycomp/error.hpp"

namespace bodycomp {

Eigen::VectorXd CoxModel::risk_scores(const Eigen::MatrixXd& x) const
{
    if (!fitted)
        throw Error(ErrorKind::Unfitted, "Cox model is not fitted");
    if (x.cols() != coefficients.size())
        throw Error(ErrorKind::ShapeMismatch, "design has " + std::to_string(x.cols()) + " columns, model has " +
                                                  std::to_string(coefficients.size()));
    return x * coefficients;
}

namespace {

struct Derivatives {
    double log_likelihood = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd information;  // negative Hessian
};

std::vector<std::size_t> descending_time_order(const std::vector<double>& times)
{
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });
    return order;
}

// Efron partial likelihood and its first two derivatives, walking times from longest to
// shortest so the risk-set sums accumulate.
Derivatives efron(const Eigen::MatrixXd& x, const std::vector<double>& times, const std::vector<bool>& events,
                  const Eigen::VectorXd& beta, double penalizer, bool want_derivatives)
{
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Eigen::VectorXd eta = x * beta;
    const double shift = n > 0 ? eta.maxCoeff() : 0.0;
    const Eigen::VectorXd w = (eta.array() - shift).exp().matrix();

    Derivatives d;
    d.gradient = Eigen::VectorXd::Zero(p);
    if (want_derivatives)
        d.information = Eigen::MatrixXd::Zero(p, p);

    double risk_s = 0.0;
    Eigen::VectorXd risk_z = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd risk_w = want_derivatives ? Eigen::MatrixXd::Zero(p, p) : Eigen::MatrixXd();

    const auto order = descending_time_order(times);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double tie_s = 0.0;
        Eigen::VectorXd tie_z = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd tie_w = want_derivatives ? Eigen::MatrixXd::Zero(p, p) : Eigen::MatrixXd();
        int deaths = 0;
        while (j < order.size() && times[order[j]] == times[order[i]]) {
            const auto s = static_cast<Eigen::Index>(order[j]);
            const auto xs = x.row(s).transpose();
            risk_s += w[s];
            risk_z += w[s] * xs;
            if (want_derivatives)
                risk_w += w[s] * xs * xs.transpose();
            if (events[order[j]]) {
                ++deaths;
                tie_s += w[s];
                tie_z += w[s] * xs;
                if (want_derivatives)
                    tie_w += w[s] * xs * xs.transpose();
                d.log_likelihood += eta[s];
                d.gradient += xs;
            }
            ++j;
        }
        for (int l = 0; l < deaths; ++l) {
            const double frac = static_cast<double>(l) / deaths;
            const double phi = risk_s - frac * tie_s;
            const Eigen::VectorXd z = risk_z - frac * tie_z;
            d.log_likelihood -= std::log(phi) + shift;
            d.gradient -= z / phi;
            if (want_derivatives)
                d.information += (risk_w - frac * tie_w) / phi - z * z.transpose() / (phi * phi);
        }
        i = j;
    }
    d.log_likelihood -= 0.5 * penalizer * beta.squaredNorm();
    d.gradient -= penalizer * beta;
    if (want_derivatives)
        d.information += penalizer * Eigen::MatrixXd::Identity(p, p);
    return d;
}

void check_inputs(const Eigen::MatrixXd& x, const std::vector<double>& times, const std::vector<bool>& events,
                  double penalizer)
{
    const auto n = static_cast<std::size_t>(x.rows());
    if (times.size() != n || events.size() != n)
        throw Error(ErrorKind::LengthMismatch, "Cox inputs differ in length");
    if (!(penalizer >= 0.0) || !std::isfinite(penalizer))
        throw Error(ErrorKind::DomainError, "penalizer must be finite and >= 0");
    for (double t : times)
        if (!(t >= 0.0) || !std::isfinite(t))
            throw Error(ErrorKind::DomainError, "time to event must be finite and >= 0");
    if (!x.allFinite())
        throw Error(ErrorKind::DomainError, "design matrix has non-finite entries");
}

}  // namespace

double cox_log_likelihood(const Eigen::MatrixXd& x, const std::vector<double>& times,
                          const std::vector<bool>& events, const Eigen::VectorXd& beta, double penalizer)
{
    check_inputs(x, times, events, penalizer);
    return efron(x, times, events, beta, penalizer, false).log_likelihood;
}

CoxModel fit_coxph(const Eigen::MatrixXd& x_raw, const std::vector<double>& times, const std::vector<bool>& events,
                   double penalizer, std::vector<std::string> columns, CoxOptions options)
{
    check_inputs(x_raw, times, events, penalizer);
    const auto event_count = std::count(events.begin(), events.end(), true);
    if (event_count < 2)
        throw Error(ErrorKind::NoEvents, "Cox fit needs at least 2 observed events, got " + std::to_string(event_count));
    const Eigen::Index p = x_raw.cols();
    if (columns.empty())
        for (Eigen::Index c = 0; c < p; ++c)
            columns.push_back("x" + std::to_string(c));
    if (static_cast<Eigen::Index>(columns.size()) != p)
        throw Error(ErrorKind::LengthMismatch, "column name count differs from design width");

    CoxModel model;
    model.columns = std::move(columns);
    model.penalizer = penalizer;
    model.centering = x_raw.colwise().mean().transpose();
    const Eigen::MatrixXd x = x_raw.rowwise() - model.centering.transpose();

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Derivatives d = efron(x, times, events, beta, penalizer, true);
    int iteration = 0;
    for (;; ++iteration) {
        const double gnorm = p > 0 ? d.gradient.cwiseAbs().maxCoeff() : 0.0;
        if (!std::isfinite(gnorm))
            throw Error(ErrorKind::NonConvergence, "non-finite gradient at iteration " + std::to_string(iteration));
        if (gnorm < options.gradient_tolerance)
            break;
        if (iteration >= options.max_iterations)
            throw Error(ErrorKind::NonConvergence, "no convergence after " + std::to_string(iteration) +
                                                       " iterations, gradient norm " + std::to_string(gnorm));

        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.information);
        qr.setThreshold(1e-10);
        if (qr.rank() < p) {
            std::string names;
            const auto& perm = qr.colsPermutation().indices();
            for (Eigen::Index k = qr.rank(); k < p; ++k) {
                if (!names.empty())
                    names += ", ";
                names += model.columns[static_cast<std::size_t>(perm[k])];
            }
            throw Error(ErrorKind::Collinearity, "singular information matrix; dependent columns: " + names);
        }
        const Eigen::VectorXd step = qr.solve(d.gradient);

        double scale = 1.0;
        Derivatives next;
        Eigen::VectorXd candidate;
        for (int halving = 0;; ++halving) {
            candidate = beta + scale * step;
            next = efron(x, times, events, candidate, penalizer, true);
            if (std::isfinite(next.log_likelihood) && next.log_likelihood >= d.log_likelihood - 1e-12)
                break;
            if (halving == 40)
                throw Error(ErrorKind::NonConvergence,
                            "line search failed at iteration " + std::to_string(iteration));
            scale *= 0.5;
        }
        beta = candidate;
        d = std::move(next);
    }

    if (!beta.allFinite())
        throw Error(ErrorKind::NonConvergence, "non-finite coefficients");
    model.coefficients = beta;
    model.log_likelihood = d.log_likelihood;
    model.gradient_norm = p > 0 ? d.gradient.cwiseAbs().maxCoeff() : 0.0;
    model.iterations = iteration;
    model.fitted = true;
    return model;
}

namespace {

struct ContinuousField {
    const char* name;
    double CovariateRow::*member;
};
struct CategoricalField {
    const char* name;
    std::string CovariateRow::*member;
};

constexpr ContinuousField kContinuous[] = {
    {"age", &CovariateRow::age},         {"weight_kg", &CovariateRow::weight_kg}, {"height_m", &CovariateRow::height_m},
    {"bmi", &CovariateRow::bmi},         {"sma_cm2", &CovariateRow::sma_cm2},     {"smi", &CovariateRow::smi},
};
constexpr CategoricalField kCategorical[] = {
    {"sex", &CovariateRow::sex},
    {"race", &CovariateRow::race},
    {"ethnicity", &CovariateRow::ethnicity},
    {"stage", &CovariateRow::stage},
};

}  // namespace

CovariateEncoding CovariateEncoding::build(const std::vector<CovariateRow>& rows)
{
    if (rows.empty())
        throw Error(ErrorKind::EmptyInput, "no covariate rows");
    CovariateEncoding enc;
    const double n = static_cast<double>(rows.size());
    for (const auto& field : kContinuous) {
        double mean = 0.0;
        for (const auto& r : rows)
            mean += r.*field.member;
        mean /= n;
        double var = 0.0;
        for (const auto& r : rows)
            var += (r.*field.member - mean) * (r.*field.member - mean);
        enc.continuous.push_back({field.name, mean, std::sqrt(var / n)});
    }
    for (const auto& field : kCategorical) {
        std::set<std::string> levels;
        for (const auto& r : rows)
            levels.insert(r.*field.member);
        enc.categorical.push_back({field.name, {levels.begin(), levels.end()}});
    }
    return enc;
}

std::vector<std::string> CovariateEncoding::column_names() const
{
    std::vector<std::string> names;
    for (const auto& c : continuous)
        names.push_back(c.name);
    for (const auto& c : categorical)
        for (std::size_t l = 1; l < c.levels.size(); ++l)
            names.push_back(c.name + "=" + c.levels[l]);
    return names;
}

Eigen::MatrixXd CovariateEncoding::encode(const std::vector<CovariateRow>& rows) const
{
    const auto width = static_cast<Eigen::Index>(column_names().size());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        Eigen::Index col = 0;
        for (std::size_t k = 0; k < continuous.size(); ++k, ++col) {
            const auto& c = continuous[k];
            const double v = rows[i].*kContinuous[k].member;
            x(r, col) = c.stddev > 0.0 ? (v - c.mean) / c.stddev : 0.0;
        }
        for (std::size_t k = 0; k < categorical.size(); ++k) {
            const auto& c = categorical[k];
            const std::string& v = rows[i].*kCategorical[k].member;
            for (std::size_t l = 1; l < c.levels.size(); ++l, ++col)
                x(r, col) = v == c.levels[l] ? 1.0 : 0.0;
        }
    }
    return x;
}

namespace {

std::vector<double> times_of(const std::vector<CovariateRow>& rows)
{
    std::vector<double> t;
    for (const auto& r : rows)
        t.push_back(r.time_to_event);
    return t;
}

std::vector<bool> events_of(const std::vector<CovariateRow>& rows)
{
    std::vector<bool> e;
    for (const auto& r : rows)
        e.push_back(r.event_observed);
    return e;
}

std::vector<double> to_std(const Eigen::VectorXd& v)
{
    return {v.data(), v.data() + v.size()};
}

}  // namespace

CoxFit fit_coxph(const std::vector<CovariateRow>& rows, double penalizer, CoxOptions options)
{
    CoxFit fit;
    fit.encoding = CovariateEncoding::build(rows);
    fit.model = fit_coxph(fit.encoding.encode(rows), times_of(rows), events_of(rows), penalizer,
                          fit.encoding.column_names(), options);
    return fit;
}

CoxReport cox_train_test(const std::vector<CovariateRow>& rows, double penalizer, double test_fraction,
                         std::uint64_t seed)
{
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw Error(ErrorKind::DomainError, "test fraction must lie in [0, 1)");
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto test_n = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(rows.size())));

    std::vector<CovariateRow> train, test;
    for (std::size_t k = 0; k < order.size(); ++k)
        (k < test_n ? test : train).push_back(rows[order[k]]);

    CoxReport report;
    report.penalizer = penalizer;
    report.fit = fit_coxph(train, penalizer);
    report.train_size = train.size();
    report.test_size = test.size();
    const auto& model = report.fit.model;
    report.concordance_train = concordance_index(
        times_of(train), events_of(train), to_std(model.risk_scores(report.fit.encoding.encode(train))));
    if (!test.empty()) {
        try {
            report.concordance_test = concordance_index(
                times_of(test), events_of(test), to_std(model.risk_scores(report.fit.encoding.encode(test))));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoAdmissiblePairs)
                throw;
        }
    }
    return report;
}

std::vector<CoxReport> cox_penalizer_sweep(const std::vector<CovariateRow>& rows,
                                           const std::vector<double>& penalizers, double test_fraction,
                                           std::uint64_t seed)
{
    std::vector<std::future<CoxReport>> jobs;
    for (double lambda : penalizers)
        jobs.push_back(std::async(std::launch::async, [&rows, lambda, test_fraction, seed] {
            return cox_train_test(rows, lambda, test_fraction, seed);
        }));
    std::vector<CoxReport> out;
    for (auto& job : jobs)
        out.push_back(job.get());
    return out;
}

std::string cox_report_json(const std::vector<CoxReport>& reports)
{
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json coefficients = nlohmann::json::object();
        const auto& m = r.fit.model;
        for (std::size_t c = 0; c < m.columns.size(); ++c)
            coefficients[m.columns[c]] = m.coefficients[static_cast<Eigen::Index>(c)];
        nlohmann::json encoding;
        for (const auto& c : r.fit.encoding.continuous)
            encoding["continuous"].push_back({{"name", c.name}, {"mean", c.mean}, {"stddev", c.stddev}});
        for (const auto& c : r.fit.encoding.categorical)
            encoding["categorical"].push_back({{"name", c.name}, {"levels", c.levels}, {"reference", c.levels.front()}});
        doc.push_back({
            {"penalizer", r.penalizer},
            {"coefficients", coefficients},
            {"concordance_train", r.concordance_train},
            {"concordance_test", r.concordance_test ? nlohmann::json(*r.concordance_test) : nlohmann::json(nullptr)},
            {"train_size", r.train_size},
            {"test_size", r.test_size},
            {"iterations", m.iterations},
            {"log_likelihood", m.log_likelihood},
            {"encoding", encoding},
        });
    }
    return doc.dump(2) + "\n";
}

}  // namespace bodycomp
