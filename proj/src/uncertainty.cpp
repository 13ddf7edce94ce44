#include "bodycomp/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bodycomp/csv.hpp"
#include "bodycomp/error.hpp"
#include "bodycomp/png_codec.hpp"

namespace bodycomp {

double binary_entropy(double p)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw Error(ErrorKind::DomainError, "entropy argument outside [0,1]");
    double h = 0.0;
    if (p > 0.0)
        h -= p * std::log2(p);
    if (p < 1.0)
        h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

namespace {

constexpr double kLogitClamp = 1e-7;

double logit(double p)
{
    p = std::clamp(p, kLogitClamp, 1.0 - kLogitClamp);
    return std::log(p / (1.0 - p));
}

double sigmoid(double x)
{
    if (x >= 0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// mean Bernoulli log-likelihood and its derivatives in (a, b)
struct PlattObjective {
    double loglik = 0.0;
    double ga = 0.0, gb = 0.0;
    double haa = 0.0, hab = 0.0, hbb = 0.0;
};

PlattObjective evaluate(const std::vector<double>& x, const std::vector<int>& y, double a, double b)
{
    PlattObjective o;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = a * x[i] + b;
        const double q = sigmoid(z);
        // log(sigmoid(z)) and log(1 - sigmoid(z)) without cancellation
        const double log_q = z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
        const double log_1mq = log_q - z;
        o.loglik += y[i] ? log_q : log_1mq;
        const double r = y[i] - q;
        o.ga += r * x[i];
        o.gb += r;
        const double w = q * (1.0 - q);
        o.haa -= w * x[i] * x[i];
        o.hab -= w * x[i];
        o.hbb -= w;
    }
    const double n = static_cast<double>(x.size());
    o.loglik /= n;
    o.ga /= n;
    o.gb /= n;
    o.haa /= n;
    o.hab /= n;
    o.hbb /= n;
    return o;
}

}  // namespace

CalibrationModel fit_platt(const std::vector<double>& scores, const std::vector<int>& labels, PlattFitOptions options)
{
    if (scores.size() != labels.size())
        throw Error(ErrorKind::LengthMismatch, "scores and labels differ in length");
    std::size_t positives = 0;
    for (int y : labels) {
        if (y != 0 && y != 1)
            throw Error(ErrorKind::DomainError, "labels must be 0 or 1");
        positives += static_cast<std::size_t>(y);
    }
    if (scores.size() < 2 || positives == 0 || positives == labels.size())
        throw Error(ErrorKind::SingleClass, "calibration needs both classes");

    std::vector<double> x(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
            throw Error(ErrorKind::DomainError, "score outside [0,1]");
        x[i] = logit(scores[i]);
    }

    double a = 1.0, b = 0.0;
    PlattObjective o = evaluate(x, labels, a, b);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        if (std::max(std::abs(o.ga), std::abs(o.gb)) < options.gradient_tolerance)
            return {a, b, true};
        // Newton step on the concave log-likelihood: H d = -g
        const double det = o.haa * o.hbb - o.hab * o.hab;
        double da = 0.0, db = 0.0;
        if (det > 1e-300 && o.haa < 0) {
            da = -(o.hbb * o.ga - o.hab * o.gb) / det;
            db = -(-o.hab * o.ga + o.haa * o.gb) / det;
        } else {
            da = o.ga;
            db = o.gb;
        }
        double step = 1.0;
        PlattObjective next;
        for (int halving = 0; halving < 40; ++halving) {
            next = evaluate(x, labels, a + step * da, b + step * db);
            if (next.loglik >= o.loglik - 1e-15)
                break;
            step *= 0.5;
        }
        a += step * da;
        b += step * db;
        o = next;
        if (!std::isfinite(a) || !std::isfinite(b))
            break;
    }
    if (std::max(std::abs(o.ga), std::abs(o.gb)) < options.gradient_tolerance && std::isfinite(a))
        return {a, b, true};
    std::ostringstream msg;
    msg << "gradient norm " << std::max(std::abs(o.ga), std::abs(o.gb)) << " after " << options.max_iterations
        << " iterations";
    throw Error(ErrorKind::NonConvergence, msg.str());
}

double apply_platt(const CalibrationModel& model, double p)
{
    if (!model.fitted)
        throw Error(ErrorKind::Unfitted, "calibration model has not been fitted");
    return sigmoid(model.a * logit(p) + model.b);
}

std::pair<std::vector<double>, std::vector<int>> read_calibration_pairs(const std::filesystem::path& path)
{
    const CsvTable table = read_csv(path, /*has_header=*/false);
    std::pair<std::vector<double>, std::vector<int>> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() < 2)
            throw Error(ErrorKind::MalformedData, path.string() + ": expected score,label");
        const auto score = parse_double(row[0]);
        const auto label = parse_double(row[1]);
        if (!score || !label) {
            if (r == 0)
                continue;  // header
            throw Error(ErrorKind::MalformedData, path.string() + ": bad row " + std::to_string(r + 1));
        }
        out.first.push_back(*score);
        out.second.push_back(static_cast<int>(*label));
    }
    return out;
}

void save_calibration(const CalibrationModel& model, const std::filesystem::path& path)
{
    if (!model.fitted)
        throw Error(ErrorKind::Unfitted, "refusing to save an unfitted calibration model");
    nlohmann::json doc{{"a", model.a}, {"b", model.b}};
    write_text(path, doc.dump(2) + "\n");
}

CalibrationModel load_calibration(const std::filesystem::path& path)
{
    try {
        const auto doc = nlohmann::json::parse(read_text(path));
        CalibrationModel m{doc.at("a").get<double>(), doc.at("b").get<double>(), true};
        if (!std::isfinite(m.a) || !std::isfinite(m.b))
            throw Error(ErrorKind::MalformedData, path.string() + ": non-finite calibration parameters");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedData, path.string() + ": " + e.what());
    }
}

const std::vector<std::string>& uncertainty_metric_names()
{
    static const std::vector<std::string> names = {
        "avg_probability", "avg_probability_sm", "avg_calibrated_probability",
        "cov_pixelwise_pct", "cov_sma_pct", "avg_variance",
        "avg_variance_sm", "avg_entropy", "expected_entropy",
    };
    return names;
}

std::optional<double> UncertaintyReport::metric(std::string_view name) const
{
    if (name == "avg_probability") return avg_probability;
    if (name == "avg_probability_sm") return avg_probability_sm;
    if (name == "avg_calibrated_probability") return avg_calibrated_probability;
    if (name == "cov_pixelwise_pct") return cov_pixelwise_pct;
    if (name == "cov_sma_pct") return cov_sma_pct;
    if (name == "avg_variance") return avg_variance;
    if (name == "avg_variance_sm") return avg_variance_sm;
    if (name == "avg_entropy") return avg_entropy;
    if (name == "expected_entropy") return expected_entropy;
    return std::nullopt;
}

UncertaintyReport compute_report(const ProbabilityStack& stack, const MuscleMask& mask,
                                 const std::vector<double>& per_member_sma,
                                 const std::optional<CalibrationModel>& calibration)
{
    const std::vector<Grid<double>> members = dispersion_members(stack);
    if (per_member_sma.size() != members.size())
        throw Error(ErrorKind::LengthMismatch, "need one SMA per ensemble member (" + std::to_string(members.size()) +
                                                   "), got " + std::to_string(per_member_sma.size()));
    if (mask.pixels.rows() != stack.rows() || mask.pixels.cols() != stack.cols())
        throw Error(ErrorKind::DimensionMismatch, "mask and stack differ in size");

    const std::size_t n_pixels = stack.pixel_count();
    const double n_members = static_cast<double>(members.size());

    UncertaintyReport r;
    r.uncertainty_map = Grid<double>(stack.rows(), stack.cols(), 0.0);

    double sum_prob = 0.0, sum_prob_sm = 0.0, sum_calibrated = 0.0;
    double sum_cov = 0.0, sum_var = 0.0, sum_var_sm = 0.0;
    double sum_entropy = 0.0, sum_expected_entropy = 0.0;
    std::size_t sm_pixels = 0;

    for (std::size_t i = 0; i < n_pixels; ++i) {
        double mean = 0.0, member_entropy = 0.0;
        for (const auto& m : members) {
            mean += m[i];
            member_entropy += binary_entropy(m[i]);
        }
        mean /= n_members;
        member_entropy /= n_members;
        double var = 0.0;
        for (const auto& m : members)
            var += (m[i] - mean) * (m[i] - mean);
        var /= n_members;
        mean = std::clamp(mean, 0.0, 1.0);

        r.uncertainty_map[i] = var;
        const double predicted = std::max(mean, 1.0 - mean);
        sum_prob += predicted;
        sum_var += var;
        sum_entropy += binary_entropy(mean);
        sum_expected_entropy += member_entropy;
        if (mean >= 1e-7)
            sum_cov += 100.0 * std::sqrt(var) / mean;
        if (calibration) {
            const double c = apply_platt(*calibration, mean);
            sum_calibrated += std::max(c, 1.0 - c);
        }
        if (mask.pixels[i]) {
            ++sm_pixels;
            sum_prob_sm += predicted;
            sum_var_sm += var;
        }
    }

    const double n = static_cast<double>(n_pixels);
    r.avg_probability = sum_prob / n;
    r.avg_variance = sum_var / n;
    r.avg_entropy = sum_entropy / n;
    r.expected_entropy = sum_expected_entropy / n;
    r.cov_pixelwise_pct = sum_cov / n;
    if (calibration)
        r.avg_calibrated_probability = sum_calibrated / n;
    if (sm_pixels > 0) {
        r.avg_probability_sm = sum_prob_sm / static_cast<double>(sm_pixels);
        r.avg_variance_sm = sum_var_sm / static_cast<double>(sm_pixels);
    }

    double sma_mean = 0.0;
    for (double s : per_member_sma)
        sma_mean += s;
    sma_mean /= n_members;
    double sma_var = 0.0;
    for (double s : per_member_sma)
        sma_var += (s - sma_mean) * (s - sma_mean);
    sma_var /= n_members;
    r.cov_sma_pct = sma_mean > 0.0 ? 100.0 * std::sqrt(sma_var) / sma_mean : 0.0;
    return r;
}

Grid<std::uint8_t> render_uncertainty_map(const Grid<double>& map)
{
    Grid<std::uint8_t> gray(map.rows(), map.cols(), 0);
    if (map.empty())
        return gray;
    const auto [lo_it, hi_it] = std::minmax_element(map.begin(), map.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo))
        return gray;
    for (std::size_t i = 0; i < map.size(); ++i)
        gray[i] = static_cast<std::uint8_t>(std::clamp(std::round(255.0 * (map[i] - lo) / (hi - lo)), 0.0, 255.0));
    return gray;
}

ExportedImage export_uncertainty_map(const UncertaintyReport& report, const SliceHeader& template_header)
{
    if (report.uncertainty_map.rows() != template_header.rows || report.uncertainty_map.cols() != template_header.columns)
        throw Error(ErrorKind::GeometryMismatch, "uncertainty map does not match template geometry");
    const Grid<std::uint8_t> gray = render_uncertainty_map(report.uncertainty_map);
    return {encode_png_gray8(gray), serialize_derived_image(gray, template_header, "muscle uncertainty map")};
}

}  // namespace bodycomp
