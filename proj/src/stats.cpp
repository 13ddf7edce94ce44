#include "bodycomp/stats.hpp"

#include <algorithm>
#include <cctype>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "bodycomp/csv.hpp"
#include "bodycomp/error.hpp"

namespace bodycomp {

double bmi(double weight_kg, double height_m)
{
    if (!(weight_kg > 20.0 && weight_kg < 300.0))
        throw Error(ErrorKind::OutOfRange, "weight " + std::to_string(weight_kg) + " kg outside (20, 300)");
    if (!(height_m > 0.5 && height_m < 2.5))
        throw Error(ErrorKind::OutOfRange, "height " + std::to_string(height_m) + " m outside (0.5, 2.5)");
    return weight_kg / (height_m * height_m);
}

CachexiaStatus classify_cachexia_two_stage(double weight_loss_pct_6mo, double bmi_value)
{
    const bool cachectic =
        bmi_value >= 20.0 ? weight_loss_pct_6mo > 5.0 : weight_loss_pct_6mo > 2.0;
    return cachectic ? CachexiaStatus::Cachectic : CachexiaStatus::NonCachectic;
}

std::string to_string(CachexiaStatus status)
{
    return status == CachexiaStatus::Cachectic ? "cachectic" : "non_cachectic";
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size())
        throw Error(ErrorKind::LengthMismatch, "pearson_r: x has " + std::to_string(x.size()) + " values, y has " +
                                                   std::to_string(y.size()));
    if (x.size() < 3)
        throw Error(ErrorKind::LengthMismatch, "pearson_r needs at least 3 pairs");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw Error(ErrorKind::ConstantInput, "pearson_r: constant input vector");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrSignificance corr_significance(double r, std::size_t n, double alpha)
{
    if (n < 3)
        throw Error(ErrorKind::DomainError, "corr_significance needs n >= 3");
    if (!(std::abs(r) <= 1.0))
        throw Error(ErrorKind::DomainError, "correlation outside [-1, 1]");
    CorrSignificance out;
    if (std::abs(r) == 1.0) {
        out.t = std::copysign(std::numeric_limits<double>::infinity(), r);
        out.p = 0.0;
        out.significant = true;
        out.degenerate = true;
        return out;
    }
    const double df = static_cast<double>(n - 2);
    out.t = r * std::sqrt(df) / std::sqrt(1.0 - r * r);
    boost::math::students_t dist(df);
    out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
    out.p = std::min(out.p, 1.0);
    out.significant = out.p < alpha;
    return out;
}

namespace {

// Counts over inserted ranks; prefix(i) is the number of inserted entries with rank < i.
class Fenwick {
public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
    void add(std::size_t rank)
    {
        for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1))
            ++tree_[i];
    }
    std::int64_t prefix(std::size_t rank) const
    {
        std::int64_t s = 0;
        for (std::size_t i = rank; i > 0; i -= i & (~i + 1))
            s += tree_[i];
        return s;
    }

private:
    std::vector<std::int64_t> tree_;
};

}  // namespace

double concordance_index(const std::vector<double>& times, const std::vector<bool>& events,
                         const std::vector<double>& risk_scores)
{
    const std::size_t n = times.size();
    if (events.size() != n || risk_scores.size() != n)
        throw Error(ErrorKind::LengthMismatch, "concordance_index: inputs differ in length");

    // Dense risk ranks.
    std::vector<double> sorted_risk(risk_scores);
    std::sort(sorted_risk.begin(), sorted_risk.end());
    sorted_risk.erase(std::unique(sorted_risk.begin(), sorted_risk.end()), sorted_risk.end());
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i)
        rank[i] = static_cast<std::size_t>(std::lower_bound(sorted_risk.begin(), sorted_risk.end(), risk_scores[i]) -
                                           sorted_risk.begin());

    // Walk subjects from the longest time down. Everyone already inserted has a strictly
    // larger time than the current block, so each event in the block pairs with all of them.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

    Fenwick tree(sorted_risk.size());
    std::int64_t inserted = 0;
    double concordant = 0.0;
    std::int64_t admissible = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && times[order[j]] == times[order[i]])
            ++j;
        for (std::size_t q = i; q < j; ++q) {
            const std::size_t s = order[q];
            if (!events[s])
                continue;
            const std::int64_t lower = tree.prefix(rank[s]);
            const std::int64_t lower_or_equal = tree.prefix(rank[s] + 1);
            concordant += static_cast<double>(lower) + 0.5 * static_cast<double>(lower_or_equal - lower);
            admissible += inserted;
        }
        for (std::size_t q = i; q < j; ++q) {
            tree.add(rank[order[q]]);
            ++inserted;
        }
        i = j;
    }
    if (admissible == 0)
        throw Error(ErrorKind::NoAdmissiblePairs, "no admissible pairs for concordance");
    return concordant / static_cast<double>(admissible);
}

namespace {

double cell_number(const CsvTable& table, const std::vector<std::string>& row, std::string_view name,
                   std::size_t line, bool required = true)
{
    const auto col = table.column(name);
    if (!col || *col >= row.size() || row[*col].empty()) {
        if (required)
            throw Error(ErrorKind::MalformedData,
                        "covariates line " + std::to_string(line) + ": missing column " + std::string(name));
        return std::numeric_limits<double>::quiet_NaN();
    }
    const auto v = parse_double(row[*col]);
    if (!v)
        throw Error(ErrorKind::MalformedData, "covariates line " + std::to_string(line) + ": bad number in " +
                                                  std::string(name) + ": '" + row[*col] + "'");
    return *v;
}

std::string cell_text(const CsvTable& table, const std::vector<std::string>& row, std::string_view name)
{
    const auto col = table.column(name);
    if (!col || *col >= row.size())
        return {};
    return row[*col];
}

bool parse_flag(const std::string& text, std::size_t line, std::string_view name)
{
    std::string t;
    for (char c : text)
        t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "1" || t == "true" || t == "yes" || t == "dead" || t == "deceased")
        return true;
    if (t == "0" || t == "false" || t == "no" || t == "alive")
        return false;
    throw Error(ErrorKind::MalformedData,
                "covariates line " + std::to_string(line) + ": bad flag in " + std::string(name) + ": '" + text + "'");
}

}  // namespace

std::vector<CovariateRow> read_covariates(const std::filesystem::path& path)
{
    const CsvTable table = read_csv(path, true);
    std::vector<CovariateRow> rows;
    rows.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;
        CovariateRow c;
        c.patient_id = cell_text(table, row, "patient_id");
        c.age = cell_number(table, row, "age", line);
        c.sex = cell_text(table, row, "sex");
        c.race = cell_text(table, row, "race");
        c.ethnicity = cell_text(table, row, "ethnicity");
        c.weight_kg = cell_number(table, row, "weight_kg", line);
        c.height_m = cell_number(table, row, "height_m", line);
        c.stage = cell_text(table, row, "stage");
        const double given_bmi = cell_number(table, row, "bmi", line, false);
        const double derived = bmi(c.weight_kg, c.height_m);
        if (!std::isnan(given_bmi) && std::abs(given_bmi - derived) > 1e-6)
            throw Error(ErrorKind::DomainError, "covariates line " + std::to_string(line) +
                                                    ": bmi disagrees with weight and height");
        c.bmi = std::isnan(given_bmi) ? derived : given_bmi;
        c.sma_cm2 = cell_number(table, row, "sma_cm2", line);
        const double smi_value = cell_number(table, row, "smi", line, false);
        c.smi = std::isnan(smi_value) ? c.sma_cm2 / (c.height_m * c.height_m) : smi_value;
        c.time_to_event = cell_number(table, row, "time_to_event", line);
        if (c.time_to_event < 0.0)
            throw Error(ErrorKind::DomainError, "covariates line " + std::to_string(line) + ": negative time");
        c.event_observed = parse_flag(cell_text(table, row, "event_observed"), line, "event_observed");
        if (table.column("label")) {
            const std::string label = cell_text(table, row, "label");
            if (!label.empty())
                c.label = parse_flag(label, line, "label") ? 1 : 0;
        }
        rows.push_back(std::move(c));
    }
    return rows;
}

}  // namespace bodycomp
