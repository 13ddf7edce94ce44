#include "bodycomp/longitudinal.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "bodycomp/csv.hpp"
#include "bodycomp/dicom.hpp"
#include "bodycomp/error.hpp"

namespace bodycomp {

namespace {

constexpr double kPanelWidth = 480.0;
constexpr double kPanelHeight = 320.0;
constexpr double kMargin = 48.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

std::string num(double v)
{
    std::ostringstream s;
    s.precision(2);
    s << std::fixed << v;
    return s.str();
}

}  // namespace

LongitudinalOutput emit_longitudinal(const std::vector<ManifestRow>& rows,
                                     const std::map<std::string, std::string>& status,
                                     const std::vector<std::string>& patients)
{
    std::set<std::string> wanted(patients.begin(), patients.end());
    std::set<std::string> present;
    for (const auto& r : rows)
        present.insert(r.patient_id);
    for (const auto& p : wanted)
        if (!present.count(p))
            throw Error(ErrorKind::UnknownPatient, "no manifest rows for patient '" + p + "'");

    LongitudinalOutput out;
    for (const auto& r : rows) {
        if (!wanted.empty() && !wanted.count(r.patient_id))
            continue;
        const auto date = CalendarDate::parse(r.scan_date);
        if (!date)
            continue;
        out.series[r.patient_id].push_back({r.patient_id, date->iso(), r.sma_cm2, r.smi});
    }
    for (auto& [id, points] : out.series)
        std::stable_sort(points.begin(), points.end(),
                         [](const LongitudinalPoint& a, const LongitudinalPoint& b) { return a.scan_date < b.scan_date; });

    out.csv = csv_line({"patient_id", "scan_date", "sma_cm2", "smi"});
    for (const auto& [id, points] : out.series)
        for (const auto& p : points)
            out.csv += csv_line({p.patient_id, p.scan_date, format_fixed(p.sma_cm2, 6),
                                 p.smi ? format_fixed(*p.smi, 6) : std::string()});

    // Panels by status group, in name order.
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& [id, points] : out.series) {
        const auto it = status.find(id);
        groups[it == status.end() ? "unassigned" : it->second].push_back(id);
    }

    const bool use_smi = std::all_of(out.series.begin(), out.series.end(), [](const auto& kv) {
        return std::all_of(kv.second.begin(), kv.second.end(), [](const auto& p) { return p.smi.has_value(); });
    });
    const auto value = [&](const LongitudinalPoint& p) { return use_smi ? *p.smi : p.sma_cm2; };

    long day_lo = 0, day_hi = 0;
    double v_lo = 0.0, v_hi = 0.0;
    bool first = true;
    for (const auto& [id, points] : out.series)
        for (const auto& p : points) {
            const long d = CalendarDate::parse(p.scan_date)->days_since_epoch();
            const double v = value(p);
            if (first) {
                day_lo = day_hi = d;
                v_lo = v_hi = v;
                first = false;
            }
            day_lo = std::min(day_lo, d);
            day_hi = std::max(day_hi, d);
            v_lo = std::min(v_lo, v);
            v_hi = std::max(v_hi, v);
        }
    const double plot_w = kPanelWidth - 2 * kMargin;
    const double plot_h = kPanelHeight - 2 * kMargin;
    const auto x_of = [&](long d) {
        return day_hi == day_lo ? kMargin + plot_w / 2
                                : kMargin + plot_w * static_cast<double>(d - day_lo) / static_cast<double>(day_hi - day_lo);
    };
    const auto y_of = [&](double v) {
        return v_hi == v_lo ? kMargin + plot_h / 2 : kMargin + plot_h * (v_hi - v) / (v_hi - v_lo);
    };

    const std::size_t panels = std::max<std::size_t>(groups.size(), 1);
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kPanelWidth * static_cast<double>(panels))
        << "\" height=\"" << num(kPanelHeight) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    std::size_t panel = 0;
    for (const auto& [group, ids] : groups) {
        svg << "<g class=\"panel\" data-group=\"" << xml_escape(group) << "\" transform=\"translate("
            << num(kPanelWidth * static_cast<double>(panel)) << ",0)\">\n";
        svg << "<rect x=\"" << num(kMargin) << "\" y=\"" << num(kMargin) << "\" width=\"" << num(plot_w)
            << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
        svg << "<text x=\"" << num(kPanelWidth / 2) << "\" y=\"" << num(kMargin / 2)
            << "\" text-anchor=\"middle\">" << xml_escape(group) << "</text>\n";
        svg << "<text x=\"" << num(kMargin / 4) << "\" y=\"" << num(kMargin - 6) << "\">"
            << (use_smi ? "SMI (cm2/m2)" : "SMA (cm2)") << "</text>\n";
        std::size_t colour = 0;
        for (const auto& id : ids) {
            const auto& points = out.series.at(id);
            const char* stroke = kPalette[colour++ % std::size(kPalette)];
            svg << "<polyline class=\"series\" data-patient=\"" << xml_escape(id) << "\" fill=\"none\" stroke=\""
                << stroke << "\" points=\"";
            for (std::size_t k = 0; k < points.size(); ++k) {
                const long d = CalendarDate::parse(points[k].scan_date)->days_since_epoch();
                svg << (k ? " " : "") << num(x_of(d)) << "," << num(y_of(value(points[k])));
            }
            svg << "\"/>\n";
            for (const auto& p : points) {
                const long d = CalendarDate::parse(p.scan_date)->days_since_epoch();
                svg << "<circle cx=\"" << num(x_of(d)) << "\" cy=\"" << num(y_of(value(p))) << "\" r=\"3\" fill=\""
                    << stroke << "\"><title>" << xml_escape(id) << " " << p.scan_date << "</title></circle>\n";
            }
        }
        svg << "</g>\n";
        ++panel;
    }
    svg << "</svg>\n";
    out.svg = svg.str();
    return out;
}

std::map<std::string, std::string> read_status_csv(const std::filesystem::path& path)
{
    const CsvTable table = read_csv(path, true);
    const auto id = table.column("patient_id");
    const auto st = table.column("status");
    if (!id || !st)
        throw Error(ErrorKind::MalformedData, "status CSV needs patient_id and status columns");
    std::map<std::string, std::string> out;
    for (const auto& row : table.rows)
        if (*id < row.size() && *st < row.size())
            out[row[*id]] = row[*st];
    return out;
}

}  // namespace bodycomp
