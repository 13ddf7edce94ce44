#include "bodycomp/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <toml.hpp>

#include "bodycomp/bytes.hpp"
#include "bodycomp/csv.hpp"
#include "bodycomp/error.hpp"
#include "bodycomp/uncertainty.hpp"

namespace bodycomp {

std::string to_string(LabelsSource v) { return v == LabelsSource::Nifti ? "nifti" : "json"; }
std::string to_string(SliceMode v) { return v == SliceMode::MidL3 ? "mid_l3" : "end_l3"; }
std::string to_string(AreaMode v) { return v == AreaMode::Single ? "single" : "window_average"; }

namespace {

class TomlFields {
public:
    TomlFields(const toml::table& table, ErrorKind kind, std::filesystem::path base)
        : table_(table), kind_(kind), base_(std::move(base))
    {
    }

    template <class T>
    std::optional<T> get(const std::string& key)
    {
        seen_.insert(key);
        const toml::node* node = table_.get(key);
        if (!node)
            return std::nullopt;
        if constexpr (std::is_same_v<T, double>) {
            if (auto v = node->value<double>())
                return *v;
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
            if (auto v = node->as_integer())
                return v->get();
        } else {
            if (auto v = node->value<T>())
                return *v;
        }
        throw Error(kind_, "key '" + key + "' has the wrong type");
    }

    std::optional<std::filesystem::path> path(const std::string& key)
    {
        auto text = get<std::string>(key);
        if (!text || text->empty())
            return std::nullopt;
        std::filesystem::path p(*text);
        return p.is_absolute() || base_.empty() ? p : base_ / p;
    }

    void reject_unknown() const
    {
        for (const auto& [key, node] : table_) {
            (void)node;
            if (!seen_.count(std::string(key.str())))
                throw Error(kind_, "unknown key '" + std::string(key.str()) + "'");
        }
    }

    Error error(const std::string& message) const { return Error(kind_, message); }

private:
    const toml::table& table_;
    ErrorKind kind_;
    std::filesystem::path base_;
    std::set<std::string> seen_;
};

toml::table parse_toml(std::string_view text, ErrorKind kind)
{
    try {
        return toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
        throw Error(kind, msg.str());
    }
}

std::uint64_t non_negative(std::int64_t v, const std::string& key, const TomlFields& f)
{
    if (v < 0)
        throw f.error("'" + key + "' must be >= 0");
    return static_cast<std::uint64_t>(v);
}

}  // namespace

RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir)
{
    const toml::table table = parse_toml(toml_text, ErrorKind::InvalidConfig);
    TomlFields f(table, ErrorKind::InvalidConfig, base_dir);
    RunConfig c;

    const auto input = f.path("input_root");
    const auto output = f.path("output_root");
    if (!input)
        throw f.error("'input_root' is required");
    if (!output)
        throw f.error("'output_root' is required");
    c.input_root = *input;
    c.output_root = *output;

    if (auto v = f.get<std::string>("labels_source")) {
        if (*v == "nifti")
            c.labels_source = LabelsSource::Nifti;
        else if (*v == "json")
            c.labels_source = LabelsSource::JsonSidecar;
        else
            throw f.error("labels_source must be nifti or json, got '" + *v + "'");
    }
    if (auto v = f.get<std::string>("slice_mode")) {
        if (*v == "mid_l3")
            c.slice_mode = SliceMode::MidL3;
        else if (*v == "end_l3")
            c.slice_mode = SliceMode::EndL3;
        else
            throw f.error("slice_mode must be mid_l3 or end_l3, got '" + *v + "'");
    }
    if (auto v = f.get<std::string>("area_mode")) {
        if (*v == "single")
            c.area_mode = AreaMode::Single;
        else if (*v == "window_average")
            c.area_mode = AreaMode::WindowAverage;
        else
            throw f.error("area_mode must be single or window_average, got '" + *v + "'");
    }
    if (auto v = f.get<std::string>("uncertainty_metric")) {
        const auto& names = uncertainty_metric_names();
        if (std::find(names.begin(), names.end(), *v) == names.end())
            throw f.error("unknown uncertainty_metric '" + *v + "'");
        c.uncertainty_metric = *v;
    }
    if (auto v = f.get<double>("uncertainty_threshold")) {
        if (std::isnan(*v))
            throw f.error("uncertainty_threshold is NaN");
        c.uncertainty_threshold = *v;
    }
    if (auto v = f.get<std::string>("series_preference"))
        c.series_preference = *v;
    c.calibration_model = f.path("calibration_model");
    c.heights_csv = f.path("heights_csv");
    c.corrections = f.path("corrections");
    if (auto v = f.get<std::int64_t>("seed"))
        c.seed = non_negative(*v, "seed", f);
    if (auto v = f.get<std::int64_t>("workers")) {
        if (*v < 1 || *v > 256)
            throw f.error("workers must lie in 1..256");
        c.workers = static_cast<unsigned>(*v);
    }
    if (auto v = f.get<std::int64_t>("ensemble_folds"))
        c.ensemble_folds = non_negative(*v, "ensemble_folds", f);
    f.reject_unknown();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_text(path);
    } catch (const Error& e) {
        throw Error(ErrorKind::InvalidConfig, std::string("cannot read config: ") + e.what());
    }
    return parse_run_config(text, path.parent_path());
}

PhantomCohortSpec parse_phantom_spec(std::string_view toml_text, const std::filesystem::path& base_dir)
{
    const toml::table table = parse_toml(toml_text, ErrorKind::InvalidSpec);
    TomlFields f(table, ErrorKind::InvalidSpec, base_dir);
    PhantomCohortSpec c;
    PhantomSpec& s = c.base;

    const auto size = [&](const char* key, std::size_t& out) {
        if (auto v = f.get<std::int64_t>(key))
            out = static_cast<std::size_t>(non_negative(*v, key, f));
    };
    const auto real = [&](const char* key, double& out) {
        if (auto v = f.get<double>(key))
            out = *v;
    };
    const auto text = [&](const char* key, std::string& out) {
        if (auto v = f.get<std::string>(key))
            out = *v;
    };

    size("rows", s.rows);
    size("cols", s.cols);
    real("spacing_mm", s.spacing_mm);
    real("center_x_mm", s.center_x_mm);
    real("center_y_mm", s.center_y_mm);
    real("inner_radius_mm", s.inner_radius_mm);
    real("outer_radius_mm", s.outer_radius_mm);
    real("bone_radius_mm", s.bone_radius_mm);
    size("slice_count", s.slice_count);
    real("slice_thickness_mm", s.slice_thickness_mm);
    size("l3_first", s.l3_first);
    size("l3_last", s.l3_last);
    real("noise_sigma_hu", s.noise_sigma_hu);
    size("member_count", s.member_count);
    real("perturb_sigma", s.perturb_sigma);
    if (auto v = f.get<std::int64_t>("band_px"))
        s.band_px = static_cast<int>(non_negative(*v, "band_px", f));
    if (auto v = f.get<std::int64_t>("seed"))
        s.seed = non_negative(*v, "seed", f);
    text("patient_id", s.patient_id);
    text("study_date", s.study_date);
    text("study_description", s.study_description);
    text("series_description", s.series_description);
    real("height_m", s.height_m);

    if (auto p = f.path("output_dir"))
        c.output_dir = *p;
    size("patients", c.patients);
    size("scans_per_patient", c.scans_per_patient);
    if (auto v = f.get<std::int64_t>("days_between_scans"))
        c.days_between_scans = static_cast<int>(*v);
    real("atrophy_mm_per_scan", c.atrophy_mm_per_scan);
    if (auto v = f.get<std::string>("label_format")) {
        if (*v == "nifti")
            c.label_format = LabelFormat::Nifti;
        else if (*v == "json")
            c.label_format = LabelFormat::JsonSidecar;
        else if (*v == "none")
            c.label_format = LabelFormat::None;
        else
            throw f.error("label_format must be nifti, json or none");
    }
    f.reject_unknown();

    if (c.patients == 0 || c.scans_per_patient == 0)
        throw f.error("patients and scans_per_patient must be positive");
    if (c.days_between_scans <= 0)
        throw f.error("days_between_scans must be positive");
    if (!(c.atrophy_mm_per_scan >= 0.0))
        throw f.error("atrophy_mm_per_scan must be >= 0");
    s.validate();
    return c;
}

PhantomCohortSpec load_phantom_spec(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_text(path);
    } catch (const Error& e) {
        throw Error(ErrorKind::InvalidSpec, std::string("cannot read spec: ") + e.what());
    }
    return parse_phantom_spec(text, path.parent_path());
}

namespace {

CalendarDate add_days(const CalendarDate& start, long days)
{
    // Civil-from-days (Howard Hinnant's algorithm).
    long z = start.days_since_epoch() + days + 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const long doe = z - era * 146097;
    const long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const long mp = (5 * doy + 2) / 153;
    const long d = doy - (153 * mp + 2) / 5 + 1;
    const long m = mp < 10 ? mp + 3 : mp - 9;
    const long y = yoe + era * 400 + (m <= 2 ? 1 : 0);
    return {static_cast<int>(y), static_cast<int>(m), static_cast<int>(d)};
}

}  // namespace

std::size_t generate_cohort(const PhantomCohortSpec& cohort)
{
    const CalendarDate first = *CalendarDate::parse(cohort.base.study_date);
    std::string heights = csv_line({"patient_id", "height_m"});
    std::size_t written = 0;
    for (std::size_t p = 0; p < cohort.patients; ++p) {
        PhantomSpec spec = cohort.base;
        char id[32];
        std::snprintf(id, sizeof id, "%s%03zu", cohort.patients > 1 ? "PHANTOM" : "", p + 1);
        if (cohort.patients > 1)
            spec.patient_id = id;
        heights += csv_line({spec.patient_id, format_fixed(spec.height_m, 3)});
        for (std::size_t s = 0; s < cohort.scans_per_patient; ++s) {
            PhantomSpec scan = spec;
            scan.study_date = add_days(first, static_cast<long>(s) * cohort.days_between_scans).dicom();
            scan.outer_radius_mm = spec.outer_radius_mm - cohort.atrophy_mm_per_scan * static_cast<double>(s);
            scan.seed = spec.seed + 7919ULL * p + 104729ULL * s;
            const PhantomStudy study = generate_study(scan);
            PhantomWriteOptions options;
            options.labels = cohort.label_format;
            write_study(study, cohort.output_dir / (scan.patient_id + "_" + scan.study_date), options);
            ++written;
        }
    }
    write_text(cohort.output_dir / "heights.csv", heights);
    return written;
}

}  // namespace bodycomp
