#include "bodycomp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <json.hpp>
#include <map>
#include <thread>

#include "bodycomp/csv.hpp"
#include "bodycomp/flagging.hpp"
#include "bodycomp/mask_fusion.hpp"
#include "bodycomp/nifti.hpp"
#include "bodycomp/pmap.hpp"
#include "bodycomp/preprocess.hpp"
#include "bodycomp/series_catalog.hpp"
#include "bodycomp/vertebra.hpp"

namespace fs = std::filesystem;

namespace bodycomp {

namespace {

bool has_dcm_files(const fs::path& dir)
{
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec))
        if (entry.is_regular_file() && entry.path().extension() == ".dcm")
            return true;
    return false;
}

std::vector<fs::path> dicom_files(const fs::path& study_dir)
{
    const fs::path root = fs::is_directory(study_dir / "dicom") ? study_dir / "dicom" : study_dir;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file() && entry.path().extension() == ".dcm")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<int> load_l3_indices(const fs::path& study_dir, const RunConfig& config, std::size_t slice_count)
{
    if (config.labels_source == LabelsSource::JsonSidecar) {
        const fs::path sidecar = study_dir / "l3.json";
        if (!fs::exists(sidecar))
            throw Error(ErrorKind::LabelAbsent, "no l3.json in " + study_dir.filename().string());
        std::vector<int> indices = read_l3_sidecar(sidecar);
        for (int i : indices)
            if (static_cast<std::size_t>(i) >= slice_count)
                throw Error(ErrorKind::DimensionMismatch, "L3 slice " + std::to_string(i) + " beyond the " +
                                                              std::to_string(slice_count) + "-slice series");
        return indices;
    }
    for (const char* name : {"labels.nii.gz", "labels.nii"}) {
        const fs::path p = study_dir / name;
        if (fs::exists(p))
            return l3_series_indices(read_nifti_labels(p), slice_count);
    }
    throw Error(ErrorKind::LabelAbsent, "no label volume in " + study_dir.filename().string());
}

std::map<std::string, double> load_heights(const std::optional<fs::path>& path)
{
    std::map<std::string, double> heights;
    if (!path)
        return heights;
    const CsvTable table = read_csv(*path, true);
    const auto id_col = table.column("patient_id");
    const auto h_col = table.column("height_m");
    if (!id_col || !h_col)
        throw Error(ErrorKind::InvalidConfig, "heights CSV needs patient_id and height_m columns");
    for (const auto& row : table.rows) {
        if (*id_col >= row.size() || *h_col >= row.size())
            continue;
        const auto h = parse_double(row[*h_col]);
        if (!h)
            throw Error(ErrorKind::InvalidConfig, "bad height for patient " + row[*id_col]);
        heights[row[*id_col]] = *h;
    }
    return heights;
}

std::string scan_key(const std::string& patient, const std::string& date) { return patient + "|" + date; }

std::map<std::string, double> load_corrections(const std::optional<fs::path>& path)
{
    std::map<std::string, double> out;
    if (!path)
        return out;
    const CsvTable table = read_csv(*path, true);
    const auto id_col = table.column("patient_id");
    const auto date_col = table.column("scan_date");
    const auto sma_col = table.column("sma_cm2");
    if (!id_col || !date_col || !sma_col)
        throw Error(ErrorKind::InvalidConfig, "corrections CSV needs patient_id, scan_date and sma_cm2 columns");
    for (const auto& row : table.rows) {
        const auto date = CalendarDate::parse(row.at(*date_col));
        const auto sma = parse_double(row.at(*sma_col));
        if (!date || !sma)
            throw Error(ErrorKind::InvalidConfig, "bad corrections row for patient " + row.at(*id_col));
        out[scan_key(row.at(*id_col), date->iso())] = *sma;
    }
    return out;
}

struct RunContext {
    std::map<std::string, double> heights;
    std::map<std::string, double> corrections;
    std::optional<CalibrationModel> calibration;
};

StudyResult process_with_context(const fs::path& study_dir, const RunConfig& config, const RunContext& ctx)
{
    const std::string study_name = study_dir.filename().string();

    std::vector<CtSlice> slices;
    for (const auto& file : dicom_files(study_dir))
        slices.push_back(read_dicom_file(file));
    if (slices.empty())
        throw Error(ErrorKind::EmptyInput, "no DICOM files in " + study_name);

    const SeriesCatalog catalog = build_catalog(std::move(slices));
    const auto choice = choose_series(catalog, config.series_preference);
    if (!choice)
        throw Error(ErrorKind::NoAxialSeries, "no axial series in " + study_name);
    const SeriesGroup& series = catalog.series[choice->index];
    const SliceHeader& head = series.front_header();

    const L3Range range = make_l3_range(load_l3_indices(study_dir, config, series.slices.size()));
    const int count = static_cast<int>(range.slice_indices.size());
    const int offset = config.slice_mode == SliceMode::MidL3 ? mid_slice_index(count) : end_l3_offset(count);
    const int slice_index = range.slice_indices[static_cast<std::size_t>(offset)];
    const CtSlice& slice = series.slices[static_cast<std::size_t>(slice_index)];
    const PixelSpacing spacing{slice.header.pixel_spacing_row_mm, slice.header.pixel_spacing_col_mm};

    const fs::path pmap_root = study_dir / "pmaps";
    const ProbabilityStack stack = load_stack(pmap_root, head.series_uid, slice_index, config.ensemble_folds);
    if (stack.rows() != slice.header.rows || stack.cols() != slice.header.columns)
        throw Error(ErrorKind::GeometryMismatch, "probability maps do not match slice " + std::to_string(slice_index));
    const FusionResult fused = fuse(stack, spacing);

    double sma = sma_from_mask(fused.mask);
    if (config.area_mode == AreaMode::WindowAverage) {
        std::vector<double> values;
        for (int o : averaging_window(count, offset)) {
            const int idx = range.slice_indices[static_cast<std::size_t>(o)];
            const auto& s = series.slices[static_cast<std::size_t>(idx)];
            values.push_back(sma_from_mask(
                fuse(load_stack(pmap_root, head.series_uid, idx, config.ensemble_folds),
                     PixelSpacing{s.header.pixel_spacing_row_mm, s.header.pixel_spacing_col_mm})
                    .mask));
        }
        sma = average_window_sma(values);
    }

    StudyResult result;
    result.report = compute_report(stack, fused.mask, member_sma(stack, spacing), ctx.calibration);
    const auto metric = result.report.metric(config.uncertainty_metric);
    if (!metric)
        throw Error(ErrorKind::DomainError, config.uncertainty_metric + " is undefined for this slice");

    ManifestRow& row = result.row;
    row.study = study_name;
    row.patient_id = head.patient_id;
    row.scan_date = head.study_date ? head.study_date->iso() : "";
    row.series_number = head.series_number;
    row.slice_number = slice_index;
    row.study_description = head.study_description;
    row.series_description = head.series_description;
    row.series_uid = head.series_uid;
    row.series_choice = std::string(to_string(choice->reason));
    row.uncertainty_metric = config.uncertainty_metric;
    row.uncertainty_value = *metric;
    row.flagged = flag_cases({{study_name, *metric}}, config.uncertainty_threshold, config.uncertainty_metric)
                      .front()
                      .flagged;
    if (auto it = ctx.corrections.find(scan_key(row.patient_id, row.scan_date)); it != ctx.corrections.end()) {
        sma = it->second;
        row.corrected = true;
    }
    row.sma_cm2 = sma;
    if (auto it = ctx.heights.find(row.patient_id); it != ctx.heights.end())
        row.smi = smi(sma, it->second);

    const fs::path out = config.output_root / study_name;
    const ExportedImage mask_img = export_mask(fused.mask, slice.header);
    write_file(out / "mask.png", mask_img.png);
    write_file(out / "mask.dcm", mask_img.dicom);
    const ExportedImage unc_img = export_uncertainty_map(result.report, slice.header);
    write_file(out / "uncertainty.png", unc_img.png);
    write_file(out / "uncertainty.dcm", unc_img.dicom);
    write_file(out / "input.png", export_png(window_hu(slice)));

    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& name : uncertainty_metric_names())
        if (auto v = result.report.metric(name))
            metrics[name] = *v;
    write_text(out / "report.json",
               nlohmann::json{{"slice_number", slice_index}, {"l3_slices", range.slice_indices}, {"metrics", metrics}}
                       .dump(2) +
                   "\n");
    return result;
}

std::string opt_number(const std::optional<double>& v) { return v ? format_fixed(*v, 6) : std::string(); }

}  // namespace

std::vector<fs::path> discover_studies(const fs::path& input_root)
{
    if (!fs::is_directory(input_root))
        throw Error(ErrorKind::NoStudiesFound, "input root " + input_root.string() + " is not a directory");
    std::vector<fs::path> studies;
    for (const auto& entry : fs::directory_iterator(input_root))
        if (entry.is_directory() && (fs::is_directory(entry.path() / "dicom") || has_dcm_files(entry.path())))
            studies.push_back(entry.path());
    std::sort(studies.begin(), studies.end());
    return studies;
}

StudyResult process_study(const fs::path& study_dir, const RunConfig& config,
                          const std::optional<CalibrationModel>& calibration)
{
    RunContext ctx;
    ctx.heights = load_heights(config.heights_csv);
    ctx.corrections = load_corrections(config.corrections);
    ctx.calibration = calibration;
    return process_with_context(study_dir, config, ctx);
}

PipelineResult run_pipeline(const RunConfig& config)
{
    const auto studies = discover_studies(config.input_root);
    if (studies.empty())
        throw Error(ErrorKind::NoStudiesFound, "no study directories under " + config.input_root.string());

    RunContext ctx;
    ctx.heights = load_heights(config.heights_csv);
    ctx.corrections = load_corrections(config.corrections);
    if (config.calibration_model)
        ctx.calibration = load_calibration(*config.calibration_model);
    if (config.uncertainty_metric == "avg_calibrated_probability" && !ctx.calibration)
        throw Error(ErrorKind::InvalidConfig, "avg_calibrated_probability needs a calibration_model");

    std::vector<std::optional<ManifestRow>> rows(studies.size());
    std::vector<std::optional<StudyError>> errors(studies.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < studies.size(); i = next++) {
            const std::string name = studies[i].filename().string();
            try {
                rows[i] = process_with_context(studies[i], config, ctx).row;
            } catch (const Error& e) {
                errors[i] = StudyError{name, e.kind(), e.what()};
            } catch (const std::filesystem::filesystem_error& e) {
                errors[i] = StudyError{name, ErrorKind::IoError, e.what()};
            } catch (const std::exception& e) {
                errors[i] = StudyError{name, ErrorKind::MalformedData, e.what()};
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(studies.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    PipelineResult result;
    std::vector<FlagDecision> decisions;
    for (std::size_t i = 0; i < studies.size(); ++i) {
        if (rows[i]) {
            result.manifest.push_back(*rows[i]);
            decisions.push_back({rows[i]->study, rows[i]->uncertainty_metric, rows[i]->uncertainty_value,
                                 config.uncertainty_threshold, rows[i]->flagged});
        }
        if (errors[i])
            result.errors.push_back(*errors[i]);
    }
    write_text(config.output_root / "manifest.csv", manifest_csv(result.manifest));
    write_text(config.output_root / "flags.csv", flag_report_csv(decisions));
    write_text(config.output_root / "errors.csv", errors_csv(result.errors));
    result.exit_code = result.errors.empty() ? 0 : 2;
    return result;
}

namespace {

const std::vector<std::string> kManifestColumns = {
    "study",          "patient_id",        "scan_date",          "series_number",      "slice_number",
    "sma_cm2",        "smi",               "uncertainty_metric", "uncertainty_value",  "flagged",
    "corrected",      "study_description", "series_description", "series_uid",         "series_choice",
};

}  // namespace

std::string manifest_csv(const std::vector<ManifestRow>& rows)
{
    std::string out = csv_line(kManifestColumns);
    for (const auto& r : rows)
        out += csv_line({r.study, r.patient_id, r.scan_date, r.series_number ? std::to_string(*r.series_number) : "",
                         std::to_string(r.slice_number), format_fixed(r.sma_cm2, 6), opt_number(r.smi),
                         r.uncertainty_metric, format_fixed(r.uncertainty_value, 9), r.flagged ? "true" : "false",
                         r.corrected ? "true" : "false", r.study_description, r.series_description, r.series_uid,
                         r.series_choice});
    return out;
}

std::vector<ManifestRow> read_manifest(const fs::path& path)
{
    const CsvTable table = read_csv(path, true);
    std::vector<std::size_t> col;
    for (const auto& name : kManifestColumns) {
        const auto c = table.column(name);
        if (!c)
            throw Error(ErrorKind::MalformedData, "manifest lacks column " + name);
        col.push_back(*c);
    }
    std::vector<ManifestRow> rows;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& cells = table.rows[i];
        const auto cell = [&](std::size_t k) -> const std::string& {
            if (col[k] >= cells.size())
                throw Error(ErrorKind::MalformedData, "manifest line " + std::to_string(i + 2) + " is short");
            return cells[col[k]];
        };
        const auto number = [&](std::size_t k) {
            const auto v = parse_double(cell(k));
            if (!v)
                throw Error(ErrorKind::MalformedData, "manifest line " + std::to_string(i + 2) + ": bad " +
                                                          kManifestColumns[k]);
            return *v;
        };
        ManifestRow r;
        r.study = cell(0);
        r.patient_id = cell(1);
        r.scan_date = cell(2);
        if (!cell(3).empty())
            r.series_number = static_cast<int>(number(3));
        r.slice_number = static_cast<int>(number(4));
        r.sma_cm2 = number(5);
        if (!cell(6).empty())
            r.smi = number(6);
        r.uncertainty_metric = cell(7);
        r.uncertainty_value = number(8);
        r.flagged = cell(9) == "true";
        r.corrected = cell(10) == "true";
        r.study_description = cell(11);
        r.series_description = cell(12);
        r.series_uid = cell(13);
        r.series_choice = cell(14);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string errors_csv(const std::vector<StudyError>& errors)
{
    std::string out = csv_line({"study", "error_kind", "message"});
    for (const auto& e : errors)
        out += csv_line({e.study, std::string(to_string(e.kind)), e.message});
    return out;
}

}  // namespace bodycomp
