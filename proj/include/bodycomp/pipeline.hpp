#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bodycomp/config.hpp"
#include "bodycomp/error.hpp"
#include "bodycomp/uncertainty.hpp"

namespace bodycomp {

struct ManifestRow {
    std::string study;  // study directory name
    std::string patient_id;
    std::string scan_date;  // ISO, empty when the series carries no date
    std::optional<int> series_number;
    /// 0-based index of the measured slice in the sorted series.
    int slice_number = 0;
    double sma_cm2 = 0.0;
    std::optional<double> smi;
    std::string uncertainty_metric;
    double uncertainty_value = 0.0;
    bool flagged = false;
    bool corrected = false;
    std::string study_description;
    std::string series_description;
    std::string series_uid;
    std::string series_choice;
};

struct StudyError {
    std::string study;
    ErrorKind kind = ErrorKind::IoError;
    std::string message;
};

struct StudyResult {
    ManifestRow row;
    UncertaintyReport report;
};

struct PipelineResult {
    std::vector<ManifestRow> manifest;  // sorted by study directory name
    std::vector<StudyError> errors;
    int exit_code = 0;  // 0 all good, 2 some studies failed
};

/// Study directories directly under `input_root` (those holding a `dicom/` folder or .dcm files), sorted.
std::vector<std::filesystem::path> discover_studies(const std::filesystem::path& input_root);

/// Runs one study end to end and writes its images under `<output_root>/<study>/`.
StudyResult process_study(const std::filesystem::path& study_dir, const RunConfig& config,
                          const std::optional<CalibrationModel>& calibration = std::nullopt);

/// Processes every study with `config.workers` threads and writes manifest.csv, flags.csv and
/// errors.csv. Throws NoStudiesFound and InvalidConfig; per-study failures land in errors.csv.
PipelineResult run_pipeline(const RunConfig& config);

std::string manifest_csv(const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
std::string errors_csv(const std::vector<StudyError>& errors);

}  // namespace bodycomp
