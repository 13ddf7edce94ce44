#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "bodycomp/phantom.hpp"

namespace bodycomp {

enum class LabelsSource { Nifti, JsonSidecar };
enum class SliceMode { MidL3, EndL3 };
enum class AreaMode { Single, WindowAverage };

struct RunConfig {
    std::filesystem::path input_root;
    std::filesystem::path output_root;
    LabelsSource labels_source = LabelsSource::Nifti;
    SliceMode slice_mode = SliceMode::MidL3;
    AreaMode area_mode = AreaMode::Single;
    std::string uncertainty_metric = "avg_variance";
    double uncertainty_threshold = 0.01;
    std::string series_preference = "venous";
    std::optional<std::filesystem::path> calibration_model;
    /// `patient_id,height_m`; SMI is left empty for patients without a height.
    std::optional<std::filesystem::path> heights_csv;
    /// `patient_id,scan_date,sma_cm2` reviewed values that override the computed SMA.
    std::optional<std::filesystem::path> corrections;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    /// > 0 reads each slice's maps as passes x folds and fuses in two levels.
    std::size_t ensemble_folds = 0;
};

std::string to_string(LabelsSource v);
std::string to_string(SliceMode v);
std::string to_string(AreaMode v);

/// Flat TOML document; relative paths resolve against the file's directory.
/// Unknown keys and bad enumerations throw InvalidConfig.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir = {});

/// Several patients, each scanned repeatedly with a shrinking outer radius.
struct PhantomCohortSpec {
    PhantomSpec base;
    std::filesystem::path output_dir = "phantoms";
    std::size_t patients = 1;
    std::size_t scans_per_patient = 1;
    int days_between_scans = 90;
    double atrophy_mm_per_scan = 0.0;
    LabelFormat label_format = LabelFormat::Nifti;
};

/// Throws InvalidSpec.
PhantomCohortSpec load_phantom_spec(const std::filesystem::path& path);
PhantomCohortSpec parse_phantom_spec(std::string_view toml_text, const std::filesystem::path& base_dir = {});

/// Writes one study directory per scan plus `heights.csv`; returns the number of studies.
std::size_t generate_cohort(const PhantomCohortSpec& cohort);

}  // namespace bodycomp
