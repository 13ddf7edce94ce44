#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bodycomp/pipeline.hpp"

namespace bodycomp {

struct LongitudinalPoint {
    std::string patient_id;
    std::string scan_date;  // ISO
    double sma_cm2 = 0.0;
    std::optional<double> smi;
};

struct LongitudinalOutput {
    /// Per patient, ascending by date (rows without a parsable date are dropped).
    std::map<std::string, std::vector<LongitudinalPoint>> series;
    std::string csv;
    std::string svg;
};

/// `status` maps patient id to group (e.g. cachexia status); patients without one land in
/// "unassigned". An empty `patients` list means every patient in `rows`.
/// Throws UnknownPatient when a requested patient has no row.
LongitudinalOutput emit_longitudinal(const std::vector<ManifestRow>& rows,
                                     const std::map<std::string, std::string>& status = {},
                                     const std::vector<std::string>& patients = {});

/// `patient_id,status` CSV.
std::map<std::string, std::string> read_status_csv(const std::filesystem::path& path);

}  // namespace bodycomp
