#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bodycomp/dicom.hpp"
#include "bodycomp/mask_fusion.hpp"
#include "bodycomp/nifti.hpp"

namespace bodycomp {

struct PhantomSpec {
    std::size_t rows = 256;
    std::size_t cols = 256;
    double spacing_mm = 0.8;
    /// Annulus centre in mm from the first pixel centre; negative means the image centre.
    double center_x_mm = -1.0;
    double center_y_mm = -1.0;
    double inner_radius_mm = 40.0;
    double outer_radius_mm = 60.0;
    double bone_radius_mm = 15.0;
    std::size_t slice_count = 40;
    double slice_thickness_mm = 2.5;
    std::size_t l3_first = 10;
    std::size_t l3_last = 22;  // inclusive
    double noise_sigma_hu = 0.0;
    std::size_t member_count = 5;
    double perturb_sigma = 0.0;
    int band_px = 3;
    std::uint64_t seed = 1;

    std::string patient_id = "PHANTOM001";
    std::string study_date = "20200101";
    std::string study_description = "CT ABDOMEN PELVIS W CONTRAST";
    std::string series_description = "AXIAL VENOUS 2.5MM";
    double height_m = 1.75;

    /// Throws InvalidSpec.
    void validate() const;
};

inline constexpr double kPhantomMuscleHu = 60.0;
inline constexpr double kPhantomBackgroundHu = -100.0;
inline constexpr double kPhantomBoneHu = 800.0;

struct PhantomStudy {
    PhantomSpec spec;
    std::vector<CtSlice> slices;  // ascending slice index, inferior to superior
    LabelVolume labels;
    std::vector<int> l3_slices;
    MuscleMask reference;  // noiseless annulus rasterisation, same on every slice
    double analytic_sma_cm2 = 0.0;
    double rasterized_sma_cm2 = 0.0;
    /// Probability ensembles for every L3 slice, keyed by slice index.
    std::map<int, ProbabilityStack> stacks;
};

/// pi (r_out^2 - r_in^2) / 100.
double analytic_annulus_sma_cm2(double inner_radius_mm, double outer_radius_mm);

/// Pixels whose centre lies at r_in <= d < r_out from the annulus centre.
MuscleMask rasterize_annulus(const PhantomSpec& spec);

/// Members are clamp(mask + sigma (2 s xi(x) + eps_k(x)), 0, 1) inside a band of `band_px`
/// pixels around the mask boundary and the crisp mask elsewhere. s = +-1 is drawn once per call,
/// xi(x) ~ |N(0,1)| is shared by all members, eps_k(x) ~ N(0,1) is independent per member.
ProbabilityStack generate_prob_maps(const MuscleMask& reference, std::size_t member_count, double perturb_sigma,
                                    std::uint64_t seed, int band_px = 3);

/// Squared Euclidean distance (in pixels) from each pixel to the nearest pixel where `feature` is set.
Grid<double> squared_distance_transform(const Grid<std::uint8_t>& feature);

PhantomStudy generate_study(const PhantomSpec& spec);

enum class LabelFormat { Nifti, JsonSidecar, None };

struct PhantomWriteOptions {
    LabelFormat labels = LabelFormat::Nifti;
    TransferSyntax syntax = TransferSyntax::ExplicitVrLittleEndian;
    bool gzip_labels = true;
};

/// `<dir>/dicom/IM0001.dcm...`, `<dir>/labels.nii.gz` or `<dir>/l3.json`,
/// `<dir>/pmaps/<series_uid>/<slice>/<member>.pmap`, `<dir>/ground_truth.json`.
void write_study(const PhantomStudy& study, const std::filesystem::path& dir, const PhantomWriteOptions& options = {});

}  // namespace bodycomp
