#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bodycomp/dicom.hpp"
#include "bodycomp/grid.hpp"

namespace bodycomp {

enum class StackLayout { FlatEnsemble, TwoLevel };

/// Per-pixel muscle probabilities from N ensemble members, or M stochastic passes x K folds.
class ProbabilityStack {
public:
    /// Throws DimensionMismatch (ragged dims), DomainError (value outside [0,1]), EmptyInput.
    static ProbabilityStack flat(std::vector<Grid<float>> maps);
    /// `iterations[m][k]` is fold k at pass m. Throws RaggedStack on unequal fold counts.
    static ProbabilityStack two_level(std::vector<std::vector<Grid<float>>> iterations);

    StackLayout layout() const noexcept { return layout_; }
    std::size_t member_count() const noexcept { return maps_.size(); }
    std::size_t iterations() const noexcept { return iterations_; }
    std::size_t folds() const noexcept { return folds_; }
    std::size_t rows() const noexcept { return maps_.front().rows(); }
    std::size_t cols() const noexcept { return maps_.front().cols(); }
    std::size_t pixel_count() const noexcept { return maps_.front().size(); }

    /// All maps, iteration-major for two-level stacks.
    const std::vector<Grid<float>>& maps() const noexcept { return maps_; }
    const Grid<float>& map(std::size_t iteration, std::size_t fold) const { return maps_[iteration * folds_ + fold]; }

private:
    ProbabilityStack() = default;
    static void validate(const std::vector<Grid<float>>& maps);

    std::vector<Grid<float>> maps_;
    StackLayout layout_ = StackLayout::FlatEnsemble;
    std::size_t iterations_ = 1;
    std::size_t folds_ = 0;
};

struct PixelSpacing {
    double row_mm = 0.0;
    double col_mm = 0.0;
};

struct MuscleMask {
    Grid<std::uint8_t> pixels;  // 0 or 1
    std::size_t pixel_count = 0;
    std::optional<PixelSpacing> spacing;

    static MuscleMask from_pixels(Grid<std::uint8_t> pixels, std::optional<PixelSpacing> spacing = std::nullopt);
    /// Pixels strictly greater than `threshold`.
    static MuscleMask threshold(const Grid<double>& probability, double threshold,
                                std::optional<PixelSpacing> spacing = std::nullopt);
};

struct SegmentationReport {
    double dice_pct = 0.0;
    double jaccard_pct = 0.0;
    std::int64_t true_positive = 0;
    std::int64_t false_positive = 0;
    std::int64_t false_negative = 0;
    std::int64_t pred_count = 0;
    std::int64_t ref_count = 0;
    /// Absent when the reference is empty.
    std::optional<double> area_diff_pct;
    std::optional<double> sma_cm2;
    std::optional<double> smi;
};

struct FusionResult {
    Grid<double> mean_map;
    MuscleMask mask;
};

struct TwoLevelFusion {
    std::vector<Grid<double>> iteration_means;
    Grid<double> final_map;
    MuscleMask mask;
};

inline constexpr double kFusionThreshold = 0.5;

FusionResult fuse_mean_threshold(const ProbabilityStack& stack, std::optional<PixelSpacing> spacing = std::nullopt);
TwoLevelFusion fuse_two_level(const ProbabilityStack& stack, std::optional<PixelSpacing> spacing = std::nullopt);

/// The maps that count as "members" for dispersion metrics: the raw maps of a flat
/// ensemble or the per-iteration fold means of a two-level stack.
std::vector<Grid<double>> dispersion_members(const ProbabilityStack& stack);

/// Fused mask for either layout.
FusionResult fuse(const ProbabilityStack& stack, std::optional<PixelSpacing> spacing = std::nullopt);

/// Signed percentage difference with the reference in the denominator. Throws EmptyReference.
double area_difference_pct(std::int64_t pred_count, std::int64_t ref_count);

/// Dice/Jaccard/area difference from pixel bookkeeping alone (TP = pred - FP).
SegmentationReport metrics_from_counts(std::int64_t pred_count, std::int64_t ref_count, std::int64_t false_positive,
                                       std::int64_t false_negative);

/// Throws DimensionMismatch.
SegmentationReport mask_metrics(const MuscleMask& pred, const MuscleMask& ref);

/// pixel_count x row_mm x col_mm / 100. Throws MissingSpacing.
double sma_from_mask(const MuscleMask& mask);

/// SMA / height^2 in cm^2/m^2. Throws HeightOutOfRange outside (0.5, 2.5) m.
double smi(double sma_cm2, double height_m);

/// Throws EmptyWindow.
double average_window_sma(const std::vector<double>& sma_values);

/// SMA of each dispersion member thresholded on its own.
std::vector<double> member_sma(const ProbabilityStack& stack, const PixelSpacing& spacing);

struct ExportedImage {
    Bytes png;
    Bytes dicom;
};

/// Binary 0/255 PNG and 8-bit DICOM on the template geometry. Throws GeometryMismatch.
ExportedImage export_mask(const MuscleMask& mask, const SliceHeader& template_header);

}  // namespace bodycomp
