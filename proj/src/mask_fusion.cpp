#include "bodycomp/mask_fusion.hpp"

#include <algorithm>
#include <cmath>

#include "bodycomp/error.hpp"
#include "bodycomp/png_codec.hpp"

namespace bodycomp {

void ProbabilityStack::validate(const std::vector<Grid<float>>& maps)
{
    if (maps.empty())
        throw Error(ErrorKind::EmptyInput, "probability stack needs at least one map");
    for (const auto& m : maps) {
        if (!m.same_shape(maps.front()) || m.empty())
            throw Error(ErrorKind::DimensionMismatch, "probability maps differ in size");
        for (float v : m)
            if (!(v >= 0.0f && v <= 1.0f))
                throw Error(ErrorKind::DomainError, "probability outside [0,1]");
    }
}

ProbabilityStack ProbabilityStack::flat(std::vector<Grid<float>> maps)
{
    validate(maps);
    ProbabilityStack s;
    s.folds_ = maps.size();
    s.iterations_ = 1;
    s.layout_ = StackLayout::FlatEnsemble;
    s.maps_ = std::move(maps);
    return s;
}

ProbabilityStack ProbabilityStack::two_level(std::vector<std::vector<Grid<float>>> iterations)
{
    if (iterations.empty() || iterations.front().empty())
        throw Error(ErrorKind::EmptyInput, "two-level stack needs at least one iteration and fold");
    const std::size_t folds = iterations.front().size();
    std::vector<Grid<float>> maps;
    for (auto& it : iterations) {
        if (it.size() != folds)
            throw Error(ErrorKind::RaggedStack, "iterations have unequal fold counts");
        for (auto& m : it)
            maps.push_back(std::move(m));
    }
    validate(maps);
    ProbabilityStack s;
    s.iterations_ = iterations.size();
    s.folds_ = folds;
    s.layout_ = StackLayout::TwoLevel;
    s.maps_ = std::move(maps);
    return s;
}

MuscleMask MuscleMask::from_pixels(Grid<std::uint8_t> pixels, std::optional<PixelSpacing> spacing)
{
    MuscleMask m;
    for (auto& v : pixels) {
        v = v ? 1 : 0;
        m.pixel_count += v;
    }
    m.pixels = std::move(pixels);
    m.spacing = spacing;
    return m;
}

MuscleMask MuscleMask::threshold(const Grid<double>& probability, double threshold, std::optional<PixelSpacing> spacing)
{
    Grid<std::uint8_t> pixels(probability.rows(), probability.cols());
    for (std::size_t i = 0; i < probability.size(); ++i)
        pixels[i] = probability[i] > threshold ? 1 : 0;
    return from_pixels(std::move(pixels), spacing);
}

namespace {

Grid<double> mean_of(const std::vector<const Grid<float>*>& maps)
{
    Grid<double> mean(maps.front()->rows(), maps.front()->cols(), 0.0);
    for (const auto* m : maps)
        for (std::size_t i = 0; i < mean.size(); ++i)
            mean[i] += (*m)[i];
    const double n = static_cast<double>(maps.size());
    for (double& v : mean)
        v /= n;
    return mean;
}

}  // namespace

FusionResult fuse_mean_threshold(const ProbabilityStack& stack, std::optional<PixelSpacing> spacing)
{
    if (stack.layout() != StackLayout::FlatEnsemble)
        throw Error(ErrorKind::LayoutMismatch, "fuse_mean_threshold expects a flat ensemble");
    std::vector<const Grid<float>*> maps;
    for (const auto& m : stack.maps())
        maps.push_back(&m);
    FusionResult out;
    out.mean_map = mean_of(maps);
    out.mask = MuscleMask::threshold(out.mean_map, kFusionThreshold, spacing);
    return out;
}

TwoLevelFusion fuse_two_level(const ProbabilityStack& stack, std::optional<PixelSpacing> spacing)
{
    if (stack.layout() != StackLayout::TwoLevel)
        throw Error(ErrorKind::LayoutMismatch, "fuse_two_level expects a two-level stack");
    TwoLevelFusion out;
    for (std::size_t m = 0; m < stack.iterations(); ++m) {
        std::vector<const Grid<float>*> folds;
        for (std::size_t k = 0; k < stack.folds(); ++k)
            folds.push_back(&stack.map(m, k));
        out.iteration_means.push_back(mean_of(folds));
    }
    out.final_map = Grid<double>(stack.rows(), stack.cols(), 0.0);
    for (const auto& it : out.iteration_means)
        for (std::size_t i = 0; i < it.size(); ++i)
            out.final_map[i] += it[i];
    for (double& v : out.final_map)
        v /= static_cast<double>(out.iteration_means.size());
    out.mask = MuscleMask::threshold(out.final_map, kFusionThreshold, spacing);
    return out;
}

FusionResult fuse(const ProbabilityStack& stack, std::optional<PixelSpacing> spacing)
{
    if (stack.layout() == StackLayout::FlatEnsemble)
        return fuse_mean_threshold(stack, spacing);
    TwoLevelFusion two = fuse_two_level(stack, spacing);
    return {std::move(two.final_map), std::move(two.mask)};
}

std::vector<Grid<double>> dispersion_members(const ProbabilityStack& stack)
{
    if (stack.layout() == StackLayout::TwoLevel)
        return fuse_two_level(stack).iteration_means;
    std::vector<Grid<double>> out;
    out.reserve(stack.member_count());
    for (const auto& m : stack.maps())
        out.emplace_back(m.rows(), m.cols(), std::vector<double>(m.begin(), m.end()));
    return out;
}

double area_difference_pct(std::int64_t pred_count, std::int64_t ref_count)
{
    if (ref_count <= 0)
        throw Error(ErrorKind::EmptyReference, "reference mask is empty");
    return 100.0 * static_cast<double>(pred_count - ref_count) / static_cast<double>(ref_count);
}

SegmentationReport metrics_from_counts(std::int64_t pred_count, std::int64_t ref_count, std::int64_t false_positive,
                                       std::int64_t false_negative)
{
    SegmentationReport r;
    r.pred_count = pred_count;
    r.ref_count = ref_count;
    r.false_positive = false_positive;
    r.false_negative = false_negative;
    r.true_positive = pred_count - false_positive;
    const double tp = static_cast<double>(r.true_positive);
    const double fp = static_cast<double>(false_positive);
    const double fn = static_cast<double>(false_negative);
    if (tp + fp + fn == 0.0) {
        r.dice_pct = 100.0;
        r.jaccard_pct = 100.0;
    } else {
        r.dice_pct = 100.0 * 2.0 * tp / (2.0 * tp + fp + fn);
        r.jaccard_pct = 100.0 * tp / (tp + fp + fn);
    }
    if (ref_count > 0)
        r.area_diff_pct = area_difference_pct(pred_count, ref_count);
    return r;
}

SegmentationReport mask_metrics(const MuscleMask& pred, const MuscleMask& ref)
{
    if (!pred.pixels.same_shape(ref.pixels))
        throw Error(ErrorKind::DimensionMismatch, "masks differ in size");
    std::int64_t fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
        const bool p = pred.pixels[i] != 0, q = ref.pixels[i] != 0;
        fp += p && !q;
        fn += !p && q;
    }
    SegmentationReport r = metrics_from_counts(static_cast<std::int64_t>(pred.pixel_count),
                                               static_cast<std::int64_t>(ref.pixel_count), fp, fn);
    if (pred.spacing)
        r.sma_cm2 = sma_from_mask(pred);
    return r;
}

double sma_from_mask(const MuscleMask& mask)
{
    if (!mask.spacing)
        throw Error(ErrorKind::MissingSpacing, "mask has no pixel spacing");
    return static_cast<double>(mask.pixel_count) * mask.spacing->row_mm * mask.spacing->col_mm / 100.0;
}

double smi(double sma_cm2, double height_m)
{
    if (!(height_m > 0.5 && height_m < 2.5))
        throw Error(ErrorKind::HeightOutOfRange, "height " + std::to_string(height_m) + " m");
    return sma_cm2 / (height_m * height_m);
}

double average_window_sma(const std::vector<double>& sma_values)
{
    if (sma_values.empty())
        throw Error(ErrorKind::EmptyWindow, "no slices in the averaging window");
    double sum = 0.0;
    for (double v : sma_values)
        sum += v;
    return sum / static_cast<double>(sma_values.size());
}

std::vector<double> member_sma(const ProbabilityStack& stack, const PixelSpacing& spacing)
{
    std::vector<double> out;
    for (const auto& member : dispersion_members(stack))
        out.push_back(sma_from_mask(MuscleMask::threshold(member, kFusionThreshold, spacing)));
    return out;
}

ExportedImage export_mask(const MuscleMask& mask, const SliceHeader& template_header)
{
    if (mask.pixels.rows() != template_header.rows || mask.pixels.cols() != template_header.columns)
        throw Error(ErrorKind::GeometryMismatch, "mask does not match template geometry");
    Grid<std::uint8_t> gray(mask.pixels.rows(), mask.pixels.cols());
    for (std::size_t i = 0; i < gray.size(); ++i)
        gray[i] = mask.pixels[i] ? 255 : 0;
    return {encode_png_gray8(gray), serialize_derived_image(gray, template_header, "skeletal muscle mask")};
}

}  // namespace bodycomp
