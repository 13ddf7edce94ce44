#include "bodycomp/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <random>

#include "bodycomp/bytes.hpp"
#include "bodycomp/error.hpp"
#include "bodycomp/pmap.hpp"

namespace bodycomp {

namespace {

double center_x(const PhantomSpec& s)
{
    return s.center_x_mm >= 0.0 ? s.center_x_mm : 0.5 * static_cast<double>(s.cols - 1) * s.spacing_mm;
}

double center_y(const PhantomSpec& s)
{
    return s.center_y_mm >= 0.0 ? s.center_y_mm : 0.5 * static_cast<double>(s.rows - 1) * s.spacing_mm;
}

double radius_at(const PhantomSpec& s, std::size_t r, std::size_t c)
{
    const double dx = static_cast<double>(c) * s.spacing_mm - center_x(s);
    const double dy = static_cast<double>(r) * s.spacing_mm - center_y(s);
    return std::hypot(dx, dy);
}

}  // namespace

void PhantomSpec::validate() const
{
    const auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidSpec, m); };
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096)
        fail("image size must be within 1..4096");
    if (!(spacing_mm > 0.0) || !(slice_thickness_mm > 0.0))
        fail("spacing and slice thickness must be positive");
    if (!(inner_radius_mm > 0.0 && inner_radius_mm < outer_radius_mm))
        fail("annulus radii must satisfy 0 < inner < outer");
    if (!(bone_radius_mm >= 0.0 && bone_radius_mm <= inner_radius_mm))
        fail("bone disc must fit inside the annulus interior");
    const double cx = center_x(*this), cy = center_y(*this);
    const double wx = static_cast<double>(cols - 1) * spacing_mm, wy = static_cast<double>(rows - 1) * spacing_mm;
    if (cx - outer_radius_mm < 0.0 || cy - outer_radius_mm < 0.0 || cx + outer_radius_mm > wx ||
        cy + outer_radius_mm > wy)
        fail("annulus does not fit inside the image");
    if (slice_count == 0 || l3_first > l3_last || l3_last >= slice_count)
        fail("l3 range must be an ordered interval inside the slice count");
    if (!(noise_sigma_hu >= 0.0) || !(perturb_sigma >= 0.0))
        fail("noise and perturbation sigmas must be >= 0");
    if (member_count == 0)
        fail("ensemble needs at least one member");
    if (band_px < 0)
        fail("band width must be >= 0");
    if (!(height_m > 0.5 && height_m < 2.5))
        fail("height must lie in (0.5, 2.5) m");
    if (!CalendarDate::parse(study_date))
        fail("study_date is not a date: " + study_date);
}

double analytic_annulus_sma_cm2(double inner_radius_mm, double outer_radius_mm)
{
    return std::numbers::pi * (outer_radius_mm * outer_radius_mm - inner_radius_mm * inner_radius_mm) / 100.0;
}

MuscleMask rasterize_annulus(const PhantomSpec& spec)
{
    Grid<std::uint8_t> pixels(spec.rows, spec.cols, 0);
    for (std::size_t r = 0; r < spec.rows; ++r)
        for (std::size_t c = 0; c < spec.cols; ++c) {
            const double d = radius_at(spec, r, c);
            pixels(r, c) = d >= spec.inner_radius_mm && d < spec.outer_radius_mm ? 1 : 0;
        }
    return MuscleMask::from_pixels(std::move(pixels), PixelSpacing{spec.spacing_mm, spec.spacing_mm});
}

namespace {

// Felzenszwalb-Huttenlocher lower envelope of parabolas, one line at a time.
void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z)
{
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[static_cast<std::size_t>(q)] == inf)
            continue;
        double s = 0.0;
        while (k >= 0) {
            const int p = v[static_cast<std::size_t>(k)];
            s = ((f[static_cast<std::size_t>(q)] + q * q) - (f[static_cast<std::size_t>(p)] + p * p)) / (2.0 * (q - p));
            if (s > z[static_cast<std::size_t>(k)])
                break;
            --k;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = k == 0 ? -inf : s;
        z[static_cast<std::size_t>(k) + 1] = inf;
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(j) + 1] < q)
            ++j;
        const int p = v[static_cast<std::size_t>(j)];
        d[static_cast<std::size_t>(q)] = (q - p) * (q - p) + f[static_cast<std::size_t>(p)];
    }
}

}  // namespace

Grid<double> squared_distance_transform(const Grid<std::uint8_t>& feature)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    const std::size_t rows = feature.rows(), cols = feature.cols();
    Grid<double> out(rows, cols, inf);
    const std::size_t n = std::max(rows, cols);
    std::vector<double> f, d;
    std::vector<int> v(n);
    std::vector<double> z(n + 1);

    for (std::size_t c = 0; c < cols; ++c) {
        f.assign(rows, inf);
        d.assign(rows, inf);
        for (std::size_t r = 0; r < rows; ++r)
            if (feature(r, c))
                f[r] = 0.0;
        distance_1d(f, d, v, z);
        for (std::size_t r = 0; r < rows; ++r)
            out(r, c) = d[r];
    }
    for (std::size_t r = 0; r < rows; ++r) {
        f.assign(cols, inf);
        d.assign(cols, inf);
        for (std::size_t c = 0; c < cols; ++c)
            f[c] = out(r, c);
        distance_1d(f, d, v, z);
        for (std::size_t c = 0; c < cols; ++c)
            out(r, c) = d[c];
    }
    return out;
}

ProbabilityStack generate_prob_maps(const MuscleMask& reference, std::size_t member_count, double perturb_sigma,
                                    std::uint64_t seed, int band_px)
{
    if (!(perturb_sigma >= 0.0))
        throw Error(ErrorKind::InvalidSpec, "perturbation sigma must be >= 0");
    if (member_count == 0)
        throw Error(ErrorKind::InvalidSpec, "ensemble needs at least one member");
    const auto& mask = reference.pixels;
    std::vector<Grid<float>> members(member_count, Grid<float>(mask.rows(), mask.cols(), 0.0f));
    for (auto& m : members)
        for (std::size_t i = 0; i < mask.size(); ++i)
            m[i] = mask[i] ? 1.0f : 0.0f;
    if (perturb_sigma == 0.0 || band_px == 0 || mask.empty())
        return ProbabilityStack::flat(std::move(members));

    // Distance from a foreground pixel to the nearest background pixel and vice versa.
    Grid<std::uint8_t> background(mask.rows(), mask.cols(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        background[i] = mask[i] ? 0 : 1;
    const Grid<double> to_foreground = squared_distance_transform(mask);
    const Grid<double> to_background = squared_distance_transform(background);
    const double band_sq = static_cast<double>(band_px) * band_px;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double dist = mask[i] ? to_background[i] : to_foreground[i];
        if (!(dist <= band_sq))
            continue;
        const double base = mask[i] ? 1.0 : 0.0;
        const double drift = 2.0 * sign * std::abs(normal(rng));
        for (auto& m : members) {
            const double p = base + perturb_sigma * (drift + normal(rng));
            m[i] = static_cast<float>(std::clamp(p, 0.0, 1.0));
        }
    }
    return ProbabilityStack::flat(std::move(members));
}

PhantomStudy generate_study(const PhantomSpec& spec)
{
    spec.validate();
    PhantomStudy study;
    study.spec = spec;
    study.reference = rasterize_annulus(spec);
    study.analytic_sma_cm2 = analytic_annulus_sma_cm2(spec.inner_radius_mm, spec.outer_radius_mm);
    study.rasterized_sma_cm2 = sma_from_mask(study.reference);

    const std::string seed_text = spec.patient_id + "/" + spec.study_date + "/" + std::to_string(spec.seed);
    SliceHeader header;
    header.patient_id = spec.patient_id;
    header.study_uid = derived_uid("study/" + seed_text);
    header.series_uid = derived_uid("series/" + seed_text);
    header.frame_of_reference_uid = derived_uid("for/" + seed_text);
    header.series_number = 3;
    header.acquisition_number = 1;
    header.study_date = CalendarDate::parse(spec.study_date);
    header.series_description = spec.series_description;
    header.study_description = spec.study_description;
    header.rows = static_cast<std::uint16_t>(spec.rows);
    header.columns = static_cast<std::uint16_t>(spec.cols);
    header.pixel_spacing_row_mm = spec.spacing_mm;
    header.pixel_spacing_col_mm = spec.spacing_mm;
    header.slice_thickness_mm = spec.slice_thickness_mm;
    header.spacing_between_slices_mm = spec.slice_thickness_mm;
    header.image_orientation = {1, 0, 0, 0, 1, 0};
    header.rescale_slope = 1.0;
    header.rescale_intercept = -1024.0;
    header.bits_allocated = 16;
    header.signed_pixels = false;

    // Noiseless HU phantom, identical on every slice.
    Grid<double> clean(spec.rows, spec.cols, kPhantomBackgroundHu);
    for (std::size_t r = 0; r < spec.rows; ++r)
        for (std::size_t c = 0; c < spec.cols; ++c) {
            const double d = radius_at(spec, r, c);
            if (study.reference.pixels(r, c))
                clean(r, c) = kPhantomMuscleHu;
            else if (d < spec.bone_radius_mm)
                clean(r, c) = kPhantomBoneHu;
        }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t z = 0; z < spec.slice_count; ++z) {
        CtSlice slice;
        slice.header = header;
        slice.header.instance_number = static_cast<int>(z) + 1;
        slice.header.image_position_mm = {0.0, 0.0, static_cast<double>(z) * spec.slice_thickness_mm};
        slice.hu = clean;
        if (spec.noise_sigma_hu > 0.0)
            for (auto& v : slice.hu)
                v += spec.noise_sigma_hu * noise(rng);
        // Quantise to the stored-value grid so a DICOM round trip is exact.
        for (auto& v : slice.hu)
            v = std::clamp(std::round(v + 1024.0), 0.0, 4095.0) - 1024.0;
        study.slices.push_back(std::move(slice));
    }

    LabelVolume& labels = study.labels;
    labels.dims = {spec.cols, spec.rows, spec.slice_count};
    labels.voxels.assign(spec.cols * spec.rows * spec.slice_count, 0);
    // NIfTI stores the sform as float32; keep the in-memory volume equal to what the file holds.
    const double sp = static_cast<float>(spec.spacing_mm);
    const double dz = static_cast<float>(spec.slice_thickness_mm);
    labels.affine = {sp, 0, 0, 0, 0, sp, 0, 0, 0, 0, dz, 0, 0, 0, 0, 1};
    for (std::size_t z = spec.l3_first; z <= spec.l3_last; ++z) {
        study.l3_slices.push_back(static_cast<int>(z));
        for (std::size_t r = 0; r < spec.rows; ++r)
            for (std::size_t c = 0; c < spec.cols; ++c)
                if (radius_at(spec, r, c) < spec.bone_radius_mm)
                    labels.at(c, r, z) = 29;
    }

    for (int z : study.l3_slices)
        study.stacks.emplace(z, generate_prob_maps(study.reference, spec.member_count, spec.perturb_sigma,
                                                   spec.seed * 1000003ULL + static_cast<std::uint64_t>(z),
                                                   spec.band_px));
    return study;
}

void write_study(const PhantomStudy& study, const std::filesystem::path& dir, const PhantomWriteOptions& options)
{
    char name[32];
    for (std::size_t i = 0; i < study.slices.size(); ++i) {
        std::snprintf(name, sizeof name, "IM%04zu.dcm", i + 1);
        write_file(dir / "dicom" / name, serialize_dicom(study.slices[i], options.syntax));
    }
    if (options.labels == LabelFormat::Nifti) {
        const Bytes nii = serialize_nifti_labels(study.labels);
        if (options.gzip_labels)
            write_file(dir / "labels.nii.gz", gzip_compress(nii));
        else
            write_file(dir / "labels.nii", nii);
    } else if (options.labels == LabelFormat::JsonSidecar) {
        write_text(dir / "l3.json", nlohmann::json{{"l3_slices", study.l3_slices}}.dump() + "\n");
    }
    const std::string& uid = study.slices.front().header.series_uid;
    for (const auto& [z, stack] : study.stacks)
        write_stack(dir / "pmaps", uid, z, stack);

    const auto& s = study.spec;
    const nlohmann::json truth{
        {"patient_id", s.patient_id},
        {"study_date", s.study_date},
        {"series_uid", uid},
        {"analytic_sma_cm2", study.analytic_sma_cm2},
        {"rasterized_sma_cm2", study.rasterized_sma_cm2},
        {"reference_pixels", study.reference.pixel_count},
        {"spacing_mm", s.spacing_mm},
        {"inner_radius_mm", s.inner_radius_mm},
        {"outer_radius_mm", s.outer_radius_mm},
        {"l3_slices", study.l3_slices},
        {"noise_sigma_hu", s.noise_sigma_hu},
        {"perturb_sigma", s.perturb_sigma},
        {"member_count", s.member_count},
        {"height_m", s.height_m},
        {"seed", s.seed},
    };
    write_text(dir / "ground_truth.json", truth.dump(2) + "\n");
}

}  // namespace bodycomp
