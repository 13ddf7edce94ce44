#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "bodycomp/error.hpp"
#include "bodycomp/mask_fusion.hpp"
#include "bodycomp/phantom.hpp"
#include "bodycomp/uncertainty.hpp"
#include "test_support.hpp"

using namespace bodycomp;

namespace {

double raster_error_pct(double spacing)
{
    PhantomSpec s;
    s.spacing_mm = spacing;
    s.rows = s.cols = static_cast<std::size_t>(std::ceil(160.0 / spacing));
    const auto m = rasterize_annulus(s);
    const double area = static_cast<double>(m.pixel_count) * spacing * spacing / 100.0;
    return 100.0 * std::abs(area - analytic_annulus_sma_cm2(40, 60)) / analytic_annulus_sma_cm2(40, 60);
}

double batch_variance(double sigma)
{
    auto spec = testsupport::small_phantom();
    const auto ref = rasterize_annulus(spec);
    double total = 0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const auto s = generate_prob_maps(ref, 5, sigma, seed);
        const auto fused = fuse(s, PixelSpacing{0.8, 0.8});
        total += compute_report(s, fused.mask, member_sma(s, PixelSpacing{0.8, 0.8})).avg_variance;
    }
    return total / 8;
}

}  // namespace

TEST(Phantom, AnalyticArea)
{
    EXPECT_NEAR(analytic_annulus_sma_cm2(40, 60), 62.83, 0.005);
}

TEST(Phantom, RasterizationWithinOnePercent)
{
    EXPECT_LT(raster_error_pct(0.8), 1.0);
}

TEST(Phantom, RasterizationConvergesWithSpacing)
{
    const double e10 = raster_error_pct(1.0), e08 = raster_error_pct(0.8), e05 = raster_error_pct(0.5);
    EXPECT_GT(e10, e05);
    EXPECT_GE(e08 + 1e-9, e05);
}

TEST(Phantom, SpecValidation)
{
    auto s = testsupport::small_phantom();
    s.inner_radius_mm = 50;
    EXPECT_THROW(s.validate(), Error);
    s = testsupport::small_phantom();
    s.l3_last = 12;
    EXPECT_THROW(generate_study(s), Error);
}

TEST(Phantom, StudyContents)
{
    auto spec = testsupport::small_phantom();
    const auto st = generate_study(spec);
    ASSERT_EQ(st.slices.size(), 12u);
    EXPECT_EQ(st.l3_slices, (std::vector<int>{3, 4, 5, 6, 7, 8}));
    EXPECT_EQ(st.stacks.size(), 6u);
    const auto& sl = st.slices[5];
    std::size_t muscle = 0;
    for (std::size_t i = 0; i < sl.hu.size(); ++i) {
        const double v = sl.hu[i];
        EXPECT_TRUE(v == 60.0 || v == -100.0 || v == 800.0) << v;
        if (st.reference.pixels[i])
            EXPECT_EQ(v, 60.0);
        muscle += v == 60.0;
    }
    EXPECT_EQ(muscle, st.reference.pixel_count);
    EXPECT_NEAR(st.rasterized_sma_cm2, st.reference.pixel_count * 0.64 / 100.0, 1e-12);
}

TEST(Phantom, SigmaZeroGivesCrispCopies)
{
    const auto ref = rasterize_annulus(testsupport::small_phantom());
    const auto s = generate_prob_maps(ref, 4, 0.0, 9);
    for (const auto& m : s.maps())
        for (std::size_t i = 0; i < m.size(); ++i)
            EXPECT_EQ(m[i], static_cast<float>(ref.pixels[i]));
    const auto fused = fuse(s, PixelSpacing{0.8, 0.8});
    EXPECT_EQ(fused.mask.pixels, ref.pixels);
    const auto r = compute_report(s, fused.mask, member_sma(s, PixelSpacing{0.8, 0.8}));
    EXPECT_EQ(r.avg_variance, 0.0);
    EXPECT_EQ(r.cov_sma_pct, 0.0);
}

TEST(Phantom, PerturbationStaysInBand)
{
    const auto ref = rasterize_annulus(testsupport::small_phantom());
    const auto s = generate_prob_maps(ref, 3, 0.3, 2, 3);
    Grid<std::uint8_t> inv(ref.pixels.rows(), ref.pixels.cols(), 0);
    for (std::size_t i = 0; i < inv.size(); ++i)
        inv[i] = !ref.pixels[i];
    const auto to_bg = squared_distance_transform(inv), to_fg = squared_distance_transform(ref.pixels);
    for (const auto& m : s.maps())
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double d2 = ref.pixels[i] ? to_bg[i] : to_fg[i];
            if (d2 > 9.0)
                EXPECT_EQ(m[i], static_cast<float>(ref.pixels[i]));
            EXPECT_GE(m[i], 0.0f);
            EXPECT_LE(m[i], 1.0f);
        }
}

TEST(Phantom, DistanceTransformBruteForce)
{
    Grid<std::uint8_t> f(9, 11, 0);
    f(1, 2) = f(7, 9) = f(4, 4) = 1;
    const auto d = squared_distance_transform(f);
    for (std::size_t r = 0; r < 9; ++r)
        for (std::size_t c = 0; c < 11; ++c) {
            double best = 1e300;
            for (std::size_t rr = 0; rr < 9; ++rr)
                for (std::size_t cc = 0; cc < 11; ++cc)
                    if (f(rr, cc)) {
                        const double dr = double(r) - double(rr), dc = double(c) - double(cc);
                        best = std::min(best, dr * dr + dc * dc);
                    }
            EXPECT_EQ(d(r, c), best);
        }
}

TEST(Phantom, VarianceGrowsWithSigma)
{
    const double v05 = batch_variance(0.05), v1 = batch_variance(0.1), v3 = batch_variance(0.3);
    EXPECT_GT(v1, v05);
    EXPECT_GT(v3, v1);
}

TEST(Phantom, PermutationLeavesMaskUnchanged)
{
    const auto ref = rasterize_annulus(testsupport::small_phantom());
    const auto s = generate_prob_maps(ref, 5, 0.2, 4);
    auto maps = s.maps();
    std::rotate(maps.begin(), maps.begin() + 2, maps.end());
    EXPECT_EQ(fuse(s).mask.pixels, fuse(ProbabilityStack::flat(maps)).mask.pixels);
}

TEST(Phantom, Deterministic)
{
    auto spec = testsupport::small_phantom(17);
    spec.noise_sigma_hu = 12;
    spec.perturb_sigma = 0.2;
    const auto a = generate_study(spec), b = generate_study(spec);
    for (std::size_t i = 0; i < a.slices.size(); ++i)
        EXPECT_EQ(a.slices[i].hu, b.slices[i].hu);
    for (const auto& [z, st] : a.stacks)
        EXPECT_EQ(st.maps(), b.stacks.at(z).maps());
    testsupport::TempDir d1, d2;
    write_study(a, d1.path());
    write_study(b, d2.path());
    EXPECT_EQ(read_file(d1 / "dicom/IM0005.dcm"), read_file(d2 / "dicom/IM0005.dcm"));
    EXPECT_EQ(read_file(d1 / "ground_truth.json"), read_file(d2 / "ground_truth.json"));
    spec.seed = 18;
    EXPECT_NE(generate_study(spec).slices[4].hu, a.slices[4].hu);
}
