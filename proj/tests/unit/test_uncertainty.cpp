#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bodycomp/error.hpp"
#include "bodycomp/png_codec.hpp"
#include "bodycomp/uncertainty.hpp"
#include "test_support.hpp"

using namespace bodycomp;

namespace {

template <class F>
ErrorKind kind_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::IoError;
}

double logit(double p) { return std::log(p / (1 - p)); }
double sigmoid(double z) { return 1 / (1 + std::exp(-z)); }

ProbabilityStack random_stack(std::mt19937_64& rng, std::size_t members, std::size_t side)
{
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<Grid<float>> maps(members, Grid<float>(side, side, 0.0f));
    for (auto& m : maps)
        for (auto& v : m)
            v = u(rng);
    return ProbabilityStack::flat(maps);
}

UncertaintyReport report_for(const ProbabilityStack& s)
{
    const auto fused = fuse(s, PixelSpacing{1, 1});
    return compute_report(s, fused.mask, member_sma(s, PixelSpacing{1, 1}));
}

}  // namespace

TEST(Entropy, ClosedForms)
{
    EXPECT_DOUBLE_EQ(binary_entropy(0.5), 1.0);
    EXPECT_EQ(binary_entropy(0.0), 0.0);
    EXPECT_EQ(binary_entropy(1.0), 0.0);
    EXPECT_NEAR(binary_entropy(0.9), 0.4690, 1e-4);
    EXPECT_NEAR(binary_entropy(0.8), 0.7219, 1e-4);
    EXPECT_EQ(kind_of([] { binary_entropy(1.01); }), ErrorKind::DomainError);
    EXPECT_EQ(kind_of([] { binary_entropy(std::nan("")); }), ErrorKind::DomainError);
}

TEST(Platt, IdentityAndClosedForm)
{
    const auto id = CalibrationModel::identity();
    for (double p = 0.001; p < 1.0; p += 0.0371)
        EXPECT_NEAR(apply_platt(id, p), p, 1e-12);
    EXPECT_NEAR(apply_platt({2.0, 0.0, true}, 0.9), 0.98780, 1e-5);
    for (double p = 0.01; p < 1.0; p += 0.05)
        EXPECT_GT(apply_platt({1.0, 0.3, true}, p), p);
    EXPECT_EQ(kind_of([] { apply_platt(CalibrationModel{}, 0.5); }), ErrorKind::Unfitted);
    EXPECT_TRUE(std::isfinite(logit(apply_platt(id, 0.0))));
}

TEST(Platt, MonotoneForPositiveSlope)
{
    const CalibrationModel m{0.7, -0.4, true};
    double prev = 0.0;
    for (double p = 1e-6; p < 1.0; p += 0.013) {
        const double q = apply_platt(m, p);
        EXPECT_GT(q, prev);
        prev = q;
    }
}

TEST(Platt, RecoversCalibratedData)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < 10000; ++i) {
        const double p = u(rng);
        s.push_back(p);
        l.push_back(std::bernoulli_distribution(p)(rng));
    }
    const auto m = fit_platt(s, l);
    EXPECT_NEAR(m.a, 1.0, 0.05);
    EXPECT_NEAR(m.b, 0.0, 0.05);
}

TEST(Platt, Errors)
{
    EXPECT_EQ(kind_of([] { fit_platt({0.2, 0.4}, {1, 1}); }), ErrorKind::SingleClass);
    EXPECT_EQ(kind_of([] { fit_platt({0.2, 0.4}, {1}); }), ErrorKind::LengthMismatch);
    EXPECT_EQ(kind_of([] { fit_platt({0.1, 0.4, 0.3, 0.9}, {0, 1, 0, 1}, PlattFitOptions{1e-8, 1}); }),
              ErrorKind::NonConvergence);
    // Separated scores drive the slope up until the gradient vanishes numerically.
    EXPECT_GT(fit_platt({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}).a, 5.0);
}

TEST(Platt, PersistAndReadPairs)
{
    testsupport::TempDir dir;
    save_calibration({1.25, -0.5, true}, dir / "c.json");
    const auto m = load_calibration(dir / "c.json");
    EXPECT_EQ(m.a, 1.25);
    EXPECT_EQ(m.b, -0.5);
    EXPECT_TRUE(m.fitted);
    write_text(dir / "pairs.csv", "score,label\n0.2,0\n0.9,1\n");
    const auto [s, l] = read_calibration_pairs(dir / "pairs.csv");
    EXPECT_EQ(s, (std::vector<double>{0.2, 0.9}));
    EXPECT_EQ(l, (std::vector<int>{0, 1}));
}

TEST(Report, IdenticalConstantMembers)
{
    const auto s = ProbabilityStack::flat(std::vector<Grid<float>>(3, Grid<float>(4, 4, 0.8f)));
    const auto r = report_for(s);
    EXPECT_NEAR(r.avg_probability, 0.8, 1e-6);
    EXPECT_NEAR(*r.avg_probability_sm, 0.8, 1e-6);
    EXPECT_EQ(r.avg_variance, 0.0);
    EXPECT_EQ(*r.avg_variance_sm, 0.0);
    EXPECT_EQ(r.cov_pixelwise_pct, 0.0);
    EXPECT_EQ(r.cov_sma_pct, 0.0);
    EXPECT_NEAR(r.avg_entropy, 0.7219, 1e-4);
    EXPECT_NEAR(r.expected_entropy, 0.7219, 1e-4);
}

TEST(Report, MaximalDisagreement)
{
    const auto s = ProbabilityStack::flat({Grid<float>(3, 3, 0.0f), Grid<float>(3, 3, 1.0f)});
    const auto fused = fuse(s, PixelSpacing{1, 1});
    const auto r = compute_report(s, fused.mask, {0.0, 9.0});
    EXPECT_DOUBLE_EQ(r.avg_probability, 0.5);
    EXPECT_DOUBLE_EQ(r.avg_entropy, 1.0);
    EXPECT_DOUBLE_EQ(r.expected_entropy, 0.0);
    EXPECT_DOUBLE_EQ(r.avg_variance, 0.25);
    EXPECT_FALSE(r.avg_probability_sm);
    EXPECT_FALSE(r.avg_variance_sm);
}

TEST(Report, CovSmaUsesPopulationStd)
{
    const auto s = ProbabilityStack::flat({Grid<float>(2, 2, 0.9f), Grid<float>(2, 2, 0.9f)});
    const auto fused = fuse(s, PixelSpacing{1, 1});
    EXPECT_NEAR(compute_report(s, fused.mask, {95.0, 105.0}).cov_sma_pct, 5.0, 1e-12);
    EXPECT_EQ(kind_of([&] { compute_report(s, fused.mask, {1.0}); }), ErrorKind::LengthMismatch);
}

TEST(Report, BruteForceMetricOracle)
{
    std::mt19937_64 rng(21);
    const auto s = random_stack(rng, 5, 6);
    const auto fused = fuse(s, PixelSpacing{1, 1});
    const auto sma = member_sma(s, PixelSpacing{1, 1});
    const auto r = compute_report(s, fused.mask, sma);
    double avg_p = 0, var = 0, ent = 0, exp_ent = 0, cov = 0;
    const double n = 36, k = 5;
    for (std::size_t i = 0; i < 36; ++i) {
        double mean = 0;
        for (const auto& m : s.maps())
            mean += m[i];
        mean /= k;
        double v = 0, h = 0;
        for (const auto& m : s.maps()) {
            v += (m[i] - mean) * (m[i] - mean);
            const double p = m[i];
            h += (p > 0 && p < 1) ? -p * std::log2(p) - (1 - p) * std::log2(1 - p) : 0.0;
        }
        v /= k;
        avg_p += std::max(mean, 1 - mean);
        var += v;
        ent += -mean * std::log2(mean) - (1 - mean) * std::log2(1 - mean);
        exp_ent += h / k;
        cov += 100 * std::sqrt(v) / mean;
    }
    EXPECT_NEAR(r.avg_probability, avg_p / n, 1e-9);
    EXPECT_NEAR(r.avg_variance, var / n, 1e-9);
    EXPECT_NEAR(r.avg_entropy, ent / n, 1e-9);
    EXPECT_NEAR(r.expected_entropy, exp_ent / n, 1e-9);
    EXPECT_NEAR(r.cov_pixelwise_pct, cov / n, 1e-7);
}

TEST(Report, SingleMemberAndPermutation)
{
    std::mt19937_64 rng(8);
    const auto one = random_stack(rng, 1, 5);
    const auto r1 = report_for(one);
    EXPECT_EQ(r1.avg_variance, 0.0);
    EXPECT_EQ(r1.cov_pixelwise_pct, 0.0);
    EXPECT_EQ(r1.cov_sma_pct, 0.0);
    EXPECT_NEAR(r1.avg_entropy, r1.expected_entropy, 1e-15);

    const auto s = random_stack(rng, 4, 5);
    auto maps = s.maps();
    std::reverse(maps.begin(), maps.end());
    const auto a = report_for(s), b = report_for(ProbabilityStack::flat(maps));
    for (const auto& name : uncertainty_metric_names()) {
        ASSERT_EQ(a.metric(name).has_value(), b.metric(name).has_value()) << name;
        if (a.metric(name))
            EXPECT_NEAR(*a.metric(name), *b.metric(name), 1e-12) << name;
    }
}

TEST(Report, CalibratedMetricNeedsModel)
{
    const auto s = ProbabilityStack::flat({Grid<float>(2, 2, 0.9f)});
    const auto fused = fuse(s, PixelSpacing{1, 1});
    EXPECT_FALSE(compute_report(s, fused.mask, {4.0}).avg_calibrated_probability);
    const auto r = compute_report(s, fused.mask, {4.0}, CalibrationModel{2.0, 0.0, true});
    EXPECT_NEAR(*r.avg_calibrated_probability, 0.98780, 1e-5);
}

TEST(Report, TwoLevelUsesIterationMeans)
{
    const auto s = ProbabilityStack::two_level(
        {{Grid<float>(1, 1, 0.125f), Grid<float>(1, 1, 0.375f)}, {Grid<float>(1, 1, 0.625f), Grid<float>(1, 1, 0.875f)}});
    const auto fused = fuse(s, PixelSpacing{1, 1});
    const auto r = compute_report(s, fused.mask, member_sma(s, PixelSpacing{1, 1}));
    EXPECT_EQ(r.avg_variance, 0.0625);  // members 0.25 and 0.75
}

TEST(UncertaintyMap, ExportRules)
{
    SliceHeader h;
    h.rows = 2;
    h.columns = 2;
    h.pixel_spacing_row_mm = h.pixel_spacing_col_mm = 1.0;
    h.image_orientation = {1, 0, 0, 0, 1, 0};
    UncertaintyReport r;
    r.uncertainty_map = Grid<double>(2, 2, 0.0);
    for (auto v : decode_png_gray8(export_uncertainty_map(r, h).png))
        EXPECT_EQ(v, 0);
    r.uncertainty_map(0, 1) = 0.07;
    const auto png = decode_png_gray8(export_uncertainty_map(r, h).png);
    EXPECT_EQ(png(0, 0), 0);
    EXPECT_EQ(png(0, 1), 255);
    EXPECT_EQ(png, render_uncertainty_map(r.uncertainty_map));
    h.columns = 3;
    EXPECT_EQ(kind_of([&] { export_uncertainty_map(r, h); }), ErrorKind::GeometryMismatch);
}
