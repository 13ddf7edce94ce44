#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "bodycomp/bytes.hpp"
#include "bodycomp/error.hpp"
#include "bodycomp/stats.hpp"
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

// Two-sided p by Simpson integration of the t density over [|t|, |t| + span], tail beyond ignored.
double quadrature_p(double t, double df)
{
    const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
    auto f = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
    const double a = std::abs(t), b = a + 2000.0;
    const int n = 400000;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        s += f(a + i * h) * (i % 2 ? 4 : 2);
    return 2 * s * h / 3;
}

double brute_concordance(const std::vector<double>& t, const std::vector<bool>& e, const std::vector<double>& r)
{
    double num = 0;
    long den = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (!(t[i] < t[j]) || !e[i])
                continue;
            ++den;
            num += r[i] > r[j] ? 1.0 : r[i] == r[j] ? 0.5 : 0.0;
        }
    return num / den;
}

}  // namespace

TEST(Bmi, ExamplesAndRange)
{
    EXPECT_NEAR(bmi(72, 1.80), 22.22, 0.005);
    EXPECT_DOUBLE_EQ(bmi(80, 2.0), 20.0);
    const double b = bmi(64.3, 1.71);
    EXPECT_NEAR(b * 1.71 * 1.71, 64.3, 1e-12);
    EXPECT_EQ(kind_of([] { bmi(15, 1.7); }), ErrorKind::OutOfRange);
    EXPECT_EQ(kind_of([] { bmi(70, 2.5); }), ErrorKind::OutOfRange);
}

TEST(Cachexia, TwoStageRule)
{
    EXPECT_EQ(classify_cachexia_two_stage(6, 24), CachexiaStatus::Cachectic);
    EXPECT_EQ(classify_cachexia_two_stage(3, 19), CachexiaStatus::Cachectic);
    EXPECT_EQ(classify_cachexia_two_stage(3, 24), CachexiaStatus::NonCachectic);
    EXPECT_EQ(classify_cachexia_two_stage(5, 20), CachexiaStatus::NonCachectic);
    EXPECT_EQ(classify_cachexia_two_stage(2, 19.9), CachexiaStatus::NonCachectic);
    for (double b : {15.0, 19.99, 20.0, 27.0}) {
        bool seen = false;
        for (double loss = 0; loss < 15; loss += 0.1) {
            const bool c = classify_cachexia_two_stage(loss, b) == CachexiaStatus::Cachectic;
            EXPECT_FALSE(seen && !c);
            seen = seen || c;
        }
    }
}

TEST(Pearson, ExamplesAndOracle)
{
    std::vector<double> x = {1, 2, 3, 4, 7};
    std::vector<double> y, ny;
    for (double v : x) {
        y.push_back(2 * v + 3);
        ny.push_back(-v);
    }
    EXPECT_NEAR(pearson_r(x, y), 1.0, 1e-15);
    EXPECT_NEAR(pearson_r(x, ny), -1.0, 1e-15);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    std::vector<double> a(50), b(50);
    for (int i = 0; i < 50; ++i) {
        a[i] = n01(rng);
        b[i] = 0.4 * a[i] + n01(rng);
    }
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / 50, mb = std::accumulate(b.begin(), b.end(), 0.0) / 50;
    double sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < 50; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    EXPECT_NEAR(pearson_r(a, b), sab / std::sqrt(saa * sbb), 1e-12);
    for (double s : {-3.0, -0.5, 0.25, 8.0}) {
        std::vector<double> t;
        for (double v : a)
            t.push_back(s * v + 11);
        EXPECT_NEAR(pearson_r(a, t), s > 0 ? 1.0 : -1.0, 1e-12);
    }
    EXPECT_EQ(kind_of([] { pearson_r({1, 1, 1}, {1, 2, 3}); }), ErrorKind::ConstantInput);
    EXPECT_EQ(kind_of([] { pearson_r({1, 2, 3}, {1, 2}); }), ErrorKind::LengthMismatch);
}

TEST(Significance, Examples)
{
    const auto zero = corr_significance(0.0, 10);
    EXPECT_EQ(zero.t, 0.0);
    EXPECT_NEAR(zero.p, 1.0, 1e-12);
    EXPECT_FALSE(zero.significant);
    const auto s = corr_significance(0.866, 25);
    EXPECT_NEAR(s.t, 8.3057, 1e-3);
    EXPECT_LT(s.p, 1e-7);
    EXPECT_TRUE(s.significant);
    const auto d = corr_significance(1.0, 10);
    EXPECT_TRUE(d.degenerate);
    EXPECT_TRUE(std::isinf(d.t));
    EXPECT_EQ(d.p, 0.0);
    EXPECT_TRUE(d.significant);
    EXPECT_EQ(kind_of([] { corr_significance(0.5, 2); }), ErrorKind::DomainError);
    EXPECT_EQ(kind_of([] { corr_significance(1.5, 20); }), ErrorKind::DomainError);
}

TEST(Significance, QuadratureOracle)
{
    for (std::size_t n : {5u, 25u, 100u})
        for (double r : {0.1, 0.35, 0.6, -0.8}) {
            const auto s = corr_significance(r, n);
            EXPECT_NEAR(s.p, quadrature_p(s.t, static_cast<double>(n - 2)), 1e-6) << n << " " << r;
        }
}

TEST(Concordance, ExamplesAndBruteForce)
{
    const std::vector<double> t = {1, 2, 3, 4};
    const std::vector<bool> all(4, true);
    EXPECT_DOUBLE_EQ(concordance_index(t, all, {4, 3, 2, 1}), 1.0);
    EXPECT_DOUBLE_EQ(concordance_index(t, all, {1, 1, 1, 1}), 0.5);
    EXPECT_DOUBLE_EQ(concordance_index(t, all, {1, 2, 3, 4}), 0.0);
    EXPECT_EQ(kind_of([&] { concordance_index(t, std::vector<bool>(4, false), {1, 2, 3, 4}); }),
              ErrorKind::NoAdmissiblePairs);
    EXPECT_EQ(kind_of([&] { concordance_index(t, all, {1, 2}); }), ErrorKind::LengthMismatch);

    std::mt19937_64 rng(30);
    std::uniform_int_distribution<int> ti(1, 12), ri(0, 6);
    std::bernoulli_distribution ev(0.6);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> tt(30), rr(30);
        std::vector<bool> ee(30);
        for (int i = 0; i < 30; ++i) {
            tt[i] = ti(rng);
            rr[i] = ri(rng);
            ee[i] = ev(rng);
        }
        ee[0] = true;
        tt[0] = 0;
        EXPECT_DOUBLE_EQ(concordance_index(tt, ee, rr), brute_concordance(tt, ee, rr));
        std::vector<double> mono;
        for (double v : rr)
            mono.push_back(std::exp(v) * 3 - 1);
        EXPECT_DOUBLE_EQ(concordance_index(tt, ee, mono), concordance_index(tt, ee, rr));
    }
}

TEST(Covariates, ReadDerivesMissingColumns)
{
    testsupport::TempDir dir;
    write_text(dir / "c.csv",
               "patient_id,age,sex,race,ethnicity,weight_kg,height_m,stage,sma_cm2,time_to_event,event_observed\n"
               "p1,61,F,white,nh,64,1.6,II,128,400,dead\n"
               "p2,70,M,black,nh,80,2.0,III,160,220,0\n");
    const auto rows = read_covariates(dir / "c.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_NEAR(rows[0].bmi, 25.0, 1e-12);
    EXPECT_NEAR(rows[0].smi, 50.0, 1e-12);
    EXPECT_TRUE(rows[0].event_observed);
    EXPECT_FALSE(rows[1].event_observed);
    EXPECT_FALSE(rows[0].label);

    write_text(dir / "bad.csv",
               "patient_id,age,sex,race,ethnicity,weight_kg,height_m,bmi,stage,sma_cm2,time_to_event,event_observed\n"
               "p1,61,F,w,n,64,1.6,30,II,128,400,1\n");
    EXPECT_EQ(kind_of([&] { read_covariates(dir / "bad.csv"); }), ErrorKind::DomainError);
}
