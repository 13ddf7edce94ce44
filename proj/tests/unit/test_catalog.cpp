#include <gtest/gtest.h>

#include "bodycomp/error.hpp"
#include "bodycomp/series_catalog.hpp"

using namespace bodycomp;

namespace {

CtSlice slice(const std::string& series, double z, int instance, std::array<double, 6> iop = {1, 0, 0, 0, 1, 0})
{
    CtSlice s;
    auto& h = s.header;
    h.study_uid = "1";
    h.series_uid = series;
    h.frame_of_reference_uid = "f";
    h.rows = 2;
    h.columns = 2;
    h.pixel_spacing_row_mm = h.pixel_spacing_col_mm = 1.0;
    h.image_orientation = iop;
    h.image_position_mm = {0, 0, z};
    h.instance_number = instance;
    s.hu = Grid<double>(2, 2, 0.0);
    return s;
}

}  // namespace

TEST(Orientation, Classification)
{
    EXPECT_EQ(classify_orientation({1, 0, 0, 0, 1, 0}), View::Axial);
    EXPECT_EQ(classify_orientation({1, 0, 0, 0, 0, -1}), View::NonAxial);
    EXPECT_EQ(classify_orientation({1, 0, 0, 0, 0.966, 0.259}), View::Axial);
    EXPECT_EQ(classify_orientation({0, 1, 0, 0, 0, -1}), View::NonAxial);
}

TEST(Orientation, GantryTiltNormal)
{
    const auto n = slice_normal({1, 0, 0, 0, 0.966, 0.259});
    EXPECT_NEAR(n[0], 0.0, 1e-12);
    EXPECT_NEAR(n[1], -0.259, 1e-12);
    EXPECT_NEAR(n[2], 0.966, 1e-12);
}

TEST(Orientation, NegatingBothTriplesKeepsView)
{
    for (const auto& iop : std::vector<std::array<double, 6>>{
             {1, 0, 0, 0, 1, 0}, {1, 0, 0, 0, 0, -1}, {0.6, 0.8, 0, 0, 0.8, -0.6}, {1, 0, 0, 0, 0.966, 0.259}}) {
        std::array<double, 6> neg;
        for (int i = 0; i < 6; ++i)
            neg[i] = -iop[i];
        EXPECT_EQ(classify_orientation(iop), classify_orientation(neg));
    }
}

TEST(Orientation, ParallelTriplesAreDegenerate)
{
    try {
        classify_orientation({1, 0, 0, 1, 0, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateOrientation);
    }
}

TEST(Catalog, SortsByPosition)
{
    const auto cat = build_catalog({slice("s", 10, 1), slice("s", 0, 2), slice("s", 5, 3)});
    ASSERT_EQ(cat.series.size(), 1u);
    const auto& sl = cat.series[0].slices;
    EXPECT_EQ(sl[0].header.image_position_mm[2], 0);
    EXPECT_EQ(sl[1].header.image_position_mm[2], 5);
    EXPECT_EQ(sl[2].header.image_position_mm[2], 10);
}

TEST(Catalog, AcquisitionNumbersSplitGroups)
{
    auto a = slice("s", 0, 1), b = slice("s", 1, 2), c = slice("s", 0, 3), d = slice("s", 1, 4);
    a.header.acquisition_number = b.header.acquisition_number = 1;
    c.header.acquisition_number = d.header.acquisition_number = 2;
    const auto cat = build_catalog({a, b, c, d});
    ASSERT_EQ(cat.series.size(), 2u);
    EXPECT_EQ(cat.series[0].slices.size(), 2u);
    EXPECT_EQ(cat.series[1].slices.size(), 2u);
}

TEST(Catalog, SagittalSeriesLabelledNonAxial)
{
    auto s0 = slice("sag", 0, 1, {0, 1, 0, 0, 0, -1}), s1 = slice("sag", 0, 2, {0, 1, 0, 0, 0, -1});
    s1.header.image_position_mm = {1, 0, 0};  // sagittal slices step along x
    const auto cat = build_catalog({slice("ax", 0, 1), slice("ax", 1, 2), s0, s1});
    ASSERT_EQ(cat.series.size(), 2u);
    for (const auto& g : cat.series)
        EXPECT_EQ(g.view, g.key.series_uid == "ax" ? View::Axial : View::NonAxial);
    const auto choice = choose_series(cat, "nothing-matches");
    ASSERT_TRUE(choice);
    EXPECT_EQ(cat.series[choice->index].key.series_uid, "ax");
}

TEST(Catalog, PartitionAndTieBreakOnInstance)
{
    std::vector<CtSlice> in;
    for (int i = 0; i < 20; ++i)
        in.push_back(slice(i % 3 ? "a" : "b", (i * 7) % 11, 20 - i));
    const auto cat = build_catalog(in);
    std::size_t total = 0;
    for (const auto& g : cat.series) {
        total += g.slices.size();
        for (std::size_t k = 1; k < g.slices.size(); ++k) {
            const double z0 = position_along_normal(g.slices[k - 1].header);
            const double z1 = position_along_normal(g.slices[k].header);
            EXPECT_LT(z0, z1);
        }
    }
    EXPECT_EQ(total, in.size());
}

TEST(Catalog, MixedGeometrySplitsWithoutMerging)
{
    auto a = slice("s", 0, 1), b = slice("s", 1, 2), c = slice("s", 2, 3), d = slice("s", 3, 4);
    c.header.rows = d.header.rows = 4;
    c.hu = d.hu = Grid<double>(4, 2, 0.0);
    const auto cat = build_catalog({a, b, c, d});
    EXPECT_EQ(cat.series.size(), 2u);
}

TEST(Catalog, InterleavedGeometryConflicts)
{
    auto a = slice("s", 0, 1), b = slice("s", 1, 2), c = slice("s", 2, 3);
    b.header.rows = 4;
    b.hu = Grid<double>(4, 2, 0.0);
    try {
        build_catalog({a, b, c});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConflictingGeometry);
    }
}

TEST(Catalog, EmptyInput)
{
    try {
        build_catalog({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
    }
}

TEST(Catalog, ChooseSeriesPrefersDescriptionThenSize)
{
    std::vector<CtSlice> in;
    for (int i = 0; i < 5; ++i) {
        auto s = slice("big", i, i + 1);
        s.header.series_description = "AXIAL ARTERIAL";
        in.push_back(s);
    }
    for (int i = 0; i < 3; ++i) {
        auto s = slice("ven", i, i + 1);
        s.header.series_description = "Axial Venous 5mm";
        in.push_back(s);
    }
    const auto cat = build_catalog(in);
    auto choice = choose_series(cat, "venous");
    ASSERT_TRUE(choice);
    EXPECT_EQ(cat.series[choice->index].key.series_uid, "ven");
    EXPECT_EQ(choice->reason, SeriesChoiceReason::DescriptionMatch);
    choice = choose_series(cat, "delayed");
    EXPECT_EQ(cat.series[choice->index].key.series_uid, "big");
    EXPECT_EQ(choice->reason, SeriesChoiceReason::MostSlices);
}
