#include <gtest/gtest.h>

#include "bodycomp/error.hpp"
#include "bodycomp/nifti.hpp"
#include "bodycomp/phantom.hpp"
#include "bodycomp/vertebra.hpp"
#include "test_support.hpp"

using namespace bodycomp;

namespace {

LabelVolume volume_with(std::size_t nz, const std::vector<int>& slices, std::uint16_t label = 29)
{
    LabelVolume v;
    v.dims = {2, 2, nz};
    v.voxels.assign(4 * nz, 0);
    for (int z : slices)
        v.at(1, 0, static_cast<std::size_t>(z)) = label;
    return v;
}

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

}  // namespace

TEST(Nifti, ZeroVolume)
{
    LabelVolume v;
    v.dims = {2, 2, 2};
    v.voxels.assign(8, 0);
    const auto parsed = parse_nifti_labels(serialize_nifti_labels(v));
    EXPECT_EQ(parsed.dims, v.dims);
    EXPECT_EQ(parsed.voxels, v.voxels);
}

TEST(Nifti, AllDatatypesAndGzip)
{
    auto v = volume_with(20, {10, 11, 12, 13, 14});
    v.at(0, 1, 3) = 300;
    for (auto type : {NiftiLabelType::Int16, NiftiLabelType::UInt16}) {
        const Bytes nii = serialize_nifti_labels(v, type);
        const auto plain = parse_nifti_labels(nii);
        EXPECT_EQ(plain.voxels, v.voxels);
        EXPECT_EQ(parse_nifti_labels(gzip_compress(nii)), plain);
    }
    v.at(0, 1, 3) = 0;
    const auto u8 = parse_nifti_labels(serialize_nifti_labels(v, NiftiLabelType::UInt8));
    EXPECT_EQ(u8.voxels, v.voxels);
}

TEST(Nifti, BadMagicAndTruncation)
{
    Bytes nii = serialize_nifti_labels(volume_with(3, {1}));
    Bytes bad = nii;
    bad[344] = 'x';
    EXPECT_EQ(kind_of([&] { parse_nifti_labels(bad); }), ErrorKind::BadMagic);
    const Bytes gz = gzip_compress(nii);
    for (std::size_t n = 0; n < gz.size(); ++n) {
        const ByteView prefix(gz.data(), n);
        try {
            parse_nifti_labels(prefix);
        } catch (const Error&) {
        }
    }
    EXPECT_EQ(kind_of([&] { parse_nifti_labels(ByteView(nii.data(), 100)); }), ErrorKind::TruncatedElement);
}

TEST(Nifti, FourDimensionalWithSingleVolumeAccepted)
{
    Bytes nii = serialize_nifti_labels(volume_with(3, {1}));
    // dim[0] at offset 40, dim[4] at 48
    nii[40] = 4;
    nii[48] = 1;
    EXPECT_NO_THROW(parse_nifti_labels(nii));
    nii[48] = 2;
    EXPECT_EQ(kind_of([&] { parse_nifti_labels(nii); }), ErrorKind::DimensionMismatch);
}

TEST(Nifti, FloatDatatypeUnsupported)
{
    Bytes nii = serialize_nifti_labels(volume_with(3, {1}));
    nii[70] = 16;  // DT_FLOAT32
    nii[71] = 0;
    EXPECT_EQ(kind_of([&] { parse_nifti_labels(nii); }), ErrorKind::UnsupportedDatatype);
}

TEST(Nifti, PhantomLabelsRoundTrip)
{
    auto spec = testsupport::small_phantom();
    const auto study = generate_study(spec);
    const auto parsed = parse_nifti_labels(gzip_compress(serialize_nifti_labels(study.labels)));
    EXPECT_EQ(parsed.voxels, study.labels.voxels);
    for (int i = 0; i < 16; ++i)
        EXPECT_NEAR(parsed.affine[i], study.labels.affine[i], 1e-6);
    EXPECT_EQ(l3_slice_range(parsed), study.l3_slices);
}

TEST(L3Range, ContiguousAndLongestRun)
{
    std::vector<int> full;
    for (int z = 40; z <= 52; ++z)
        full.push_back(z);
    EXPECT_EQ(l3_slice_range(volume_with(60, full)), full);
    EXPECT_EQ(l3_slice_range(volume_with(60, {40, 41, 43, 44, 45})), (std::vector<int>{43, 44, 45}));
    EXPECT_EQ(longest_contiguous_run({5, 6, 1, 2}), (std::vector<int>{1, 2}));
    EXPECT_EQ(kind_of([] { l3_slice_range(volume_with(10, {}, 29)); }), ErrorKind::LabelAbsent);
    EXPECT_EQ(kind_of([] { l3_slice_range(volume_with(10, {2}, 28)); }), ErrorKind::LabelAbsent);
}

TEST(L3Range, SeriesIndexMapping)
{
    auto v = volume_with(10, {1, 2, 3});
    EXPECT_EQ(l3_series_indices(v, 10), (std::vector<int>{1, 2, 3}));
    v.affine[10] = -2.5;
    EXPECT_EQ(l3_series_indices(v, 10), (std::vector<int>{6, 7, 8}));
    EXPECT_EQ(kind_of([&] { l3_series_indices(v, 9); }), ErrorKind::DimensionMismatch);
}

TEST(MidSlice, DocumentedExamples)
{
    EXPECT_EQ(mid_slice_index(12), 5);
    EXPECT_EQ(mid_slice_index(20), 8);
    EXPECT_EQ(mid_slice_index(33), 13);
    EXPECT_EQ(mid_slice_index(1), 0);
    EXPECT_EQ(mid_slice_index(2), 0);
}

TEST(MidSlice, MonotoneWithinRuleBandsAndWindowContainsMid)
{
    for (int n = 1; n < 200; ++n) {
        // The offset subtracted grows at the 12/13 and 32/33 rule boundaries, so the index
        // steps back by one there and is non-decreasing everywhere else.
        if (n == 12 || n == 32)
            EXPECT_EQ(mid_slice_index(n + 1), mid_slice_index(n) - 1);
        else
            EXPECT_LE(mid_slice_index(n), mid_slice_index(n + 1));
        const auto w = averaging_window(n, mid_slice_index(n));
        EXPECT_LE(w.size(), 5u);
        EXPECT_NE(std::find(w.begin(), w.end(), mid_slice_index(n)), w.end());
    }
}

TEST(AveragingWindow, DocumentedExamples)
{
    EXPECT_EQ(averaging_window(20, 8), (std::vector<int>{6, 7, 8, 9, 10}));
    EXPECT_EQ(averaging_window(10, 4), (std::vector<int>{3, 4, 5}));
    EXPECT_EQ(averaging_window(3, 0), (std::vector<int>{0, 1}));
}

TEST(L3Range, MakeRange)
{
    const auto r = make_l3_range({30, 31, 32, 33, 34, 35, 36, 37, 38, 39});
    EXPECT_EQ(r.mid_index, 34);
    EXPECT_EQ(r.window_indices, (std::vector<int>{33, 34, 35}));
    EXPECT_EQ(end_l3_offset(10), 0);
}

TEST(L3Range, Sidecar)
{
    testsupport::TempDir dir;
    write_text(dir / "l3.json", R"({"l3_slices": [4, 5, 6]})");
    EXPECT_EQ(read_l3_sidecar(dir / "l3.json"), (std::vector<int>{4, 5, 6}));
    write_text(dir / "bad.json", R"({"l3": [4]})");
    EXPECT_EQ(kind_of([&] { read_l3_sidecar(dir / "bad.json"); }), ErrorKind::MalformedData);
}
