#include <gtest/gtest.h>

#include "bodycomp/dicom.hpp"
#include "bodycomp/error.hpp"
#include "bodycomp/phantom.hpp"
#include "test_support.hpp"

using namespace bodycomp;
using testsupport::DicomBuilder;

namespace {

ErrorKind kind_of(const Bytes& bytes)
{
    try {
        parse_dicom_file(bytes);
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "parse succeeded";
    return ErrorKind::IoError;
}

}  // namespace

TEST(Dicom, IdentityRescaleGivesZeroHu)
{
    const auto slice = parse_dicom_file(DicomBuilder::ct(2, 2, {1024, 1024, 1024, 1024}).build(true));
    for (double v : slice.hu)
        EXPECT_EQ(v, 0.0);
}

TEST(Dicom, LinearRescale)
{
    const auto slice = parse_dicom_file(DicomBuilder::ct(1, 1, {600}, "2", "-1000").build(true));
    EXPECT_EQ(slice.hu(0, 0), 200.0);
}

TEST(Dicom, HeaderFieldsFromIndependentEncoder)
{
    const auto s = parse_dicom_file(DicomBuilder::ct(2, 3, {0, 1, 2, 3, 4, 5}).build(true));
    const auto& h = s.header;
    EXPECT_EQ(h.patient_id, "P1");
    EXPECT_EQ(h.study_uid, "1.2.3");
    EXPECT_EQ(h.series_uid, "1.2.3.4");
    EXPECT_EQ(h.frame_of_reference_uid, "1.2.3.5");
    EXPECT_EQ(h.series_number, 7);
    EXPECT_EQ(h.acquisition_number, 1);
    EXPECT_EQ(h.instance_number, 5);
    ASSERT_TRUE(h.study_date);
    EXPECT_EQ(h.study_date->iso(), "2020-01-31");
    EXPECT_EQ(h.series_description, "AXIAL VENOUS");
    EXPECT_EQ(h.study_description, "CT ABDOMEN");
    EXPECT_EQ(h.rows, 2);
    EXPECT_EQ(h.columns, 3);
    EXPECT_DOUBLE_EQ(h.pixel_spacing_row_mm, 0.7);
    EXPECT_DOUBLE_EQ(h.pixel_spacing_col_mm, 0.8);
    EXPECT_EQ(h.slice_thickness_mm, 2.5);
    EXPECT_FALSE(h.spacing_between_slices_mm);
    EXPECT_DOUBLE_EQ(h.image_position_mm[1], -20.5);
    EXPECT_EQ(s.hu(1, 2), 5.0 - 1024.0);
}

TEST(Dicom, ImplicitAndBareForms)
{
    const auto b = DicomBuilder::ct(2, 2, {1000, 1010, 1020, 1030});
    const auto explicit_file = parse_dicom_file(b.build(true));
    EXPECT_EQ(parse_dicom_file(b.build(false, "1.2.840.10008.1.2")), explicit_file);
    EXPECT_EQ(parse_dicom_file(b.build(true, "")), explicit_file);
    EXPECT_EQ(parse_dicom_file(b.build(false, "")), explicit_file);
}

TEST(Dicom, OptionalTagsBecomeAbsences)
{
    auto b = DicomBuilder::ct(1, 1, {0});
    b.drop(0x0020, 0x0011).drop(0x0020, 0x0012).drop(0x0008, 0x0020).drop(0x0018, 0x0050).drop(0x0008, 0x103E);
    const auto s = parse_dicom_file(b.build(true));
    EXPECT_FALSE(s.header.series_number);
    EXPECT_FALSE(s.header.acquisition_number);
    EXPECT_FALSE(s.header.study_date);
    EXPECT_FALSE(s.header.slice_thickness_mm);
    EXPECT_EQ(s.header.series_description, "");
}

TEST(Dicom, MissingRequiredTags)
{
    const std::vector<std::pair<std::uint16_t, std::uint16_t>> required = {
        {0x0028, 0x0010}, {0x0028, 0x0011}, {0x0028, 0x0030}, {0x0020, 0x0032},
        {0x0020, 0x0037}, {0x7FE0, 0x0010}, {0x0028, 0x1053}, {0x0028, 0x1052},
    };
    for (auto [g, e] : required) {
        auto b = DicomBuilder::ct(1, 1, {0});
        b.drop(g, e);
        EXPECT_EQ(kind_of(b.build(true)), ErrorKind::MissingRequiredTag) << std::hex << g << "," << e;
    }
}

TEST(Dicom, UnsupportedTransferSyntaxes)
{
    const auto b = DicomBuilder::ct(1, 1, {0});
    EXPECT_EQ(kind_of(b.build(true, "1.2.840.10008.1.2.2")), ErrorKind::UnsupportedTransferSyntax);
    EXPECT_EQ(kind_of(b.build(true, "1.2.840.10008.1.2.4.70")), ErrorKind::UnsupportedTransferSyntax);
}

TEST(Dicom, SignedStoredValues)
{
    auto b = DicomBuilder::ct(1, 2, {static_cast<std::uint16_t>(-5), 7}, "1", "0");
    b.drop(0x0028, 0x0103).us(0x0028, 0x0103, 1);
    const auto s = parse_dicom_file(b.build(true));
    EXPECT_EQ(s.hu(0, 0), -5.0);
    EXPECT_EQ(s.hu(0, 1), 7.0);
}

TEST(Dicom, TwelveBitStoredWithSignExtension)
{
    auto b = DicomBuilder::ct(1, 2, {0x0FFF, 0x0001}, "1", "0");
    b.drop(0x0028, 0x0101).us(0x0028, 0x0101, 12);
    b.drop(0x0028, 0x0102).us(0x0028, 0x0102, 11);
    b.drop(0x0028, 0x0103).us(0x0028, 0x0103, 1);
    const auto s = parse_dicom_file(b.build(true));
    EXPECT_EQ(s.hu(0, 0), -1.0);
    EXPECT_EQ(s.hu(0, 1), 1.0);
}

TEST(Dicom, EightBitPixels)
{
    auto b = DicomBuilder::ct(1, 2, {}, "1", "0");
    b.drop(0x7FE0, 0x0010).raw(0x7FE0, 0x0010, "OB", {200, 3});
    b.drop(0x0028, 0x0100).us(0x0028, 0x0100, 8);
    b.drop(0x0028, 0x0101).us(0x0028, 0x0101, 8);
    b.drop(0x0028, 0x0102).us(0x0028, 0x0102, 7);
    const auto s = parse_dicom_file(b.build(true));
    EXPECT_EQ(s.hu(0, 0), 200.0);
    EXPECT_EQ(s.hu(0, 1), 3.0);
}

TEST(Dicom, ShortPixelDataIsTruncated)
{
    auto b = DicomBuilder::ct(2, 2, {1, 2, 3});
    EXPECT_EQ(kind_of(b.build(true)), ErrorKind::TruncatedElement);
}

TEST(Dicom, NonUnitCosinesRejected)
{
    auto b = DicomBuilder::ct(1, 1, {0});
    b.drop(0x0020, 0x0037).str(0x0020, 0x0037, "DS", "1.01\\0\\0\\0\\1\\0");
    EXPECT_EQ(kind_of(b.build(true)), ErrorKind::MalformedData);
}

TEST(Dicom, PhantomSliceRoundTripsBothSyntaxes)
{
    PhantomSpec spec;
    spec.rows = 512;
    spec.cols = 512;
    spec.slice_count = 2;
    spec.l3_first = 0;
    spec.l3_last = 1;
    spec.noise_sigma_hu = 15.0;
    spec.member_count = 1;
    const auto study = generate_study(spec);
    for (auto syntax : {TransferSyntax::ExplicitVrLittleEndian, TransferSyntax::ImplicitVrLittleEndian}) {
        const auto parsed = parse_dicom_file(serialize_dicom(study.slices[1], syntax));
        EXPECT_EQ(parsed.header, study.slices[1].header);
        EXPECT_EQ(parsed.hu, study.slices[1].hu);
    }
}

TEST(Dicom, EveryTruncationIsATypedError)
{
    PhantomSpec spec = testsupport::small_phantom();
    spec.rows = spec.cols = 96;
    spec.inner_radius_mm = 20;
    spec.outer_radius_mm = 30;
    const auto study = generate_study(spec);
    const Bytes full = serialize_dicom(study.slices[0]);
    for (std::size_t n = 0; n < full.size(); n += (n < 2048 ? 1 : 97)) {
        const ByteView prefix(full.data(), n);
        try {
            parse_dicom_file(prefix);
        } catch (const Error&) {
        } catch (const std::exception& e) {
            FAIL() << "untyped exception at length " << n << ": " << e.what();
        }
    }
}

TEST(Dicom, DerivedImageCarriesTemplateGeometry)
{
    const auto src = parse_dicom_file(DicomBuilder::ct(2, 2, {0, 0, 0, 0}).build(true));
    Grid<std::uint8_t> px(2, 2, 0);
    px(1, 0) = 255;
    const auto out = parse_dicom_file(serialize_derived_image(px, src.header, "MASK"));
    EXPECT_EQ(out.header.rows, 2);
    EXPECT_EQ(out.header.image_position_mm, src.header.image_position_mm);
    EXPECT_EQ(out.header.bits_allocated, 8);
    EXPECT_NE(out.header.series_uid, src.header.series_uid);
    EXPECT_EQ(out.hu(1, 0), 255.0);
    EXPECT_EQ(out.hu(0, 0), 0.0);
}

TEST(CalendarDate, ParsesBothFormsAndCountsDays)
{
    EXPECT_EQ(CalendarDate::parse("20200229")->iso(), "2020-02-29");
    EXPECT_EQ(CalendarDate::parse("2020-02-29")->dicom(), "20200229");
    EXPECT_FALSE(CalendarDate::parse("20200230"));
    EXPECT_FALSE(CalendarDate::parse("2020"));
    EXPECT_EQ(CalendarDate::parse("19700101")->days_since_epoch(), 0);
    EXPECT_EQ(CalendarDate::parse("20000301")->days_since_epoch(), 11017);
}
