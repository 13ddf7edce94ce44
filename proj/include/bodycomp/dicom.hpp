#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "bodycomp/bytes.hpp"
#include "bodycomp/grid.hpp"

namespace bodycomp {

struct CalendarDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    /// Parses DICOM DA ("YYYYMMDD") or ISO ("YYYY-MM-DD").
    static std::optional<CalendarDate> parse(std::string_view text);
    std::string iso() const;
    std::string dicom() const;
    /// Days since 1970-01-01, proleptic Gregorian.
    long days_since_epoch() const;

    friend auto operator<=>(const CalendarDate&, const CalendarDate&) = default;
};

struct SliceHeader {
    std::string patient_id;
    std::string study_uid;
    std::string series_uid;
    std::string frame_of_reference_uid;
    std::optional<int> series_number;
    std::optional<int> acquisition_number;
    std::optional<int> instance_number;
    std::optional<CalendarDate> study_date;
    std::string series_description;
    std::string study_description;
    std::uint16_t rows = 0;
    std::uint16_t columns = 0;
    double pixel_spacing_row_mm = 0.0;
    double pixel_spacing_col_mm = 0.0;
    std::optional<double> slice_thickness_mm;
    std::optional<double> spacing_between_slices_mm;
    std::array<double, 3> image_position_mm{};
    /// Row direction cosines followed by column direction cosines.
    std::array<double, 6> image_orientation{};
    double rescale_slope = 1.0;
    double rescale_intercept = 0.0;
    std::uint16_t bits_allocated = 16;
    bool signed_pixels = false;

    friend bool operator==(const SliceHeader&, const SliceHeader&) = default;
};

/// Slice with its pixel data rescaled to Hounsfield units.
struct CtSlice {
    SliceHeader header;
    Grid<double> hu;

    friend bool operator==(const CtSlice&, const CtSlice&) = default;
};

enum class TransferSyntax { ExplicitVrLittleEndian, ImplicitVrLittleEndian };

/// Parses a single-frame, uncompressed, monochrome DICOM object (Part 10 file or bare data set).
/// Throws Error(UnsupportedTransferSyntax | MissingRequiredTag | TruncatedElement | MalformedData).
CtSlice parse_dicom_file(ByteView bytes);
CtSlice read_dicom_file(const std::filesystem::path& path);

/// Writes a Part 10 file. Stored values are recovered as round((hu - intercept) / slope),
/// which is exact whenever the slice was produced from integer stored values.
Bytes serialize_dicom(const CtSlice& slice,
                      TransferSyntax syntax = TransferSyntax::ExplicitVrLittleEndian);

/// 8-bit secondary-capture style derived image (masks, uncertainty maps) on the template's geometry.
Bytes serialize_derived_image(const Grid<std::uint8_t>& pixels, const SliceHeader& source,
                              std::string_view description);

}  // namespace bodycomp
