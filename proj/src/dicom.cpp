#include "bodycomp/dicom.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <vector>

#include "bodycomp/error.hpp"

namespace bodycomp {

// ---------------------------------------------------------------------------
// Calendar dates
// ---------------------------------------------------------------------------

namespace {

bool parse_int(std::string_view text, int& out)
{
    if (text.empty())
        return false;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (*first == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

bool leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m)
{
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && leap_year(y) ? 29 : kDays[m - 1];
}

}  // namespace

std::optional<CalendarDate> CalendarDate::parse(std::string_view text)
{
    std::string digits;
    for (char ch : text) {
        if (ch == '-' || ch == '.')
            continue;
        if (ch == ' ' || ch == '\0')
            break;
        digits.push_back(ch);
    }
    if (digits.size() != 8)
        return std::nullopt;
    CalendarDate d;
    if (!parse_int(std::string_view(digits).substr(0, 4), d.year) ||
        !parse_int(std::string_view(digits).substr(4, 2), d.month) ||
        !parse_int(std::string_view(digits).substr(6, 2), d.day))
        return std::nullopt;
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
        return std::nullopt;
    return d;
}

std::string CalendarDate::iso() const
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::string CalendarDate::dicom() const
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d%02d%02d", year, month, day);
    return buf;
}

long CalendarDate::days_since_epoch() const
{
    // civil-from-days inverse (H. Hinnant)
    const int y = month <= 2 ? year - 1 : year;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const long yoe = y - era * 400;
    const long mp = (month + 9) % 12;
    const long doy = (153 * mp + 2) / 5 + day - 1;
    const long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t make_tag(std::uint16_t group, std::uint16_t element)
{
    return (static_cast<std::uint32_t>(group) << 16) | element;
}

namespace tags {
constexpr auto TransferSyntaxUid = make_tag(0x0002, 0x0010);
constexpr auto StudyDate = make_tag(0x0008, 0x0020);
constexpr auto StudyDescription = make_tag(0x0008, 0x1030);
constexpr auto SeriesDescription = make_tag(0x0008, 0x103E);
constexpr auto PatientId = make_tag(0x0010, 0x0020);
constexpr auto SliceThickness = make_tag(0x0018, 0x0050);
constexpr auto SpacingBetweenSlices = make_tag(0x0018, 0x0088);
constexpr auto StudyInstanceUid = make_tag(0x0020, 0x000D);
constexpr auto SeriesInstanceUid = make_tag(0x0020, 0x000E);
constexpr auto SeriesNumber = make_tag(0x0020, 0x0011);
constexpr auto AcquisitionNumber = make_tag(0x0020, 0x0012);
constexpr auto InstanceNumber = make_tag(0x0020, 0x0013);
constexpr auto ImagePosition = make_tag(0x0020, 0x0032);
constexpr auto ImageOrientation = make_tag(0x0020, 0x0037);
constexpr auto FrameOfReferenceUid = make_tag(0x0020, 0x0052);
constexpr auto SamplesPerPixel = make_tag(0x0028, 0x0002);
constexpr auto NumberOfFrames = make_tag(0x0028, 0x0008);
constexpr auto Rows = make_tag(0x0028, 0x0010);
constexpr auto Columns = make_tag(0x0028, 0x0011);
constexpr auto PixelSpacing = make_tag(0x0028, 0x0030);
constexpr auto BitsAllocated = make_tag(0x0028, 0x0100);
constexpr auto BitsStored = make_tag(0x0028, 0x0101);
constexpr auto HighBit = make_tag(0x0028, 0x0102);
constexpr auto PixelRepresentation = make_tag(0x0028, 0x0103);
constexpr auto RescaleIntercept = make_tag(0x0028, 0x1052);
constexpr auto RescaleSlope = make_tag(0x0028, 0x1053);
constexpr auto PixelData = make_tag(0x7FE0, 0x0010);

constexpr auto Item = make_tag(0xFFFE, 0xE000);
constexpr auto ItemDelimitation = make_tag(0xFFFE, 0xE00D);
constexpr auto SequenceDelimitation = make_tag(0xFFFE, 0xE0DD);
}  // namespace tags

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFF;
constexpr int kMaxSequenceDepth = 16;
constexpr std::string_view kExplicitLE = "1.2.840.10008.1.2.1";
constexpr std::string_view kImplicitLE = "1.2.840.10008.1.2";

std::string tag_name(std::uint32_t tag)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "(%04X,%04X)", tag >> 16, tag & 0xFFFF);
    return buf;
}

bool is_vr_char(std::uint8_t c) { return c >= 'A' && c <= 'Z'; }

bool has_long_length(std::string_view vr)
{
    return vr == "OB" || vr == "OW" || vr == "OF" || vr == "OD" || vr == "OL" || vr == "OV" ||
           vr == "SQ" || vr == "UT" || vr == "UN" || vr == "UC" || vr == "UR" || vr == "SV" ||
           vr == "UV";
}

struct ElementHeader {
    std::uint32_t tag = 0;
    std::uint32_t length = 0;
};

/// Walks a data set, keeping top-level element values and skipping sequences.
class DataSetReader {
public:
    DataSetReader(ByteView data, std::size_t offset, bool explicit_vr)
        : reader_(data, offset), explicit_vr_(explicit_vr)
    {
    }

    std::map<std::uint32_t, ByteView> read_all()
    {
        std::map<std::uint32_t, ByteView> out;
        while (!reader_.at_end()) {
            const ElementHeader h = next_header();
            if ((h.tag >> 16) == 0xFFFE)
                throw Error(ErrorKind::MalformedData, "item tag at top level " + tag_name(h.tag));
            if (h.length == kUndefinedLength) {
                if (h.tag == tags::PixelData)
                    throw Error(ErrorKind::UnsupportedTransferSyntax,
                                "encapsulated (compressed) pixel data");
                skip_undefined_sequence(1);
                continue;
            }
            out.emplace(h.tag, reader_.take(h.length));
        }
        return out;
    }

    /// Reads group 0002 (always explicit VR) and stops at the first non-meta element.
    std::map<std::uint32_t, ByteView> read_meta_group()
    {
        std::map<std::uint32_t, ByteView> out;
        while (reader_.remaining() >= 2) {
            const std::size_t start = reader_.position();
            const std::uint16_t group = reader_.u16();
            reader_.seek(start);
            if (group != 0x0002)
                break;
            const ElementHeader h = next_header();
            if (h.length == kUndefinedLength)
                throw Error(ErrorKind::MalformedData, "undefined length in file meta group");
            out.emplace(h.tag, reader_.take(h.length));
        }
        return out;
    }

    std::size_t position() const { return reader_.position(); }

private:
    ElementHeader next_header()
    {
        ElementHeader h;
        const std::uint16_t group = reader_.u16();
        const std::uint16_t element = reader_.u16();
        h.tag = make_tag(group, element);
        if (group == 0xFFFE || !explicit_vr_) {
            h.length = reader_.u32();
            return h;
        }
        const ByteView vr_bytes = reader_.take(2);
        if (!is_vr_char(vr_bytes[0]) || !is_vr_char(vr_bytes[1]))
            throw Error(ErrorKind::MalformedData, "invalid VR at " + tag_name(h.tag));
        const std::string_view vr(reinterpret_cast<const char*>(vr_bytes.data()), 2);
        if (has_long_length(vr)) {
            reader_.skip(2);
            h.length = reader_.u32();
        } else {
            h.length = reader_.u16();
        }
        return h;
    }

    void skip_undefined_sequence(int depth)
    {
        if (depth > kMaxSequenceDepth)
            throw Error(ErrorKind::MalformedData, "sequence nesting too deep");
        for (;;) {
            const std::uint32_t tag = make_tag(reader_.u16(), reader_.u16());
            const std::uint32_t length = reader_.u32();
            if (tag == tags::SequenceDelimitation)
                return;
            if (tag != tags::Item)
                throw Error(ErrorKind::MalformedData, "expected item in sequence, got " + tag_name(tag));
            if (length != kUndefinedLength) {
                reader_.skip(length);
                continue;
            }
            skip_undefined_item(depth);
        }
    }

    void skip_undefined_item(int depth)
    {
        for (;;) {
            const ElementHeader h = next_header();
            if (h.tag == tags::ItemDelimitation)
                return;
            if (h.length == kUndefinedLength)
                skip_undefined_sequence(depth + 1);
            else
                reader_.skip(h.length);
        }
    }

    ByteReader reader_;
    bool explicit_vr_;
};

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.back() == ' ' || s.back() == '\0'))
        s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ')
        s.remove_prefix(1);
    return s;
}

std::string_view as_text(ByteView v)
{
    return trim(std::string_view(reinterpret_cast<const char*>(v.data()), v.size()));
}

class TagTable {
public:
    explicit TagTable(std::map<std::uint32_t, ByteView> elements) : elements_(std::move(elements)) {}

    const ByteView* find(std::uint32_t tag) const
    {
        auto it = elements_.find(tag);
        return it == elements_.end() ? nullptr : &it->second;
    }

    const ByteView& require(std::uint32_t tag) const
    {
        if (const ByteView* v = find(tag))
            return *v;
        throw Error(ErrorKind::MissingRequiredTag, tag_name(tag));
    }

    std::string text(std::uint32_t tag) const
    {
        const ByteView* v = find(tag);
        return v ? std::string(as_text(*v)) : std::string{};
    }

    std::uint16_t required_us(std::uint32_t tag) const
    {
        const ByteView& v = require(tag);
        if (v.size() < 2)
            throw Error(ErrorKind::MalformedData, "short US value " + tag_name(tag));
        return static_cast<std::uint16_t>(v[0] | (v[1] << 8));
    }

    std::optional<std::uint16_t> optional_us(std::uint32_t tag) const
    {
        if (!find(tag))
            return std::nullopt;
        return required_us(tag);
    }

    std::vector<double> decimals(std::uint32_t tag) const
    {
        return parse_decimals(as_text(require(tag)), tag);
    }

    std::optional<double> optional_decimal(std::uint32_t tag) const
    {
        const ByteView* v = find(tag);
        if (!v || as_text(*v).empty())
            return std::nullopt;
        auto values = parse_decimals(as_text(*v), tag);
        return values.front();
    }

    std::optional<int> optional_integer(std::uint32_t tag) const
    {
        const ByteView* v = find(tag);
        if (!v || as_text(*v).empty())
            return std::nullopt;
        int out = 0;
        if (!parse_int(as_text(*v), out))
            throw Error(ErrorKind::MalformedData, "bad IS value at " + tag_name(tag));
        return out;
    }

private:
    static std::vector<double> parse_decimals(std::string_view text, std::uint32_t tag)
    {
        std::vector<double> out;
        std::size_t start = 0;
        for (;;) {
            const std::size_t end = text.find('\\', start);
            std::string_view item = trim(text.substr(start, end == std::string_view::npos ? end : end - start));
            if (!item.empty() && item.front() == '+')
                item.remove_prefix(1);
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
            if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size() || !std::isfinite(value))
                throw Error(ErrorKind::MalformedData, "bad DS value at " + tag_name(tag));
            out.push_back(value);
            if (end == std::string_view::npos)
                break;
            start = end + 1;
        }
        return out;
    }

    std::map<std::uint32_t, ByteView> elements_;
};

template <std::size_t N>
std::array<double, N> fixed_decimals(const TagTable& table, std::uint32_t tag)
{
    const auto values = table.decimals(tag);
    if (values.size() != N)
        throw Error(ErrorKind::MalformedData, tag_name(tag) + " expects " + std::to_string(N) + " values");
    std::array<double, N> out{};
    std::copy(values.begin(), values.end(), out.begin());
    return out;
}

bool looks_explicit(ByteView data, std::size_t offset)
{
    return data.size() >= offset + 6 && is_vr_char(data[offset + 4]) && is_vr_char(data[offset + 5]);
}

}  // namespace

CtSlice parse_dicom_file(ByteView bytes)
{
    std::size_t offset = 0;
    bool explicit_vr = true;
    const bool has_preamble = bytes.size() >= 132 && bytes[128] == 'D' && bytes[129] == 'I' &&
                              bytes[130] == 'C' && bytes[131] == 'M';
    if (has_preamble)
        offset = 132;

    const bool starts_with_meta = bytes.size() >= offset + 2 && bytes[offset] == 0x02 && bytes[offset + 1] == 0x00;
    if (has_preamble || starts_with_meta) {
        DataSetReader meta(bytes, offset, true);
        const auto meta_elements = meta.read_meta_group();
        offset = meta.position();
        auto it = meta_elements.find(tags::TransferSyntaxUid);
        if (it == meta_elements.end())
            throw Error(ErrorKind::MissingRequiredTag, tag_name(tags::TransferSyntaxUid));
        const std::string_view syntax = as_text(it->second);
        if (syntax == kExplicitLE)
            explicit_vr = true;
        else if (syntax == kImplicitLE)
            explicit_vr = false;
        else
            throw Error(ErrorKind::UnsupportedTransferSyntax, std::string(syntax));
    } else {
        if (bytes.size() < 8)
            throw Error(ErrorKind::TruncatedElement, "input too short for a data set");
        explicit_vr = looks_explicit(bytes, offset);
    }

    const TagTable table(DataSetReader(bytes, offset, explicit_vr).read_all());

    if (auto spp = table.optional_us(tags::SamplesPerPixel); spp && *spp != 1)
        throw Error(ErrorKind::UnsupportedDatatype, "samples per pixel must be 1");
    if (auto frames = table.optional_integer(tags::NumberOfFrames); frames && *frames != 1)
        throw Error(ErrorKind::UnsupportedDatatype, "multi-frame objects are not supported");

    CtSlice slice;
    SliceHeader& h = slice.header;
    h.patient_id = table.text(tags::PatientId);
    h.study_uid = table.text(tags::StudyInstanceUid);
    h.series_uid = table.text(tags::SeriesInstanceUid);
    h.frame_of_reference_uid = table.text(tags::FrameOfReferenceUid);
    h.series_number = table.optional_integer(tags::SeriesNumber);
    h.acquisition_number = table.optional_integer(tags::AcquisitionNumber);
    h.instance_number = table.optional_integer(tags::InstanceNumber);
    if (const auto date_text = table.text(tags::StudyDate); !date_text.empty())
        h.study_date = CalendarDate::parse(date_text);
    h.series_description = table.text(tags::SeriesDescription);
    h.study_description = table.text(tags::StudyDescription);

    h.rows = table.required_us(tags::Rows);
    h.columns = table.required_us(tags::Columns);
    if (h.rows == 0 || h.columns == 0)
        throw Error(ErrorKind::MalformedData, "zero image dimension");

    const auto spacing = fixed_decimals<2>(table, tags::PixelSpacing);
    h.pixel_spacing_row_mm = spacing[0];
    h.pixel_spacing_col_mm = spacing[1];
    if (!(h.pixel_spacing_row_mm > 0.0) || !(h.pixel_spacing_col_mm > 0.0))
        throw Error(ErrorKind::MalformedData, "pixel spacing must be positive");
    h.slice_thickness_mm = table.optional_decimal(tags::SliceThickness);
    h.spacing_between_slices_mm = table.optional_decimal(tags::SpacingBetweenSlices);
    h.image_position_mm = fixed_decimals<3>(table, tags::ImagePosition);
    h.image_orientation = fixed_decimals<6>(table, tags::ImageOrientation);
    for (int axis = 0; axis < 2; ++axis) {
        const double* c = h.image_orientation.data() + 3 * axis;
        const double norm = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
        if (std::abs(norm - 1.0) > 1e-3)
            throw Error(ErrorKind::MalformedData, "direction cosines are not unit length");
    }

    h.rescale_slope = fixed_decimals<1>(table, tags::RescaleSlope)[0];
    h.rescale_intercept = fixed_decimals<1>(table, tags::RescaleIntercept)[0];

    h.bits_allocated = table.required_us(tags::BitsAllocated);
    if (h.bits_allocated != 8 && h.bits_allocated != 16)
        throw Error(ErrorKind::UnsupportedDatatype, "bits allocated must be 8 or 16");
    const std::uint16_t bits_stored = table.optional_us(tags::BitsStored).value_or(h.bits_allocated);
    const std::uint16_t high_bit = table.optional_us(tags::HighBit).value_or(bits_stored - 1);
    if (bits_stored == 0 || bits_stored > h.bits_allocated || high_bit >= h.bits_allocated ||
        high_bit + 1 < bits_stored)
        throw Error(ErrorKind::MalformedData, "inconsistent bits stored / high bit");
    const std::uint16_t representation = table.required_us(tags::PixelRepresentation);
    if (representation > 1)
        throw Error(ErrorKind::MalformedData, "pixel representation must be 0 or 1");
    h.signed_pixels = representation == 1;

    const ByteView& pixels = table.require(tags::PixelData);
    const std::size_t count = std::size_t{h.rows} * h.columns;
    const std::size_t bytes_per_pixel = h.bits_allocated / 8;
    if (pixels.size() < count * bytes_per_pixel)
        throw Error(ErrorKind::TruncatedElement, "pixel data holds " + std::to_string(pixels.size()) +
                                                    " bytes, need " + std::to_string(count * bytes_per_pixel));

    const unsigned shift = high_bit + 1u - bits_stored;
    const std::uint32_t mask = (bits_stored >= 32) ? 0xFFFFFFFFu : ((1u << bits_stored) - 1u);
    const std::uint32_t sign_bit = 1u << (bits_stored - 1);

    std::vector<double> hu(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t raw = bytes_per_pixel == 2
                                      ? static_cast<std::uint32_t>(pixels[2 * i] | (pixels[2 * i + 1] << 8))
                                      : pixels[i];
        const std::uint32_t bits = (raw >> shift) & mask;
        std::int64_t stored = bits;
        if (h.signed_pixels && (bits & sign_bit))
            stored -= std::int64_t{1} << bits_stored;
        hu[i] = h.rescale_slope * static_cast<double>(stored) + h.rescale_intercept;
    }
    slice.hu = Grid<double>(h.rows, h.columns, std::move(hu));
    return slice;
}

CtSlice read_dicom_file(const std::filesystem::path& path)
{
    const Bytes bytes = read_file(path);
    return parse_dicom_file(bytes);
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

namespace {

std::string format_decimal(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("0");
}

std::string join_decimals(std::span<const double> values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            out.push_back('\\');
        out += format_decimal(values[i]);
    }
    return out;
}

class DataSetWriter {
public:
    void text(std::uint32_t tag, std::string_view vr, std::string_view value)
    {
        Bytes bytes(value.begin(), value.end());
        if (bytes.size() % 2)
            bytes.push_back(vr == "UI" ? '\0' : ' ');
        put(tag, vr, std::move(bytes));
    }

    void us(std::uint32_t tag, std::uint16_t value)
    {
        put(tag, "US", Bytes{static_cast<std::uint8_t>(value & 0xFF), static_cast<std::uint8_t>(value >> 8)});
    }

    void ul(std::uint32_t tag, std::uint32_t value)
    {
        ByteWriter w;
        w.u32(value);
        put(tag, "UL", w.take());
    }

    void raw(std::uint32_t tag, std::string_view vr, Bytes value)
    {
        if (value.size() % 2)
            value.push_back(0);
        put(tag, vr, std::move(value));
    }

    Bytes encode(bool explicit_vr) const
    {
        ByteWriter w;
        for (const auto& [tag, element] : elements_) {
            const auto& [vr, value] = element;
            w.u16(static_cast<std::uint16_t>(tag >> 16));
            w.u16(static_cast<std::uint16_t>(tag & 0xFFFF));
            if (explicit_vr) {
                w.raw(vr);
                if (has_long_length(vr)) {
                    w.u16(0);
                    w.u32(static_cast<std::uint32_t>(value.size()));
                } else {
                    w.u16(static_cast<std::uint16_t>(value.size()));
                }
            } else {
                w.u32(static_cast<std::uint32_t>(value.size()));
            }
            w.raw(value);
        }
        return w.take();
    }

private:
    void put(std::uint32_t tag, std::string_view vr, Bytes bytes)
    {
        elements_[tag] = {std::string(vr), std::move(bytes)};
    }

    std::map<std::uint32_t, std::pair<std::string, Bytes>> elements_;
};

void write_common(DataSetWriter& ds, const SliceHeader& h)
{
    ds.text(tags::PatientId, "LO", h.patient_id);
    ds.text(tags::StudyInstanceUid, "UI", h.study_uid);
    ds.text(tags::SeriesInstanceUid, "UI", h.series_uid);
    ds.text(tags::FrameOfReferenceUid, "UI", h.frame_of_reference_uid);
    if (h.series_number)
        ds.text(tags::SeriesNumber, "IS", std::to_string(*h.series_number));
    if (h.acquisition_number)
        ds.text(tags::AcquisitionNumber, "IS", std::to_string(*h.acquisition_number));
    if (h.instance_number)
        ds.text(tags::InstanceNumber, "IS", std::to_string(*h.instance_number));
    if (h.study_date)
        ds.text(tags::StudyDate, "DA", h.study_date->dicom());
    ds.text(tags::SeriesDescription, "LO", h.series_description);
    ds.text(tags::StudyDescription, "LO", h.study_description);
    ds.us(tags::Rows, h.rows);
    ds.us(tags::Columns, h.columns);
    const double spacing[] = {h.pixel_spacing_row_mm, h.pixel_spacing_col_mm};
    ds.text(tags::PixelSpacing, "DS", join_decimals(spacing));
    if (h.slice_thickness_mm)
        ds.text(tags::SliceThickness, "DS", format_decimal(*h.slice_thickness_mm));
    if (h.spacing_between_slices_mm)
        ds.text(tags::SpacingBetweenSlices, "DS", format_decimal(*h.spacing_between_slices_mm));
    ds.text(tags::ImagePosition, "DS", join_decimals(h.image_position_mm));
    ds.text(tags::ImageOrientation, "DS", join_decimals(h.image_orientation));
    ds.us(tags::SamplesPerPixel, 1);
    ds.text(make_tag(0x0028, 0x0004), "CS", "MONOCHROME2");
}

Bytes wrap_part10(const DataSetWriter& ds, std::string_view sop_class, std::string_view sop_instance,
                  TransferSyntax syntax)
{
    const std::string_view syntax_uid =
        syntax == TransferSyntax::ExplicitVrLittleEndian ? kExplicitLE : kImplicitLE;

    DataSetWriter meta;
    meta.raw(make_tag(0x0002, 0x0001), "OB", Bytes{0x00, 0x01});
    meta.text(make_tag(0x0002, 0x0002), "UI", sop_class);
    meta.text(make_tag(0x0002, 0x0003), "UI", sop_instance);
    meta.text(tags::TransferSyntaxUid, "UI", syntax_uid);
    meta.text(make_tag(0x0002, 0x0012), "UI", "2.25.1955113012605128129");
    const Bytes meta_body = meta.encode(true);

    DataSetWriter group_length;
    group_length.ul(make_tag(0x0002, 0x0000), static_cast<std::uint32_t>(meta_body.size()));

    ByteWriter out;
    out.zeros(128);
    out.raw(std::string_view("DICM"));
    out.raw(group_length.encode(true));
    out.raw(meta_body);
    out.raw(ds.encode(syntax == TransferSyntax::ExplicitVrLittleEndian));
    return out.take();
}

}  // namespace

Bytes serialize_dicom(const CtSlice& slice, TransferSyntax syntax)
{
    const SliceHeader& h = slice.header;
    if (slice.hu.rows() != h.rows || slice.hu.cols() != h.columns)
        throw Error(ErrorKind::GeometryMismatch, "HU grid does not match header dimensions");
    if (h.bits_allocated != 8 && h.bits_allocated != 16)
        throw Error(ErrorKind::UnsupportedDatatype, "bits allocated must be 8 or 16");
    if (h.rescale_slope == 0.0)
        throw Error(ErrorKind::MalformedData, "rescale slope is zero");

    const std::int64_t lo = h.signed_pixels ? -(std::int64_t{1} << (h.bits_allocated - 1)) : 0;
    const std::int64_t hi = h.signed_pixels ? (std::int64_t{1} << (h.bits_allocated - 1)) - 1
                                            : (std::int64_t{1} << h.bits_allocated) - 1;
    ByteWriter pixels;
    for (double hu : slice.hu) {
        const auto stored = static_cast<std::int64_t>(std::llround((hu - h.rescale_intercept) / h.rescale_slope));
        if (stored < lo || stored > hi)
            throw Error(ErrorKind::OutOfRange, "stored value " + std::to_string(stored) + " does not fit");
        if (h.bits_allocated == 16)
            pixels.u16(static_cast<std::uint16_t>(stored & 0xFFFF));
        else
            pixels.u8(static_cast<std::uint8_t>(stored & 0xFF));
    }

    DataSetWriter ds;
    constexpr std::string_view kCtImageStorage = "1.2.840.10008.5.1.4.1.1.2";
    const std::string sop_instance =
        derived_uid(h.series_uid + "/" + std::to_string(h.instance_number.value_or(0)) + "/" +
                    join_decimals(h.image_position_mm));
    ds.text(make_tag(0x0008, 0x0016), "UI", kCtImageStorage);
    ds.text(make_tag(0x0008, 0x0018), "UI", sop_instance);
    ds.text(make_tag(0x0008, 0x0060), "CS", "CT");
    write_common(ds, h);
    ds.us(tags::BitsAllocated, h.bits_allocated);
    ds.us(tags::BitsStored, h.bits_allocated);
    ds.us(tags::HighBit, static_cast<std::uint16_t>(h.bits_allocated - 1));
    ds.us(tags::PixelRepresentation, h.signed_pixels ? 1 : 0);
    ds.text(tags::RescaleIntercept, "DS", format_decimal(h.rescale_intercept));
    ds.text(tags::RescaleSlope, "DS", format_decimal(h.rescale_slope));
    ds.raw(tags::PixelData, h.bits_allocated == 16 ? "OW" : "OB", pixels.take());
    return wrap_part10(ds, kCtImageStorage, sop_instance, syntax);
}

Bytes serialize_derived_image(const Grid<std::uint8_t>& pixels, const SliceHeader& source,
                              std::string_view description)
{
    if (pixels.rows() != source.rows || pixels.cols() != source.columns)
        throw Error(ErrorKind::GeometryMismatch, "derived image does not match template geometry");

    SliceHeader h = source;
    h.series_uid = derived_uid(source.series_uid + "/" + std::string(description));
    h.series_description = std::string(description);

    DataSetWriter ds;
    constexpr std::string_view kSecondaryCapture = "1.2.840.10008.5.1.4.1.1.7";
    const std::string sop_instance =
        derived_uid(h.series_uid + "/" + std::to_string(source.instance_number.value_or(0)));
    ds.text(make_tag(0x0008, 0x0016), "UI", kSecondaryCapture);
    ds.text(make_tag(0x0008, 0x0018), "UI", sop_instance);
    ds.text(make_tag(0x0008, 0x0060), "CS", "OT");
    write_common(ds, h);
    ds.us(tags::BitsAllocated, 8);
    ds.us(tags::BitsStored, 8);
    ds.us(tags::HighBit, 7);
    ds.us(tags::PixelRepresentation, 0);
    ds.text(tags::RescaleIntercept, "DS", "0");
    ds.text(tags::RescaleSlope, "DS", "1");
    ds.raw(tags::PixelData, "OB", Bytes(pixels.begin(), pixels.end()));
    return wrap_part10(ds, kSecondaryCapture, sop_instance, TransferSyntax::ExplicitVrLittleEndian);
}

}  // namespace bodycomp
