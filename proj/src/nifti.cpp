#include "bodycomp/nifti.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "bodycomp/error.hpp"

namespace bodycomp {

namespace {

constexpr std::size_t kHeaderSize = 348;

std::array<double, 16> quaternion_affine(ByteReader& r, const float pixdim[8])
{
    r.seek(256);
    const double b = r.f32(), c = r.f32(), d = r.f32();
    const double qx = r.f32(), qy = r.f32(), qz = r.f32();
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    const double qfac = pixdim[0] < 0 ? -1.0 : 1.0;
    const double dx = pixdim[1], dy = pixdim[2], dz = pixdim[3] * qfac;
    const double R[3][3] = {
        {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
        {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
        {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b},
    };
    return {R[0][0] * dx, R[0][1] * dy, R[0][2] * dz, qx,
            R[1][0] * dx, R[1][1] * dy, R[1][2] * dz, qy,
            R[2][0] * dx, R[2][1] * dy, R[2][2] * dz, qz,
            0, 0, 0, 1};
}

}  // namespace

LabelVolume parse_nifti_labels(ByteView input)
{
    Bytes inflated;
    ByteView bytes = input;
    if (is_gzip(input)) {
        inflated = gzip_decompress(input);
        bytes = inflated;
    }
    if (bytes.size() < kHeaderSize)
        throw Error(ErrorKind::TruncatedElement, "NIfTI header needs 348 bytes");

    ByteReader r(bytes);
    const std::uint32_t sizeof_hdr = r.u32();
    r.seek(344);
    const ByteView magic = r.take(4);
    if (std::memcmp(magic.data(), "n+1\0", 4) != 0)
        throw Error(ErrorKind::BadMagic, "expected single-file NIfTI-1 magic n+1");
    if (sizeof_hdr != kHeaderSize)
        throw Error(ErrorKind::UnsupportedDatatype, "big-endian or non-NIfTI-1 header");

    r.seek(40);
    std::int16_t dim[8];
    for (auto& d : dim)
        d = static_cast<std::int16_t>(r.u16());
    if (!(dim[0] == 3 || (dim[0] == 4 && dim[4] == 1)))
        throw Error(ErrorKind::DimensionMismatch, "expected a 3-D volume, dim[0] = " + std::to_string(dim[0]));
    if (dim[1] <= 0 || dim[2] <= 0 || dim[3] <= 0)
        throw Error(ErrorKind::DimensionMismatch, "non-positive dimension");

    r.seek(70);
    const auto datatype = static_cast<std::int16_t>(r.u16());
    if (datatype != 2 && datatype != 4 && datatype != 512)
        throw Error(ErrorKind::UnsupportedDatatype, "datatype code " + std::to_string(datatype));
    const std::size_t bytes_per_voxel = datatype == 2 ? 1 : 2;

    r.seek(76);
    float pixdim[8];
    for (auto& p : pixdim)
        p = r.f32();
    r.seek(108);
    const float vox_offset = r.f32();
    if (!(vox_offset >= static_cast<float>(kHeaderSize)) || vox_offset > static_cast<float>(bytes.size()))
        throw Error(ErrorKind::TruncatedElement, "vox_offset outside file");

    r.seek(252);
    const auto qform_code = static_cast<std::int16_t>(r.u16());
    const auto sform_code = static_cast<std::int16_t>(r.u16());

    LabelVolume vol;
    vol.dims = {static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
                static_cast<std::size_t>(dim[3])};
    if (sform_code > 0) {
        r.seek(280);
        for (int i = 0; i < 12; ++i)
            vol.affine[i] = r.f32();
        vol.affine[12] = vol.affine[13] = vol.affine[14] = 0.0;
        vol.affine[15] = 1.0;
    } else if (qform_code > 0) {
        vol.affine = quaternion_affine(r, pixdim);
    } else {
        vol.affine = {pixdim[1], 0, 0, 0, 0, pixdim[2], 0, 0, 0, 0, pixdim[3], 0, 0, 0, 0, 1};
    }

    const std::size_t count = vol.dims[0] * vol.dims[1] * vol.dims[2];
    r.seek(static_cast<std::size_t>(vox_offset));
    const ByteView data = r.take(count * bytes_per_voxel);
    vol.voxels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (bytes_per_voxel == 1) {
            vol.voxels[i] = data[i];
            continue;
        }
        const auto raw = static_cast<std::uint16_t>(data[2 * i] | (data[2 * i + 1] << 8));
        if (datatype == 4 && static_cast<std::int16_t>(raw) < 0)
            throw Error(ErrorKind::MalformedData, "negative label value");
        vol.voxels[i] = raw;
    }
    return vol;
}

LabelVolume read_nifti_labels(const std::filesystem::path& path)
{
    const Bytes bytes = read_file(path);
    return parse_nifti_labels(bytes);
}

Bytes serialize_nifti_labels(const LabelVolume& vol, NiftiLabelType type)
{
    for (std::size_t d : vol.dims)
        if (d == 0 || d > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max()))
            throw Error(ErrorKind::DimensionMismatch, "dimension does not fit NIfTI-1");
    if (vol.voxels.size() != vol.dims[0] * vol.dims[1] * vol.dims[2])
        throw Error(ErrorKind::DimensionMismatch, "voxel count does not match dims");

    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(kHeaderSize));
    w.zeros(36);  // data_type, db_name, extents, session_error, regular, dim_info
    const std::int16_t dim[8] = {3, static_cast<std::int16_t>(vol.dims[0]), static_cast<std::int16_t>(vol.dims[1]),
                                 static_cast<std::int16_t>(vol.dims[2]), 1, 1, 1, 1};
    for (auto d : dim)
        w.u16(static_cast<std::uint16_t>(d));
    w.zeros(12);  // intent_p1..p3
    w.u16(0);     // intent_code
    w.u16(static_cast<std::uint16_t>(type));
    w.u16(type == NiftiLabelType::UInt8 ? 8 : 16);
    w.u16(0);  // slice_start
    const auto& A = vol.affine;
    const float spacing[3] = {
        static_cast<float>(std::sqrt(A[0] * A[0] + A[4] * A[4] + A[8] * A[8])),
        static_cast<float>(std::sqrt(A[1] * A[1] + A[5] * A[5] + A[9] * A[9])),
        static_cast<float>(std::sqrt(A[2] * A[2] + A[6] * A[6] + A[10] * A[10])),
    };
    const float pixdim[8] = {1.0f, spacing[0], spacing[1], spacing[2], 0, 0, 0, 0};
    for (float p : pixdim)
        w.f32(p);
    w.f32(352.0f);  // vox_offset
    w.f32(0.0f);    // scl_slope
    w.f32(0.0f);    // scl_inter
    w.zeros(2 + 1 + 1);  // slice_end, slice_code, xyzt_units
    w.zeros(4 * 4);      // cal_max, cal_min, slice_duration, toffset
    w.zeros(8);          // glmax, glmin
    w.zeros(80);         // descrip
    w.zeros(24);         // aux_file
    w.u16(1);            // qform_code: scanner
    w.u16(1);            // sform_code: scanner
    w.f32(0.0f);
    w.f32(0.0f);
    w.f32(0.0f);  // identity quaternion
    w.f32(static_cast<float>(A[3]));
    w.f32(static_cast<float>(A[7]));
    w.f32(static_cast<float>(A[11]));
    for (int i = 0; i < 12; ++i)
        w.f32(static_cast<float>(A[i]));
    w.zeros(16);  // intent_name
    w.raw(std::string_view("n+1\0", 4));
    w.zeros(4);  // extension flag
    for (std::uint16_t v : vol.voxels) {
        if (type == NiftiLabelType::UInt8) {
            if (v > 255)
                throw Error(ErrorKind::OutOfRange, "label does not fit uint8");
            w.u8(static_cast<std::uint8_t>(v));
        } else {
            if (type == NiftiLabelType::Int16 && v > 32767)
                throw Error(ErrorKind::OutOfRange, "label does not fit int16");
            w.u16(v);
        }
    }
    return w.take();
}

}  // namespace bodycomp
