#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bodycomp/bytes.hpp"

namespace bodycomp {

/// Integer label volume, x fastest then y then z.
struct LabelVolume {
    std::array<std::size_t, 3> dims{};
    std::vector<std::uint16_t> voxels;
    /// Row-major 4x4 voxel-index to patient (RAS) transform.
    std::array<double, 16> affine{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

    std::uint16_t at(std::size_t x, std::size_t y, std::size_t z) const
    {
        return voxels[(z * dims[1] + y) * dims[0] + x];
    }
    std::uint16_t& at(std::size_t x, std::size_t y, std::size_t z)
    {
        return voxels[(z * dims[1] + y) * dims[0] + x];
    }

    friend bool operator==(const LabelVolume&, const LabelVolume&) = default;
};

enum class NiftiLabelType : std::int16_t { UInt8 = 2, Int16 = 4, UInt16 = 512 };

/// Reads a single-file NIfTI-1 label volume, gzip-wrapped or not.
/// Throws BadMagic, UnsupportedDatatype, DimensionMismatch, TruncatedElement.
LabelVolume parse_nifti_labels(ByteView bytes);
LabelVolume read_nifti_labels(const std::filesystem::path& path);

/// Writes an uncompressed .nii image with both sform and qform set from the affine.
/// The affine must be a rotation-free scaling + translation for the qform to be exact.
Bytes serialize_nifti_labels(const LabelVolume& volume, NiftiLabelType type = NiftiLabelType::UInt8);

}  // namespace bodycomp
