#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "bodycomp/nifti.hpp"
#include "bodycomp/series_catalog.hpp"

namespace bodycomp {

inline constexpr int kL3Label = 29;

struct L3Range {
    /// Contiguous ascending series slice indices carrying the L3 label.
    std::vector<int> slice_indices;
    int mid_index = 0;
    std::vector<int> window_indices;
};

/// Longest contiguous run of the (deduplicated, sorted) indices; ties go to the inferior-most run.
/// Throws LabelAbsent on empty input.
std::vector<int> longest_contiguous_run(std::vector<int> indices);

/// z-slab indices (voxel order) carrying `label`, reduced to the longest contiguous run.
std::vector<int> l3_slice_range(const LabelVolume& labels, int l3_label = kL3Label);

/// Maps voxel z indices to series slice indices: identity when the volume's k axis points
/// superior, reversed otherwise. Throws DimensionMismatch if nz != slice_count.
std::vector<int> l3_series_indices(const LabelVolume& labels, std::size_t slice_count,
                                   int l3_label = kL3Label);

/// Offset of the mid-L3 slice inside a run of `slice_count` L3 slices.
int mid_slice_index(int slice_count);

/// Offsets averaged around `mid`: +-2 for runs longer than 12 slices, +-1 otherwise.
std::vector<int> averaging_window(int slice_count, int mid);

/// Inferior-most slice of the L3 range (the end-L3 / start-L4 landmark).
int end_l3_offset(int slice_count);

/// Builds the full range description from ascending series indices.
L3Range make_l3_range(std::vector<int> slice_indices);

/// Reads a `{"l3_slices": [...]}` sidecar.
std::vector<int> read_l3_sidecar(const std::filesystem::path& path);

}  // namespace bodycomp
