#include "bodycomp/vertebra.hpp"

#include <algorithm>

#include <json.hpp>

#include "bodycomp/error.hpp"

namespace bodycomp {

std::vector<int> longest_contiguous_run(std::vector<int> indices)
{
    if (indices.empty())
        throw Error(ErrorKind::LabelAbsent, "no slices carry the L3 label");
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());

    std::size_t best_start = 0, best_len = 1;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= indices.size(); ++i) {
        if (i < indices.size() && indices[i] == indices[i - 1] + 1)
            continue;
        // strict > keeps the earliest (inferior-most) run on ties
        if (i - start > best_len) {
            best_len = i - start;
            best_start = start;
        }
        start = i;
    }
    return {indices.begin() + static_cast<std::ptrdiff_t>(best_start),
            indices.begin() + static_cast<std::ptrdiff_t>(best_start + best_len)};
}

std::vector<int> l3_slice_range(const LabelVolume& labels, int l3_label)
{
    const auto [nx, ny, nz] = labels.dims;
    std::vector<int> present;
    for (std::size_t z = 0; z < nz; ++z) {
        const auto first = labels.voxels.begin() + static_cast<std::ptrdiff_t>(z * nx * ny);
        if (std::find(first, first + static_cast<std::ptrdiff_t>(nx * ny), l3_label) != first + static_cast<std::ptrdiff_t>(nx * ny))
            present.push_back(static_cast<int>(z));
    }
    if (present.empty())
        throw Error(ErrorKind::LabelAbsent, "label " + std::to_string(l3_label) + " not found");
    return longest_contiguous_run(std::move(present));
}

std::vector<int> l3_series_indices(const LabelVolume& labels, std::size_t slice_count, int l3_label)
{
    if (labels.dims[2] != slice_count)
        throw Error(ErrorKind::DimensionMismatch, "label volume has " + std::to_string(labels.dims[2]) +
                                                      " slices, series has " + std::to_string(slice_count));
    std::vector<int> z = l3_slice_range(labels, l3_label);
    // z component of the k column; RAS and LPS share the superior direction
    if (labels.affine[10] < 0.0) {
        for (int& k : z)
            k = static_cast<int>(slice_count) - 1 - k;
        std::reverse(z.begin(), z.end());
    }
    return z;
}

int mid_slice_index(int slice_count)
{
    if (slice_count < 1)
        throw Error(ErrorKind::DomainError, "slice count must be positive");
    const int half = slice_count / 2;
    int mid = 0;
    if (slice_count <= 12)
        mid = half - 1;
    else if (slice_count <= 32)
        mid = half - 2;
    else
        mid = half - 3;
    return std::clamp(mid, 0, slice_count - 1);
}

std::vector<int> averaging_window(int slice_count, int mid)
{
    if (slice_count < 1 || mid < 0 || mid >= slice_count)
        throw Error(ErrorKind::DomainError, "mid offset outside the L3 range");
    const int reach = slice_count > 12 ? 2 : 1;
    std::vector<int> out;
    for (int offset = std::max(0, mid - reach); offset <= std::min(slice_count - 1, mid + reach); ++offset)
        out.push_back(offset);
    return out;
}

int end_l3_offset(int slice_count)
{
    if (slice_count < 1)
        throw Error(ErrorKind::DomainError, "slice count must be positive");
    return 0;
}

L3Range make_l3_range(std::vector<int> slice_indices)
{
    L3Range range;
    range.slice_indices = longest_contiguous_run(std::move(slice_indices));
    const int count = static_cast<int>(range.slice_indices.size());
    const int mid = mid_slice_index(count);
    range.mid_index = range.slice_indices[static_cast<std::size_t>(mid)];
    for (int offset : averaging_window(count, mid))
        range.window_indices.push_back(range.slice_indices[static_cast<std::size_t>(offset)]);
    return range;
}

std::vector<int> read_l3_sidecar(const std::filesystem::path& path)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedData, path.string() + ": " + e.what());
    }
    if (!doc.contains("l3_slices") || !doc["l3_slices"].is_array())
        throw Error(ErrorKind::MalformedData, path.string() + ": missing l3_slices array");
    std::vector<int> out;
    for (const auto& v : doc["l3_slices"]) {
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw Error(ErrorKind::MalformedData, path.string() + ": l3_slices must be non-negative integers");
        out.push_back(v.get<int>());
    }
    if (out.empty())
        throw Error(ErrorKind::LabelAbsent, path.string() + ": empty l3_slices");
    return out;
}

}  // namespace bodycomp
