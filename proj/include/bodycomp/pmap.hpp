#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bodycomp/bytes.hpp"
#include "bodycomp/mask_fusion.hpp"

namespace bodycomp {

/// One member's probability raster: "PMAP", u32 rows, u32 cols, u32 member_index,
/// then rows*cols little-endian float32 values, row-major.
struct ProbabilityMapFile {
    std::uint32_t member_index = 0;
    Grid<float> probabilities;
};

Bytes serialize_pmap(const Grid<float>& probabilities, std::uint32_t member_index);
/// Throws BadMagic, TruncatedElement, DomainError.
ProbabilityMapFile parse_pmap(ByteView bytes);

/// `<root>/<series_uid>/<slice_index>/`
std::filesystem::path pmap_slice_dir(const std::filesystem::path& root, const std::string& series_uid, int slice_index);

void write_stack(const std::filesystem::path& root, const std::string& series_uid, int slice_index,
                 const ProbabilityStack& stack);

/// Loads every *.pmap of one slice ordered by member index. With `folds > 0` member index
/// m*folds + k is read as fold k of pass m. Throws MissingProbabilityMaps when none exist.
ProbabilityStack load_stack(const std::filesystem::path& root, const std::string& series_uid, int slice_index,
                            std::size_t folds = 0);

}  // namespace bodycomp
