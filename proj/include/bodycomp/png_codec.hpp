#pragma once

#include <cstdint>

#include "bodycomp/bytes.hpp"
#include "bodycomp/grid.hpp"

namespace bodycomp {

/// 8-bit grayscale, non-interlaced PNG.
Bytes encode_png_gray8(const Grid<std::uint8_t>& image);

/// Decodes an 8-bit grayscale PNG. Throws MalformedData for anything else.
Grid<std::uint8_t> decode_png_gray8(ByteView png);

}  // namespace bodycomp
