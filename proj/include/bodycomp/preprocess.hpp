#pragma once

#include <cstdint>

#include "bodycomp/dicom.hpp"

namespace bodycomp {

inline constexpr double kMuscleHuLow = -29.0;
inline constexpr double kMuscleHuHigh = 150.0;

struct WindowedSlice {
    Grid<double> hu_clamped;
    SliceHeader source;
    double lo = kMuscleHuLow;
    double hi = kMuscleHuHigh;
};

struct NormalizedSlice {
    Grid<double> z;
    /// Set when the windowed input had zero variance; z is then all zeros.
    bool constant = false;
};

WindowedSlice window_hu(const CtSlice& slice, double lo = kMuscleHuLow, double hi = kMuscleHuHigh);

/// Per-image z-score with the population standard deviation.
NormalizedSlice normalize(const WindowedSlice& w);

/// Linear window-to-8-bit map, round half away from zero.
Grid<std::uint8_t> quantize_window(const WindowedSlice& w);

Bytes export_png(const WindowedSlice& w);

}  // namespace bodycomp
