#include "bodycomp/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "bodycomp/error.hpp"
#include "bodycomp/png_codec.hpp"

namespace bodycomp {

WindowedSlice window_hu(const CtSlice& slice, double lo, double hi)
{
    if (!(lo < hi))
        throw Error(ErrorKind::DomainError, "window requires lo < hi");
    WindowedSlice w;
    w.source = slice.header;
    w.lo = lo;
    w.hi = hi;
    w.hu_clamped = slice.hu;
    for (double& v : w.hu_clamped)
        v = std::clamp(v, lo, hi);
    return w;
}

NormalizedSlice normalize(const WindowedSlice& w)
{
    NormalizedSlice out;
    out.z = Grid<double>(w.hu_clamped.rows(), w.hu_clamped.cols(), 0.0);
    const std::size_t n = w.hu_clamped.size();
    if (n == 0) {
        out.constant = true;
        return out;
    }
    double mean = 0.0;
    for (double v : w.hu_clamped)
        mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : w.hu_clamped)
        ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        out.constant = true;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i)
        out.z[i] = (w.hu_clamped[i] - mean) / sd;
    return out;
}

Grid<std::uint8_t> quantize_window(const WindowedSlice& w)
{
    Grid<std::uint8_t> gray(w.hu_clamped.rows(), w.hu_clamped.cols());
    const double scale = 255.0 / (w.hi - w.lo);
    for (std::size_t i = 0; i < gray.size(); ++i) {
        const double level = std::round((std::clamp(w.hu_clamped[i], w.lo, w.hi) - w.lo) * scale);
        gray[i] = static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
    }
    return gray;
}

Bytes export_png(const WindowedSlice& w)
{
    return encode_png_gray8(quantize_window(w));
}

}  // namespace bodycomp
