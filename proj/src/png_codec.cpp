#include "bodycomp/png_codec.hpp"

#include <csetjmp>
#include <cstring>
#include <string>

#include <png.h>

#include "bodycomp/error.hpp"

namespace bodycomp {

namespace {

// libpng reports errors through longjmp; the C-style helpers below keep no
// non-trivially-destructible objects alive across setjmp.

struct WriteSink {
    Bytes* out;
};

void write_callback(png_structp png, png_bytep data, png_size_t length)
{
    auto* sink = static_cast<WriteSink*>(png_get_io_ptr(png));
    sink->out->insert(sink->out->end(), data, data + length);
}

void flush_callback(png_structp) {}

struct ReadSource {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

void read_callback(png_structp png, png_bytep out, png_size_t length)
{
    auto* src = static_cast<ReadSource*>(png_get_io_ptr(png));
    if (src->pos + length > src->size)
        png_error(png, "truncated PNG stream");
    std::memcpy(out, src->data + src->pos, length);
    src->pos += length;
}

void silent_warning(png_structp, png_const_charp) {}

bool encode_impl(const Grid<std::uint8_t>& image, Bytes& out)
{
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, silent_warning);
    if (!png)
        return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    WriteSink sink{&out};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, &sink, write_callback, flush_callback);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols()), static_cast<png_uint_32>(image.rows()), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < image.rows(); ++r)
        png_write_row(png, const_cast<png_bytep>(image.values().data() + r * image.cols()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

bool decode_impl(ReadSource* src, std::uint8_t* pixels, png_uint_32* width, png_uint_32* height, bool header_only,
                 const char** why)
{
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, silent_warning);
    if (!png)
        return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, src, read_callback);
    png_read_info(png, info);
    int bit_depth = 0, color_type = 0, interlace = 0;
    png_get_IHDR(png, info, width, height, &bit_depth, &color_type, &interlace, nullptr, nullptr);
    if (bit_depth != 8 || color_type != PNG_COLOR_TYPE_GRAY || interlace != PNG_INTERLACE_NONE) {
        *why = "not an 8-bit non-interlaced grayscale PNG";
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    if (header_only) {
        png_destroy_read_struct(&png, &info, nullptr);
        return true;
    }
    for (png_uint_32 r = 0; r < *height; ++r)
        png_read_row(png, pixels + static_cast<std::size_t>(r) * *width, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

}  // namespace

Bytes encode_png_gray8(const Grid<std::uint8_t>& image)
{
    if (image.empty())
        throw Error(ErrorKind::DimensionMismatch, "cannot encode an empty image");
    Bytes out;
    if (!encode_impl(image, out))
        throw Error(ErrorKind::IoError, "PNG encoding failed");
    return out;
}

Grid<std::uint8_t> decode_png_gray8(ByteView png)
{
    const char* why = "corrupt PNG stream";
    png_uint_32 width = 0, height = 0;
    ReadSource header{png.data(), png.size(), 0};
    if (!decode_impl(&header, nullptr, &width, &height, true, &why))
        throw Error(ErrorKind::MalformedData, why);
    Grid<std::uint8_t> image(height, width);
    ReadSource body{png.data(), png.size(), 0};
    if (!decode_impl(&body, image.values().data(), &width, &height, false, &why))
        throw Error(ErrorKind::MalformedData, why);
    return image;
}

}  // namespace bodycomp
