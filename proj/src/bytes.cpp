#include "bodycomp/bytes.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <zlib.h>

#include "bodycomp/error.hpp"

namespace bodycomp {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, ByteView bytes)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(ErrorKind::IoError, "short write to " + path.string());
}

void write_text(const std::filesystem::path& path, std::string_view text)
{
    write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path)
{
    const Bytes bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

void ByteReader::require(std::size_t count) const
{
    if (pos_ > data_.size() || count > data_.size() - pos_)
        throw Error(ErrorKind::TruncatedElement,
                    "need " + std::to_string(count) + " bytes at offset " + std::to_string(pos_) +
                        ", have " + std::to_string(remaining()));
}

void ByteReader::seek(std::size_t offset)
{
    if (offset > data_.size())
        throw Error(ErrorKind::TruncatedElement, "seek past end to " + std::to_string(offset));
    pos_ = offset;
}

void ByteReader::skip(std::size_t count)
{
    require(count);
    pos_ += count;
}

std::uint8_t ByteReader::u8()
{
    require(1);
    return data_[pos_++];
}

std::uint16_t ByteReader::u16()
{
    require(2);
    const auto v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32()
{
    require(4);
    const std::uint32_t v = static_cast<std::uint32_t>(data_[pos_]) |
                            (static_cast<std::uint32_t>(data_[pos_ + 1]) << 8) |
                            (static_cast<std::uint32_t>(data_[pos_ + 2]) << 16) |
                            (static_cast<std::uint32_t>(data_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
}

float ByteReader::f32()
{
    return std::bit_cast<float>(u32());
}

ByteView ByteReader::take(std::size_t count)
{
    require(count);
    ByteView view = data_.subspan(pos_, count);
    pos_ += count;
    return view;
}

void ByteWriter::u16(std::uint16_t v)
{
    out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v)
{
    for (int shift = 0; shift < 32; shift += 8)
        out_.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
}

void ByteWriter::f32(float v)
{
    u32(std::bit_cast<std::uint32_t>(v));
}

bool is_gzip(ByteView data) noexcept
{
    return data.size() >= 2 && data[0] == 0x1F && data[1] == 0x8B;
}

Bytes gzip_compress(ByteView data)
{
    z_stream zs{};
    // windowBits 15 + 16 selects the gzip wrapper
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error(ErrorKind::IoError, "deflateInit2 failed");
    Bytes out(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
    zs.next_in = const_cast<Bytef*>(data.data());
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw Error(ErrorKind::IoError, "gzip compression failed");
    out.resize(zs.total_out);
    return out;
}

Bytes gzip_decompress(ByteView data)
{
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK)
        throw Error(ErrorKind::IoError, "inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(data.data());
    zs.avail_in = static_cast<uInt>(data.size());

    constexpr std::size_t kMaxOutput = std::size_t{1} << 31;
    Bytes out;
    std::uint8_t chunk[1 << 16];
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk;
        zs.avail_out = sizeof(chunk);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw Error(rc == Z_BUF_ERROR ? ErrorKind::TruncatedElement : ErrorKind::MalformedData,
                        "gzip stream is corrupt or truncated");
        }
        out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
        if (out.size() > kMaxOutput) {
            inflateEnd(&zs);
            throw Error(ErrorKind::MalformedData, "gzip payload exceeds 2 GiB");
        }
    }
    inflateEnd(&zs);
    return out;
}

std::string derived_uid(std::string_view seed)
{
    // two FNV-1a lanes give a ~128-bit decimal suffix; 2.25.<n> keeps it under 64 chars
    std::uint64_t h1 = 0xcbf29ce484222325ULL;
    std::uint64_t h2 = 0x84222325cbf29ce4ULL;
    for (unsigned char ch : seed) {
        h1 = (h1 ^ ch) * 0x100000001b3ULL;
        h2 = (h2 ^ static_cast<unsigned char>(ch + 0x5A)) * 0x100000001b3ULL;
    }
    return "2.25." + std::to_string(h1) + std::to_string(h2 % 100000000000ULL);
}

}  // namespace bodycomp
