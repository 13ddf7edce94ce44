#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bodycomp {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteView bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

/// Bounds-checked little-endian cursor; every overrun throws TruncatedElement.
class ByteReader {
public:
    explicit ByteReader(ByteView data, std::size_t offset = 0) : data_(data), pos_(offset) {}

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return pos_ <= data_.size() ? data_.size() - pos_ : 0; }
    bool at_end() const noexcept { return pos_ >= data_.size(); }

    void seek(std::size_t offset);
    void skip(std::size_t count);
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    float f32();
    ByteView take(std::size_t count);

private:
    void require(std::size_t count) const;

    ByteView data_;
    std::size_t pos_;
};

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void f32(float v);
    void raw(ByteView bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
    void raw(std::string_view text) { out_.insert(out_.end(), text.begin(), text.end()); }
    void zeros(std::size_t count) { out_.insert(out_.end(), count, 0); }

    std::size_t size() const noexcept { return out_.size(); }
    Bytes& buffer() noexcept { return out_; }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

/// gzip container helpers (zlib).
bool is_gzip(ByteView data) noexcept;
Bytes gzip_compress(ByteView data);
Bytes gzip_decompress(ByteView data);

/// Deterministic DICOM UID under the 2.25 root derived from a text seed.
std::string derived_uid(std::string_view seed);

}  // namespace bodycomp
