#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <tuple>
#include <unistd.h>
#include <vector>

#include "bodycomp/bytes.hpp"
#include "bodycomp/phantom.hpp"

namespace testsupport {

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t")
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("bodycomp_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

/// 112x112 phantom at 0.8 mm with a 30/40 mm annulus and 12 slices; quick to generate.
inline bodycomp::PhantomSpec small_phantom(std::uint64_t seed = 1)
{
    bodycomp::PhantomSpec s;
    s.rows = 112;
    s.cols = 112;
    s.spacing_mm = 0.8;
    s.inner_radius_mm = 30.0;
    s.outer_radius_mm = 40.0;
    s.bone_radius_mm = 10.0;
    s.slice_count = 12;
    s.l3_first = 3;
    s.l3_last = 8;
    s.member_count = 4;
    s.seed = seed;
    return s;
}

/// Hand-rolled little-endian DICOM writer, kept apart from the library serializer so the
/// parser can be checked against an independent encoder.
class DicomBuilder {
public:
    struct Element {
        std::uint16_t group;
        std::uint16_t element;
        std::string vr;
        bodycomp::Bytes value;
    };

    DicomBuilder& str(std::uint16_t g, std::uint16_t e, const std::string& vr, std::string v)
    {
        if (v.size() % 2)
            v.push_back(vr == "UI" ? '\0' : ' ');
        elements_.push_back({g, e, vr, bodycomp::Bytes(v.begin(), v.end())});
        return *this;
    }
    DicomBuilder& us(std::uint16_t g, std::uint16_t e, std::uint16_t v)
    {
        elements_.push_back({g, e, "US", {static_cast<std::uint8_t>(v & 0xff), static_cast<std::uint8_t>(v >> 8)}});
        return *this;
    }
    DicomBuilder& raw(std::uint16_t g, std::uint16_t e, const std::string& vr, bodycomp::Bytes v)
    {
        elements_.push_back({g, e, vr, std::move(v)});
        return *this;
    }
    DicomBuilder& drop(std::uint16_t g, std::uint16_t e)
    {
        std::erase_if(elements_, [&](const Element& el) { return el.group == g && el.element == e; });
        return *this;
    }

    /// CT-like object with rows x cols 16-bit stored values.
    static DicomBuilder ct(std::uint16_t rows, std::uint16_t cols, const std::vector<std::uint16_t>& stored,
                           const std::string& slope = "1", const std::string& intercept = "-1024")
    {
        DicomBuilder b;
        b.str(0x0008, 0x0020, "DA", "20200131")
            .str(0x0008, 0x1030, "LO", "CT ABDOMEN")
            .str(0x0008, 0x103E, "LO", "AXIAL VENOUS")
            .str(0x0010, 0x0020, "LO", "P1")
            .str(0x0018, 0x0050, "DS", "2.5")
            .str(0x0020, 0x000D, "UI", "1.2.3")
            .str(0x0020, 0x000E, "UI", "1.2.3.4")
            .str(0x0020, 0x0011, "IS", "7")
            .str(0x0020, 0x0012, "IS", "1")
            .str(0x0020, 0x0013, "IS", "5")
            .str(0x0020, 0x0032, "DS", "-10\\-20.5\\30")
            .str(0x0020, 0x0037, "DS", "1\\0\\0\\0\\1\\0")
            .str(0x0020, 0x0052, "UI", "1.2.3.5")
            .us(0x0028, 0x0002, 1)
            .us(0x0028, 0x0010, rows)
            .us(0x0028, 0x0011, cols)
            .str(0x0028, 0x0030, "DS", "0.7\\0.8")
            .us(0x0028, 0x0100, 16)
            .us(0x0028, 0x0101, 16)
            .us(0x0028, 0x0102, 15)
            .us(0x0028, 0x0103, 0)
            .str(0x0028, 0x1052, "DS", intercept)
            .str(0x0028, 0x1053, "DS", slope);
        bodycomp::Bytes px;
        for (auto v : stored) {
            px.push_back(static_cast<std::uint8_t>(v & 0xff));
            px.push_back(static_cast<std::uint8_t>(v >> 8));
        }
        b.raw(0x7FE0, 0x0010, "OW", px);
        return b;
    }

    /// `syntax` empty writes a bare data set; otherwise a Part 10 file with that transfer syntax.
    bodycomp::Bytes build(bool explicit_vr, const std::string& syntax = "1.2.840.10008.1.2.1") const
    {
        bodycomp::Bytes out;
        if (!syntax.empty()) {
            out.assign(128, 0);
            for (char c : std::string("DICM"))
                out.push_back(static_cast<std::uint8_t>(c));
            bodycomp::Bytes meta;
            std::string ts = syntax;
            if (ts.size() % 2)
                ts.push_back('\0');
            put_element(meta, {0x0002, 0x0010, "UI", bodycomp::Bytes(ts.begin(), ts.end())}, true);
            bodycomp::Bytes len(4);
            const auto n = static_cast<std::uint32_t>(meta.size());
            std::memcpy(len.data(), &n, 4);
            put_element(out, {0x0002, 0x0000, "UL", len}, true);
            out.insert(out.end(), meta.begin(), meta.end());
        }
        auto sorted = elements_;
        std::stable_sort(sorted.begin(), sorted.end(), [](const Element& a, const Element& b) {
            return std::tie(a.group, a.element) < std::tie(b.group, b.element);
        });
        for (const auto& el : sorted)
            put_element(out, el, explicit_vr);
        return out;
    }

private:
    static void put16(bodycomp::Bytes& out, std::uint16_t v)
    {
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    static void put32(bodycomp::Bytes& out, std::uint32_t v)
    {
        put16(out, static_cast<std::uint16_t>(v & 0xffff));
        put16(out, static_cast<std::uint16_t>(v >> 16));
    }
    static void put_element(bodycomp::Bytes& out, const Element& el, bool explicit_vr)
    {
        put16(out, el.group);
        put16(out, el.element);
        const auto n = static_cast<std::uint32_t>(el.value.size());
        if (explicit_vr) {
            out.push_back(static_cast<std::uint8_t>(el.vr[0]));
            out.push_back(static_cast<std::uint8_t>(el.vr[1]));
            if (el.vr == "OB" || el.vr == "OW" || el.vr == "SQ" || el.vr == "UN" || el.vr == "UT") {
                put16(out, 0);
                put32(out, n);
            } else {
                put16(out, static_cast<std::uint16_t>(n));
            }
        } else {
            put32(out, n);
        }
        out.insert(out.end(), el.value.begin(), el.value.end());
    }

    std::vector<Element> elements_;
};

}  // namespace testsupport
