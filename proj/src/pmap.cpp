#include "bodycomp/pmap.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#include "bodycomp/error.hpp"

namespace bodycomp {

Bytes serialize_pmap(const Grid<float>& probabilities, std::uint32_t member_index)
{
    ByteWriter w;
    w.raw(std::string_view("PMAP"));
    w.u32(static_cast<std::uint32_t>(probabilities.rows()));
    w.u32(static_cast<std::uint32_t>(probabilities.cols()));
    w.u32(member_index);
    for (float v : probabilities)
        w.f32(v);
    return w.take();
}

ProbabilityMapFile parse_pmap(ByteView bytes)
{
    ByteReader r(bytes);
    const ByteView magic = r.take(4);
    if (std::memcmp(magic.data(), "PMAP", 4) != 0)
        throw Error(ErrorKind::BadMagic, "expected PMAP header");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    ProbabilityMapFile out;
    out.member_index = r.u32();
    const std::uint64_t count = std::uint64_t{rows} * cols;
    if (count == 0)
        throw Error(ErrorKind::DimensionMismatch, "empty probability map");
    if (count > r.remaining() / 4)
        throw Error(ErrorKind::TruncatedElement, "probability raster shorter than header claims");
    std::vector<float> values(static_cast<std::size_t>(count));
    for (float& v : values) {
        v = r.f32();
        if (!(v >= 0.0f && v <= 1.0f))
            throw Error(ErrorKind::DomainError, "probability outside [0,1]");
    }
    out.probabilities = Grid<float>(rows, cols, std::move(values));
    return out;
}

std::filesystem::path pmap_slice_dir(const std::filesystem::path& root, const std::string& series_uid, int slice_index)
{
    return root / series_uid / std::to_string(slice_index);
}

void write_stack(const std::filesystem::path& root, const std::string& series_uid, int slice_index,
                 const ProbabilityStack& stack)
{
    const auto dir = pmap_slice_dir(root, series_uid, slice_index);
    for (std::size_t i = 0; i < stack.member_count(); ++i)
        write_file(dir / (std::to_string(i) + ".pmap"), serialize_pmap(stack.maps()[i], static_cast<std::uint32_t>(i)));
}

ProbabilityStack load_stack(const std::filesystem::path& root, const std::string& series_uid, int slice_index,
                            std::size_t folds)
{
    const auto dir = pmap_slice_dir(root, series_uid, slice_index);
    std::vector<ProbabilityMapFile> files;
    std::error_code ec;
    if (std::filesystem::is_directory(dir, ec)) {
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".pmap")
                files.push_back(parse_pmap(read_file(entry.path())));
        }
    }
    if (files.empty())
        throw Error(ErrorKind::MissingProbabilityMaps, dir.string());
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.member_index < b.member_index; });
    for (std::size_t i = 1; i < files.size(); ++i)
        if (files[i].member_index == files[i - 1].member_index)
            throw Error(ErrorKind::MalformedData, "duplicate member index in " + dir.string());

    if (folds == 0) {
        std::vector<Grid<float>> maps;
        for (auto& f : files)
            maps.push_back(std::move(f.probabilities));
        return ProbabilityStack::flat(std::move(maps));
    }
    if (files.size() % folds != 0)
        throw Error(ErrorKind::RaggedStack, std::to_string(files.size()) + " maps do not split into " +
                                                std::to_string(folds) + " folds");
    std::vector<std::vector<Grid<float>>> iterations(files.size() / folds);
    for (std::size_t i = 0; i < files.size(); ++i)
        iterations[i / folds].push_back(std::move(files[i].probabilities));
    return ProbabilityStack::two_level(std::move(iterations));
}

}  // namespace bodycomp
