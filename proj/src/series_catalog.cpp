#include "bodycomp/series_catalog.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>

#include "bodycomp/error.hpp"

namespace bodycomp {

std::string_view to_string(View view) noexcept
{
    return view == View::Axial ? "axial" : "non_axial";
}

std::string_view to_string(SeriesChoiceReason reason) noexcept
{
    return reason == SeriesChoiceReason::DescriptionMatch ? "description_match" : "most_slices";
}

std::array<double, 3> slice_normal(const std::array<double, 6>& o)
{
    return {o[1] * o[5] - o[2] * o[4], o[2] * o[3] - o[0] * o[5], o[0] * o[4] - o[1] * o[3]};
}

View classify_orientation(const std::array<double, 6>& orientation)
{
    for (int axis = 0; axis < 2; ++axis) {
        const double* c = orientation.data() + 3 * axis;
        if (std::abs(std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) - 1.0) > 1e-3)
            throw Error(ErrorKind::DomainError, "direction cosines are not unit length");
    }
    const auto n = slice_normal(orientation);
    const double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if (norm < 1e-6)
        throw Error(ErrorKind::DegenerateOrientation, "row and column cosines are parallel");
    return std::abs(n[2]) >= 0.9 ? View::Axial : View::NonAxial;
}

double position_along_normal(const SliceHeader& h)
{
    const auto n = slice_normal(h.image_orientation);
    const double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    const auto& p = h.image_position_mm;
    return (p[0] * n[0] + p[1] * n[1] + p[2] * n[2]) / norm;
}

namespace {

bool same_geometry(const SliceHeader& a, const SliceHeader& b)
{
    if (a.rows != b.rows || a.columns != b.columns)
        return false;
    if (std::abs(a.pixel_spacing_row_mm - b.pixel_spacing_row_mm) > 1e-6 ||
        std::abs(a.pixel_spacing_col_mm - b.pixel_spacing_col_mm) > 1e-6)
        return false;
    for (std::size_t i = 0; i < 6; ++i)
        if (std::abs(a.image_orientation[i] - b.image_orientation[i]) > 1e-4)
            return false;
    return true;
}

struct Entry {
    CtSlice slice;
    double position;
    int instance;
};

bool entry_less(const Entry& a, const Entry& b)
{
    if (a.position != b.position)
        return a.position < b.position;
    return a.instance < b.instance;
}

}  // namespace

SeriesCatalog build_catalog(std::vector<CtSlice> slices)
{
    if (slices.empty())
        throw Error(ErrorKind::EmptyInput, "no slices to catalog");

    std::map<SeriesKey, std::vector<Entry>> by_key;
    for (CtSlice& s : slices) {
        SeriesKey key{s.header.study_uid, s.header.series_uid, s.header.frame_of_reference_uid,
                      s.header.acquisition_number, s.header.slice_thickness_mm, 0};
        const double pos = position_along_normal(s.header);
        const int instance = s.header.instance_number.value_or(0);
        by_key[key].push_back({std::move(s), pos, instance});
    }

    SeriesCatalog catalog;
    for (auto& [key, entries] : by_key) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.instance < b.instance; });

        // geometry classes, in order of first appearance along the instance sequence
        std::vector<std::vector<Entry>> classes;
        std::vector<std::size_t> class_of(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            std::size_t c = 0;
            while (c < classes.size() && !same_geometry(classes[c].front().slice.header, entries[i].slice.header))
                ++c;
            if (c == classes.size())
                classes.emplace_back();
            class_of[i] = c;
            classes[c].push_back(entries[i]);
        }
        // a class that reappears after another class started cannot be split by instance blocks
        if (classes.size() > 1) {
            for (std::size_t i = 1; i < entries.size(); ++i) {
                if (class_of[i] < class_of[i - 1])
                    throw Error(ErrorKind::ConflictingGeometry, key.series_uid);
            }
        }

        int split = 0;
        for (auto& members : classes) {
            std::sort(members.begin(), members.end(), entry_less);
            // repeated positions become their own group: the k-th occurrence goes to repeat k
            std::vector<std::vector<Entry>> repeats;
            for (std::size_t i = 0; i < members.size();) {
                std::size_t j = i;
                while (j < members.size() && members[j].position == members[i].position)
                    ++j;
                for (std::size_t r = 0; r < j - i; ++r) {
                    if (repeats.size() <= r)
                        repeats.emplace_back();
                    repeats[r].push_back(std::move(members[i + r]));
                }
                i = j;
            }
            for (auto& group_entries : repeats) {
                SeriesGroup group;
                group.key = key;
                group.key.split = split++;
                group.view = classify_orientation(group_entries.front().slice.header.image_orientation);
                group.slices.reserve(group_entries.size());
                for (Entry& e : group_entries)
                    group.slices.push_back(std::move(e.slice));
                catalog.series.push_back(std::move(group));
            }
        }
    }
    return catalog;
}

std::optional<SeriesChoice> choose_series(const SeriesCatalog& catalog, const std::string& pattern)
{
    std::optional<SeriesChoice> best_match;
    std::optional<SeriesChoice> most_slices;
    std::optional<std::regex> re;
    if (!pattern.empty())
        re.emplace(pattern, std::regex::ECMAScript | std::regex::icase);

    for (std::size_t i = 0; i < catalog.series.size(); ++i) {
        const SeriesGroup& g = catalog.series[i];
        if (g.view != View::Axial)
            continue;
        const auto better = [&](const std::optional<SeriesChoice>& current) {
            return !current || g.slices.size() > catalog.series[current->index].slices.size();
        };
        if (re && std::regex_search(g.front_header().series_description, *re) && better(best_match))
            best_match = SeriesChoice{i, SeriesChoiceReason::DescriptionMatch};
        if (better(most_slices))
            most_slices = SeriesChoice{i, SeriesChoiceReason::MostSlices};
    }
    return best_match ? best_match : most_slices;
}

}  // namespace bodycomp
