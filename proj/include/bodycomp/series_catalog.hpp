#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bodycomp/dicom.hpp"

namespace bodycomp {

enum class View { Axial, NonAxial };

std::string_view to_string(View view) noexcept;

/// Axial iff |(row x col) . z| >= 0.9. Throws DegenerateOrientation when the cosines are parallel.
View classify_orientation(const std::array<double, 6>& orientation);

std::array<double, 3> slice_normal(const std::array<double, 6>& orientation);

struct SeriesKey {
    std::string study_uid;
    std::string series_uid;
    std::string frame_of_reference_uid;
    std::optional<int> acquisition_number;
    std::optional<double> slice_thickness_mm;
    /// Sub-group index when one key holds several pixel geometries or repeated positions.
    int split = 0;

    friend auto operator<=>(const SeriesKey&, const SeriesKey&) = default;
};

struct SeriesGroup {
    SeriesKey key;
    View view = View::Axial;
    /// Ascending along the slice normal (inferior to superior for axial LPS data).
    std::vector<CtSlice> slices;

    const SliceHeader& front_header() const { return slices.front().header; }
};

struct SeriesCatalog {
    std::vector<SeriesGroup> series;
};

/// Groups, splits and sorts slices. Throws EmptyInput or ConflictingGeometry.
SeriesCatalog build_catalog(std::vector<CtSlice> slices);

/// Projection of the slice position onto the slice normal, in mm.
double position_along_normal(const SliceHeader& header);

enum class SeriesChoiceReason { DescriptionMatch, MostSlices };

std::string_view to_string(SeriesChoiceReason reason) noexcept;

struct SeriesChoice {
    std::size_t index = 0;
    SeriesChoiceReason reason = SeriesChoiceReason::MostSlices;
};

/// Axial series whose description matches `pattern` (case-insensitive ECMAScript regex),
/// falling back to the axial series with the most slices. nullopt when no axial series exists.
std::optional<SeriesChoice> choose_series(const SeriesCatalog& catalog, const std::string& pattern);

}  // namespace bodycomp
