#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bodycomp {

/// Typed failure reasons. The name of each kind is what lands in errors.csv.
enum class ErrorKind {
    // ingestion
    UnsupportedTransferSyntax,
    MissingRequiredTag,
    TruncatedElement,
    MalformedData,
    BadMagic,
    UnsupportedDatatype,
    DimensionMismatch,
    // geometry / catalog
    DegenerateOrientation,
    EmptyInput,
    ConflictingGeometry,
    GeometryMismatch,
    LabelAbsent,
    // fusion / metrics
    EmptyReference,
    MissingSpacing,
    HeightOutOfRange,
    EmptyWindow,
    RaggedStack,
    LayoutMismatch,
    MissingProbabilityMaps,
    // numerics
    DomainError,
    LengthMismatch,
    SingleClass,
    NonConvergence,
    Unfitted,
    ConstantInput,
    NoEvents,
    Collinearity,
    NoAdmissiblePairs,
    OutOfRange,
    ShapeMismatch,
    NonFiniteLoss,
    TooFewMinority,
    // harness
    InvalidSpec,
    InvalidConfig,
    UnknownPatient,
    NoStudiesFound,
    NoAxialSeries,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace bodycomp
