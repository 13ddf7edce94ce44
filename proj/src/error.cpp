#include "bodycomp/error.hpp"

namespace bodycomp {

std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::UnsupportedTransferSyntax: return "UnsupportedTransferSyntax";
    case ErrorKind::MissingRequiredTag: return "MissingRequiredTag";
    case ErrorKind::TruncatedElement: return "TruncatedElement";
    case ErrorKind::MalformedData: return "MalformedData";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateOrientation: return "DegenerateOrientation";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ConflictingGeometry: return "ConflictingGeometry";
    case ErrorKind::GeometryMismatch: return "GeometryMismatch";
    case ErrorKind::LabelAbsent: return "LabelAbsent";
    case ErrorKind::EmptyReference: return "EmptyReference";
    case ErrorKind::MissingSpacing: return "MissingSpacing";
    case ErrorKind::HeightOutOfRange: return "HeightOutOfRange";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::RaggedStack: return "RaggedStack";
    case ErrorKind::LayoutMismatch: return "LayoutMismatch";
    case ErrorKind::MissingProbabilityMaps: return "MissingProbabilityMaps";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::Unfitted: return "Unfitted";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::NoEvents: return "NoEvents";
    case ErrorKind::Collinearity: return "Collinearity";
    case ErrorKind::NoAdmissiblePairs: return "NoAdmissiblePairs";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::TooFewMinority: return "TooFewMinority";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::UnknownPatient: return "UnknownPatient";
    case ErrorKind::NoStudiesFound: return "NoStudiesFound";
    case ErrorKind::NoAxialSeries: return "NoAxialSeries";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
{
}

}  // namespace bodycomp
