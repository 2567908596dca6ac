#include "refacer/error.hpp"

namespace refacer {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::WrongMagic: return "WrongMagic";
    case ErrorKind::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorKind::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorKind::TruncatedData: return "TruncatedData";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::DimsTooSmall: return "DimsTooSmall";
    case ErrorKind::EmptyHead: return "EmptyHead";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::SpecTooLarge: return "SpecTooLarge";
    case ErrorKind::DegenerateVolume: return "DegenerateVolume";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonScalarLoss: return "NonScalarLoss";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::TruncatedRecord: return "TruncatedRecord";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::TooSmall: return "TooSmall";
    case ErrorKind::IncompleteTriple: return "IncompleteTriple";
    case ErrorKind::UnknownFlag: return "UnknownFlag";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

}  // namespace refacer
