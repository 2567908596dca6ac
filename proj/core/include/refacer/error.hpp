#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace refacer {

enum class ErrorKind {
  // volume-io
  WrongMagic,
  UnsupportedDatatype,
  UnsupportedFeature,
  TruncatedData,
  NonFinite,
  IoFailure,
  // phantom
  DimsTooSmall,
  // anonymize
  EmptyHead,
  DimMismatch,
  // slicing
  EmptyInput,
  SpecTooLarge,
  DegenerateVolume,
  // autodiff
  ShapeMismatch,
  NonScalarLoss,
  // cyclegan
  EmptyDataset,
  SizeMismatch,
  BadMagic,
  VersionMismatch,
  TruncatedRecord,
  // metrics
  ZeroVariance,
  TooSmall,
  IncompleteTriple,
  // cli
  UnknownFlag,
  MissingInput,
  ConfigParse,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure in the library surfaces as this exception; `kind()` is the
/// machine-readable part, `what()` carries "<Kind>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace refacer
