#pragma once

#include <stdexcept>
#include <string>

namespace spnet {

// Base of every error the library throws. Callers that only care about
// success/failure catch this; the CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPNET_DEFINE_ERROR(Name)               \
  class Name : public Error {                  \
   public:                                     \
    using Error::Error;                        \
  }

// tensor-core
SPNET_DEFINE_ERROR(InvalidShapeError);

// spnet-arch
SPNET_DEFINE_ERROR(ConstructionError);
SPNET_DEFINE_ERROR(IoError);
SPNET_DEFINE_ERROR(CorruptMagicError);
SPNET_DEFINE_ERROR(VersionMismatchError);
SPNET_DEFINE_ERROR(TruncatedFileError);

// training
SPNET_DEFINE_ERROR(InvalidAnnotationError);
SPNET_DEFINE_ERROR(TooFewSamplesError);
SPNET_DEFINE_ERROR(UnannotatedSampleError);
SPNET_DEFINE_ERROR(NonFiniteLossError);
SPNET_DEFINE_ERROR(SpecMismatchError);

// data
SPNET_DEFINE_ERROR(MissingManifestError);
SPNET_DEFINE_ERROR(UnreadableImageError);
SPNET_DEFINE_ERROR(InvalidParamsError);
SPNET_DEFINE_ERROR(InvalidTargetError);

// poincare-baseline
SPNET_DEFINE_ERROR(TooSmallImageError);
SPNET_DEFINE_ERROR(BorderBlockError);

// eval
SPNET_DEFINE_ERROR(EmptyResultsError);

#undef SPNET_DEFINE_ERROR

// Manifest parse failure; carries the 1-based line number of the offending row
// (the header is line 1).
class MalformedRowError : public Error {
 public:
  MalformedRowError(std::size_t row, const std::string& what)
      : Error("ground_truth.csv row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace spnet
