#ifndef TUMORSCOPE_ERROR_HPP
#define TUMORSCOPE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace tumorscope {

enum class Errc {
  // nifti-io
  BadMagic,
  BadHeader,
  UnsupportedFormat,
  UnsupportedDatatype,
  TruncatedData,
  NonFiniteVoxel,
  GapTooSmall,
  // fcm-core
  TooFewPoints,
  NonFiniteInput,
  EmptyCluster,
  BadIndex,
  BadParams,
  // atlas
  ManifestMissing,
  BadManifest,
  MaskDecode,
  MaskDimensionMismatch,
  DuplicateKey,
  BadAreaId,
  DimMismatch,
  // pipeline
  NoCandidate,
  IoFailure,
  InputMissing,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadHeader: return "BadHeader";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::UnsupportedDatatype: return "UnsupportedDatatype";
    case Errc::TruncatedData: return "TruncatedData";
    case Errc::NonFiniteVoxel: return "NonFiniteVoxel";
    case Errc::GapTooSmall: return "GapTooSmall";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::EmptyCluster: return "EmptyCluster";
    case Errc::BadIndex: return "BadIndex";
    case Errc::BadParams: return "BadParams";
    case Errc::ManifestMissing: return "ManifestMissing";
    case Errc::BadManifest: return "BadManifest";
    case Errc::MaskDecode: return "MaskDecode";
    case Errc::MaskDimensionMismatch: return "MaskDimensionMismatch";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::BadAreaId: return "BadAreaId";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::NoCandidate: return "NoCandidate";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InputMissing: return "InputMissing";
  }
  return "Unknown";
}

/// Typed failure raised by every tumorscope operation.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace tumorscope

#endif  // TUMORSCOPE_ERROR_HPP
