#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mlfa {

/// Base for all named errors. `name()` is stable and machine-checkable;
/// `what()` prepends it to the detail message.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& detail)
      : std::runtime_error(detail.empty() ? name : name + ": " + detail),
        name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define MLFA_DEFINE_ERROR(NAME)                       \
  class NAME : public Error {                         \
   public:                                            \
    explicit NAME(const std::string& detail = "")     \
        : Error(#NAME, detail) {}                     \
  };

// dsp
MLFA_DEFINE_ERROR(AudioTooShort)
MLFA_DEFINE_ERROR(AudioTooLong)
MLFA_DEFINE_ERROR(BadSampleRate)

// encoders / matcher
MLFA_DEFINE_ERROR(ShapeMismatch)
MLFA_DEFINE_ERROR(UnknownPhonemeId)
MLFA_DEFINE_ERROR(OddDim)
MLFA_DEFINE_ERROR(EmptyBatch)
MLFA_DEFINE_ERROR(NotSquare)

// alignment
MLFA_DEFINE_ERROR(InfeasibleTarget)

// losses
MLFA_DEFINE_ERROR(LengthMismatch)
MLFA_DEFINE_ERROR(NonFiniteTerm)

// trainkit
MLFA_DEFINE_ERROR(BadConfig)
MLFA_DEFINE_ERROR(DataExhausted)
MLFA_DEFINE_ERROR(NonFiniteLoss)
MLFA_DEFINE_ERROR(BadMagic)
MLFA_DEFINE_ERROR(CrcMismatch)
MLFA_DEFINE_ERROR(VersionUnsupported)
MLFA_DEFINE_ERROR(BadCheckpoint)

// datakit
MLFA_DEFINE_ERROR(BadFormat)
MLFA_DEFINE_ERROR(NotMono)
MLFA_DEFINE_ERROR(OutOfVocabulary)
MLFA_DEFINE_ERROR(InsufficientKeywords)

// evalkit
MLFA_DEFINE_ERROR(DegenerateLabels)
MLFA_DEFINE_ERROR(NoNegatives)
MLFA_DEFINE_ERROR(InconsistentCandidates)
MLFA_DEFINE_ERROR(IoError)

#undef MLFA_DEFINE_ERROR

}  // namespace mlfa
