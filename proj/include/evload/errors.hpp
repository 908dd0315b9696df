#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace evload {

// Base class of all domain errors. code() is a stable machine-readable name;
// the CLI prints it and maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Usage and environment problems (unreadable file, bad config). Reported with
// exit code 2 rather than 1.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("IoError", msg) {}
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& msg) : Error("InvalidConfig", msg) {}
};

#define EVLOAD_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& msg) : Error(#Name, msg) {}   \
  }

// ingest
EVLOAD_DEFINE_ERROR(MalformedHeader);
EVLOAD_DEFINE_ERROR(EmptyInput);
EVLOAD_DEFINE_ERROR(DuplicateTimestamp);
EVLOAD_DEFINE_ERROR(MisalignedTimestamp);
EVLOAD_DEFINE_ERROR(AllMissing);

// features
EVLOAD_DEFINE_ERROR(EmptySeries);
EVLOAD_DEFINE_ERROR(LengthMismatch);
EVLOAD_DEFINE_ERROR(WindowTooLarge);

// spectral
EVLOAD_DEFINE_ERROR(LengthTooShort);
EVLOAD_DEFINE_ERROR(NoPeaks);

// model
EVLOAD_DEFINE_ERROR(InvalidDims);
EVLOAD_DEFINE_ERROR(ShapeMismatch);
EVLOAD_DEFINE_ERROR(NonFiniteInput);
EVLOAD_DEFINE_ERROR(NonFiniteGradient);
EVLOAD_DEFINE_ERROR(MissingCheckpoint);

// training data
EVLOAD_DEFINE_ERROR(SeriesTooShort);
EVLOAD_DEFINE_ERROR(EmptySplit);
EVLOAD_DEFINE_ERROR(InvalidSize);

// evaluation
EVLOAD_DEFINE_ERROR(ZeroVariance);

// grid validation
EVLOAD_DEFINE_ERROR(ProfileMismatch);

#undef EVLOAD_DEFINE_ERROR

// Power flow failed to reach the mismatch tolerance. Carries the last
// mismatch and the iteration count for diagnostics.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& msg, double final_mismatch, int iterations)
      : Error("NonConvergence", msg),
        final_mismatch_(final_mismatch),
        iterations_(iterations) {}

  double final_mismatch() const noexcept { return final_mismatch_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double final_mismatch_;
  int iterations_;
};

}  // namespace evload
