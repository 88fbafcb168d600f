#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnrl {

// Base of every error raised by the library. Subclasses carry the
// category; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PNRL_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  };

PNRL_DEFINE_ERROR(SteppedAfterDone)
PNRL_DEFINE_ERROR(IndexOutOfRange)
PNRL_DEFINE_ERROR(UnknownEnv)
PNRL_DEFINE_ERROR(InvalidObservation)
PNRL_DEFINE_ERROR(SpaceMismatch)
PNRL_DEFINE_ERROR(NonFiniteGradient)
PNRL_DEFINE_ERROR(NotSupported)
PNRL_DEFINE_ERROR(LengthMismatch)
PNRL_DEFINE_ERROR(ChecksumMismatch)
PNRL_DEFINE_ERROR(VersionUnsupported)
PNRL_DEFINE_ERROR(ShapeMismatch)
PNRL_DEFINE_ERROR(MalformedFile)
PNRL_DEFINE_ERROR(UpdatesEnabledInEval)
PNRL_DEFINE_ERROR(IoError)

#undef PNRL_DEFINE_ERROR

class InvalidAction : public Error {
 public:
  InvalidAction(std::size_t agent, const std::string& msg)
      : Error("InvalidAction(" + std::to_string(agent) + "): " + msg), agent_(agent) {}
  std::size_t agent() const { return agent_; }

 private:
  std::size_t agent_;
};

struct Diagnostic {
  std::string field;
  std::string message;
};

// Configuration rejected; one diagnostic per offending field.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics)
      : Error(render(diagnostics)), diagnostics_(std::move(diagnostics)) {}
  ConfigError(std::string field, std::string message)
      : ConfigError(std::vector<Diagnostic>{{std::move(field), std::move(message)}}) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string render(const std::vector<Diagnostic>& diags) {
    std::string out = "InvalidConfig:";
    for (const auto& d : diags) out += " [" + d.field + "] " + d.message + ";";
    return out;
  }
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace pnrl
