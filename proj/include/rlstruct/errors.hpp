#pragma once

#include <stdexcept>
#include <string>

namespace rlstruct {

// Base for every error raised by the library. error_class() is the stable,
// machine-readable name printed by the CLI and returned by the service.
class Error : public std::runtime_error {
 public:
  Error(std::string error_class, const std::string& message)
      : std::runtime_error(message), class_(std::move(error_class)) {}
  const std::string& error_class() const { return class_; }

 private:
  std::string class_;
};

#define RLSTRUCT_ERROR(Name)                                                  \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& message) : Error(#Name, message) {}      \
  };

RLSTRUCT_ERROR(SyntaxError)
RLSTRUCT_ERROR(ConstraintError)
RLSTRUCT_ERROR(UnknownToken)
RLSTRUCT_ERROR(LengthMismatch)
RLSTRUCT_ERROR(GroupTooSmall)
RLSTRUCT_ERROR(VocabOverflow)
RLSTRUCT_ERROR(NonFiniteLoss)
RLSTRUCT_ERROR(ConfigError)
RLSTRUCT_ERROR(EmptyCorpus)
RLSTRUCT_ERROR(JudgeUnavailable)
RLSTRUCT_ERROR(UnknownSchema)
RLSTRUCT_ERROR(CheckpointError)
RLSTRUCT_ERROR(IoError)

#undef RLSTRUCT_ERROR

}  // namespace rlstruct
