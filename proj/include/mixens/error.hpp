#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mixens {

enum class ErrorKind {
  ZeroMass,
  NegativeEntry,
  InvalidDistribution,
  VocabMismatch,
  EmptyCorpus,
  OrderTooLargeForCorpus,
  CacheDesync,
  GapError,
  RemoteError,
  ContainmentViolated,
  LambdaOutOfRange,
  GreedyUnsupported,
  PromptNotRepresentable,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Process exit code for an error kind: 1 runtime, 2 configuration, 3 violated
// mathematical precondition.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mixens
