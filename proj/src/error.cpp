#include "mixens/error.hpp"

namespace mixens {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroMass: return "ZeroMass";
    case ErrorKind::NegativeEntry: return "NegativeEntry";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::VocabMismatch: return "VocabMismatch";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::OrderTooLargeForCorpus: return "OrderTooLargeForCorpus";
    case ErrorKind::CacheDesync: return "CacheDesync";
    case ErrorKind::GapError: return "GapError";
    case ErrorKind::RemoteError: return "RemoteError";
    case ErrorKind::ContainmentViolated: return "ContainmentViolated";
    case ErrorKind::LambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorKind::GreedyUnsupported: return "GreedyUnsupported";
    case ErrorKind::PromptNotRepresentable: return "PromptNotRepresentable";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ContainmentViolated:
      return 3;
    case ErrorKind::ZeroMass:
    case ErrorKind::NegativeEntry:
    case ErrorKind::InvalidDistribution:
    case ErrorKind::VocabMismatch:
    case ErrorKind::EmptyCorpus:
    case ErrorKind::OrderTooLargeForCorpus:
    case ErrorKind::LambdaOutOfRange:
    case ErrorKind::GreedyUnsupported:
    case ErrorKind::PromptNotRepresentable:
    case ErrorKind::InvalidConfig:
      return 2;
    case ErrorKind::CacheDesync:
    case ErrorKind::GapError:
    case ErrorKind::RemoteError:
    case ErrorKind::Io:
      return 1;
  }
  return 1;
}

}  // namespace mixens
