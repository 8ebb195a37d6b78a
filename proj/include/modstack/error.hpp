#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace modstack {

enum class Errc {
  // keyspace
  EmptyKey,
  EmptyChunk,
  // fabric
  DuplicateNode,
  DanglingLink,
  InvalidLink,
  UnknownNode,
  UnknownSession,
  UnknownEndpoint,
  NotAPublisher,
  UnknownLink,
  TimeInPast,
  // assembly
  InvalidAssembly,
  // buildgraph
  CycleDetected,
  UnknownDependency,
  DuplicateTask,
  UnreadableWorkspace,
  // runtime
  UnknownCore,
  UnknownInjection,
  UnknownOverride,
  OverrideConflict,
  UnknownJoint,
  NonPositiveStep,
  UnknownFrame,
  MissingJointState,
  UnboundPoint,
  HandlerPanic,
  // launcher
  UnknownHost,
  // documents
  InvalidDocument,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::EmptyKey: return "EmptyKey";
    case Errc::EmptyChunk: return "EmptyChunk";
    case Errc::DuplicateNode: return "DuplicateNode";
    case Errc::DanglingLink: return "DanglingLink";
    case Errc::InvalidLink: return "InvalidLink";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::UnknownEndpoint: return "UnknownEndpoint";
    case Errc::NotAPublisher: return "NotAPublisher";
    case Errc::UnknownLink: return "UnknownLink";
    case Errc::TimeInPast: return "TimeInPast";
    case Errc::InvalidAssembly: return "InvalidAssembly";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::UnknownDependency: return "UnknownDependency";
    case Errc::DuplicateTask: return "DuplicateTask";
    case Errc::UnreadableWorkspace: return "UnreadableWorkspace";
    case Errc::UnknownCore: return "UnknownCore";
    case Errc::UnknownInjection: return "UnknownInjection";
    case Errc::UnknownOverride: return "UnknownOverride";
    case Errc::OverrideConflict: return "OverrideConflict";
    case Errc::UnknownJoint: return "UnknownJoint";
    case Errc::NonPositiveStep: return "NonPositiveStep";
    case Errc::UnknownFrame: return "UnknownFrame";
    case Errc::MissingJointState: return "MissingJointState";
    case Errc::UnboundPoint: return "UnboundPoint";
    case Errc::HandlerPanic: return "HandlerPanic";
    case Errc::UnknownHost: return "UnknownHost";
    case Errc::InvalidDocument: return "InvalidDocument";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace modstack
