#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace phaseflow {

/// Failure categories. The CLI maps kConfig-type errors to exit code 2 and
/// everything numerical to exit code 3.
enum class ErrorKind {
  kSyntax,
  kUnknownIdentifier,
  kDimensionMismatch,
  kOrderCapExceeded,
  kEvaluationDomain,
  kBlowupDetected,
  kBoundaryMass,
  kOutOfWindow,
  kSolveFailure,
  kInsufficientDecadeRange,
  kWindowTooSmall,
  kMissingConstant,
  kBasePointNotCritical,
  kInvalidArgument,
  kConfig,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, std::vector<std::string> expected,
              const std::string& found);
  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

class UnknownIdentifier : public Error {
 public:
  UnknownIdentifier(std::size_t offset, const std::string& name)
      : Error(ErrorKind::kUnknownIdentifier,
              "unknown identifier '" + name + "' at offset " +
                  std::to_string(offset)),
        offset_(offset),
        name_(name) {}
  std::size_t offset() const { return offset_; }
  const std::string& name() const { return name_; }

 private:
  std::size_t offset_;
  std::string name_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t offset, const std::string& msg)
      : Error(ErrorKind::kDimensionMismatch, msg), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class EvaluationDomainError : public Error {
 public:
  EvaluationDomainError(const std::string& subexpr, const std::string& reason)
      : Error(ErrorKind::kEvaluationDomain,
              reason + " in subexpression '" + subexpr + "'"),
        subexpr_(subexpr) {}
  const std::string& subexpression() const { return subexpr_; }

 private:
  std::string subexpr_;
};

}  // namespace phaseflow
