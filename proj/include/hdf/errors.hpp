#pragma once

#include <stdexcept>
#include <string>

namespace hdf {

// Base of every error raised by the library. kind() is the stable
// machine-readable name used by the CLI error object.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define HDF_ERROR(Name)                                            \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& msg) : Error(#Name, msg) {}   \
  };

HDF_ERROR(NonInvertible)
HDF_ERROR(NoSolution)
HDF_ERROR(NotDivisible)
HDF_ERROR(WrongModulus)
HDF_ERROR(ZeroSubsheaf)
HDF_ERROR(ExponentTooLarge)
HDF_ERROR(SearchBudgetExceeded)
HDF_ERROR(SemistableInput)
HDF_ERROR(NotNablaSemistable)
HDF_ERROR(IterationBudgetExceeded)
HDF_ERROR(PolicyFiltrationInvalid)
HDF_ERROR(NotPrimitive)
HDF_ERROR(BadMinimalPolynomial)
HDF_ERROR(NotFree)
HDF_ERROR(LevelTooHigh)
HDF_ERROR(TruncationBoundExceeded)
HDF_ERROR(NoLiftedFiltration)
HDF_ERROR(ContractViolation)

#undef HDF_ERROR

class TransversalityViolated : public Error {
 public:
  TransversalityViolated(int index, const std::string& msg)
      : Error("TransversalityViolated", msg + " (index " + std::to_string(index) + ")"),
        index_(index) {}
  int index() const noexcept { return index_; }

 private:
  int index_;
};

}  // namespace hdf
