#pragma once

#include <stdexcept>
#include <string>

namespace pmc {

/// Base of every error raised by the library. `validation()` separates bad
/// input (caller's fault, CLI exit code 3) from internal failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, bool validation = true)
      : std::runtime_error(what), validation_(validation) {}
  bool validation() const noexcept { return validation_; }

 private:
  bool validation_;
};

#define PMC_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

PMC_DEFINE_ERROR(ConstraintViolation);
PMC_DEFINE_ERROR(DomainError);
PMC_DEFINE_ERROR(Unsupported);
PMC_DEFINE_ERROR(NotIrreducible);
PMC_DEFINE_ERROR(NotPrimitive);
PMC_DEFINE_ERROR(LengthMismatch);
PMC_DEFINE_ERROR(IndexOutOfRange);
PMC_DEFINE_ERROR(PatternInfeasible);
PMC_DEFINE_ERROR(PreconditionViolated);
PMC_DEFINE_ERROR(NoEligibleTriplet);
PMC_DEFINE_ERROR(Infeasible);
PMC_DEFINE_ERROR(CapExceeded);
PMC_DEFINE_ERROR(EmptyCondition);
PMC_DEFINE_ERROR(UnequalQ);
PMC_DEFINE_ERROR(InsufficientData);
PMC_DEFINE_ERROR(ConfigError);

#undef PMC_DEFINE_ERROR

}  // namespace pmc
