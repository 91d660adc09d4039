#pragma once

#include <stdexcept>
#include <string>

namespace ioss {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define IOSS_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

// comparison_fns
IOSS_DEFINE_ERROR(DomainExceeded);
IOSS_DEFINE_ERROR(RangeExceeded);
IOSS_DEFINE_ERROR(NotKFunction);
IOSS_DEFINE_ERROR(RefinementFailed);
IOSS_DEFINE_ERROR(NotContraction);
IOSS_DEFINE_ERROR(PremiseViolated);
IOSS_DEFINE_ERROR(NotSummable);

// linear_cert
IOSS_DEFINE_ERROR(NotSymmetric);
IOSS_DEFINE_ERROR(NotDetectable);
IOSS_DEFINE_ERROR(NoConvergence);
IOSS_DEFINE_ERROR(StabilityCheckFailed);
IOSS_DEFINE_ERROR(NotSchurStable);
IOSS_DEFINE_ERROR(SingularSystem);
IOSS_DEFINE_ERROR(IdentityMismatch);

// verifier / io
IOSS_DEFINE_ERROR(EvaluationFailure);
IOSS_DEFINE_ERROR(ParseError);

#undef IOSS_DEFINE_ERROR

}  // namespace ioss
