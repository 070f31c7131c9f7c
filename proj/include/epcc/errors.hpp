#pragma once

#include <stdexcept>
#include <string>

namespace epcc {

/// Base of every error raised by the library.
///
/// Errors fall in two families: input problems (bad parameters, configs,
/// unreachable emission, too little data) and solver problems (iterations
/// that fail to converge or produce garbage). The CLI maps them to distinct
/// exit codes.
class Error : public std::runtime_error {
  public:
    enum class Family { input, solver };

    Error(Family family, const std::string& what)
        : std::runtime_error(what), family_(family) {}

    Family family() const noexcept { return family_; }

  private:
    Family family_;
};

#define EPCC_DEFINE_ERROR(Name, Fam)                                  \
    class Name : public Error {                                       \
      public:                                                         \
        explicit Name(const std::string& what)                        \
            : Error(Family::Fam, std::string(#Name ": ") + what) {}   \
    }

EPCC_DEFINE_ERROR(InvalidParameter, input);
EPCC_DEFINE_ERROR(ConfigError, input);
EPCC_DEFINE_ERROR(NoEmission, input);
EPCC_DEFINE_ERROR(InsufficientData, input);
EPCC_DEFINE_ERROR(Degenerate, solver);
EPCC_DEFINE_ERROR(ComplexResidual, solver);
EPCC_DEFINE_ERROR(IntegrationFailure, solver);
EPCC_DEFINE_ERROR(EventCapExceeded, solver);
EPCC_DEFINE_ERROR(NoConvergence, solver);
EPCC_DEFINE_ERROR(FitDiverged, solver);
EPCC_DEFINE_ERROR(SingularJacobian, solver);

#undef EPCC_DEFINE_ERROR

} // namespace epcc
