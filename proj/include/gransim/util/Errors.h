#pragma once

#include <stdexcept>
#include <string>

namespace gransim {

// Every runtime failure surfaces as one of these. The harness and CLI catch
// the base type and turn it into a nonzero exit code.
class GransimError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

#define GRANSIM_ERROR(Name)                                                    \
    class Name : public GransimError                                           \
    {                                                                          \
      public:                                                                  \
        explicit Name(const std::string& msg)                                  \
          : GransimError(#Name ": " + msg)                                     \
        {}                                                                     \
    }

GRANSIM_ERROR(ConfigError);
GRANSIM_ERROR(ProtocolError);
GRANSIM_ERROR(MergeArithmeticError);
GRANSIM_ERROR(PlacementError);
GRANSIM_ERROR(ReservationError);
GRANSIM_ERROR(ParseError);
GRANSIM_ERROR(GuestTrap);
GRANSIM_ERROR(ContractViolation);
GRANSIM_ERROR(IOError);

#undef GRANSIM_ERROR

}
