#pragma once

#include <stdexcept>
#include <string>

namespace qsm {

struct Error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

// Bad arguments, violated invariants, malformed inputs.
struct ValidationError : Error
{
  using Error::Error;
};

// Missing files, short reads, failed writes.
struct IoError : Error
{
  using Error::Error;
};

} // namespace qsm
