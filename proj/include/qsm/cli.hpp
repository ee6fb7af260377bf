#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qsm::cli {

inline constexpr int kOk = 0;
inline constexpr int kValidation = 1;
inline constexpr int kIo = 2;

// args excludes the program name. Returns the process exit code.
int dispatch(std::vector<std::string> const &args, std::ostream &out, std::ostream &err);
int dispatch(int argc, char **argv);

} // namespace qsm::cli
