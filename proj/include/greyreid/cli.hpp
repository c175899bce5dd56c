#ifndef GREYREID_CLI_HPP_
#define GREYREID_CLI_HPP_

#include <ostream>

namespace greyreid::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;  // also usage errors
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitIntegrity = 5;
inline constexpr int kExitShape = 6;

// Entry point shared by the binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace greyreid::cli

#endif  // GREYREID_CLI_HPP_
