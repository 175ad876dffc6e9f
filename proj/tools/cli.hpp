#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace partialid::cli {

// Runs one command line (without the program name). The report goes to
// `out` only when the command succeeds; errors go to `err`.
// Exit status: 0 ok, 2 invalid input, 3 data contradict the assumptions,
// 4 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string fnv1a64(const std::string& bytes);

}  // namespace partialid::cli
