#pragma once

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace ncrc {

// Thrown when a runtime invariant is violated. The simulation engine treats
// these as fatal diagnostics rather than recoverable conditions.
class invariant_error : public std::logic_error {
 public:
  explicit invariant_error(const std::string& what) : std::logic_error(what) {}
};

namespace detail {
[[noreturn]] inline void check_failed(const char* expr, const char* file, int line,
                                      const std::string& msg) {
  std::string full = std::string("invariant failed: ") + expr + " at " + file + ":" +
                     std::to_string(line) + (msg.empty() ? "" : (" (" + msg + ")"));
  throw invariant_error(full);
}
}  // namespace detail

}  // namespace ncrc

// Always-on invariant check. Cheap enough to leave enabled; the engine's
// per-slot deep checks are gated separately by SimConfig::check_invariants.
#define NCRC_CHECK(expr)                                                \
  do {                                                                  \
    if (!(expr)) ::ncrc::detail::check_failed(#expr, __FILE__, __LINE__, ""); \
  } while (0)

#define NCRC_CHECK_MSG(expr, msg)                                       \
  do {                                                                  \
    if (!(expr)) ::ncrc::detail::check_failed(#expr, __FILE__, __LINE__, (msg)); \
  } while (0)
