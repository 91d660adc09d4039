#pragma once

// Counter-based splittable RNG: every draw is a pure hash of
// (seed, trial, time, channel, component), so signals are reproducible and
// independent of evaluation order or thread count.

#include <cstdint>

namespace ioss {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

enum class Channel : std::uint64_t {
  u = 0, upsilon = 1, w = 2, omega = 3, v = 4, nu = 5, x0 = 6, chi0 = 7,
  u_tilde = 8, w_tilde = 9, v_tilde = 10, y_tilde = 11, xt0 = 12,
  aux = 13,
};

// Uniform double in [0, 1).
inline double uniform01(std::uint64_t seed, std::uint64_t trial,
                        std::uint64_t time, Channel channel,
                        std::uint64_t component) {
  std::uint64_t h = detail::mix64(seed);
  h = detail::mix64(h ^ trial);
  h = detail::mix64(h ^ (time << 4));
  h = detail::mix64(h ^ static_cast<std::uint64_t>(channel));
  h = detail::mix64(h ^ component);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double uniform_in(double lo, double hi, std::uint64_t seed,
                         std::uint64_t trial, std::uint64_t time,
                         Channel channel, std::uint64_t component) {
  return lo + (hi - lo) * uniform01(seed, trial, time, channel, component);
}

}  // namespace ioss
