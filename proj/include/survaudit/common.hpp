#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace survaudit {

// Validation failures map to CLI exit code 1, numerical failures to exit code 2.
class validation_error : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class numeric_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optimizer failed to reach the requested tolerance; carries the last iterate.
class convergence_error : public numeric_error {
public:
  convergence_error(const std::string& msg, std::vector<double> last_estimate,
                    double gradient_norm, int iterations)
      : numeric_error(msg),
        last_estimate_(std::move(last_estimate)),
        gradient_norm_(gradient_norm),
        iterations_(iterations) {}

  const std::vector<double>& last_estimate() const { return last_estimate_; }
  double gradient_norm() const { return gradient_norm_; }
  int iterations() const { return iterations_; }

private:
  std::vector<double> last_estimate_;
  double gradient_norm_;
  int iterations_;
};

class separation_error : public numeric_error {
  using numeric_error::numeric_error;
};

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream-splittable splitmix64 generator. A stream is identified by
// (seed, stream_id) so independent substreams can be derived per record,
// per tree, etc. without any sequential coupling; results are therefore
// invariant to evaluation order and thread count.
class Rng {
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix64(seed ^ mix64(stream ^ 0x6a09e667f3bcc909ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform on (0, 1); never returns 0 so logs stay finite
  double uniform01() {
    for (;;) {
      double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  // unbiased integer in [0, n)
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw validation_error("uniform_below: n must be positive");
    const std::uint64_t threshold = (0ULL - n) % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x < threshold);
    return x % n;
  }

  // standard normal via Box-Muller, spare value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// fixed stream tags so derived substreams never collide across subsystems
namespace stream {
constexpr std::uint64_t holdout_split = 0x01;
constexpr std::uint64_t simulate = 0x02;
constexpr std::uint64_t forest_tree = 0x03;
constexpr std::uint64_t prob_scan = 0x04;
constexpr std::uint64_t model_fit = 0x05;
}  // namespace stream

inline std::uint64_t substream(std::uint64_t tag, std::uint64_t index) {
  return (tag << 48) ^ index;
}

}  // namespace survaudit
