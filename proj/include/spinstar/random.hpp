#ifndef SPINSTAR_RANDOM_HPP
#define SPINSTAR_RANDOM_HPP

#include <cstdint>
#include <random>

namespace spinstar {

/// Seeded generator with a platform-independent real mapping.
/// std::uniform_real_distribution is implementation-defined, so reals are
/// formed from the top 53 bits of mt19937_64 directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [low, high).
  double uniform(double low, double high) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return low + (high - low) * u;
  }

  /// Uniform integer on [low, high].
  int uniform_int(int low, int high) {
    const auto span = static_cast<std::uint64_t>(high - low) + 1;
    return low + static_cast<int>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace spinstar

#endif  // SPINSTAR_RANDOM_HPP
