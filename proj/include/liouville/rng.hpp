#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace liouville {

// Philox4x32-10 counter-based generator. Streams derived from (seed, stream)
// are independent and reproducible regardless of threading or call order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(stream),
             static_cast<std::uint32_t>(stream >> 32)} {}

  std::uint32_t next_u32() {
    if (have_ == 0) {
      block_ = philox(ctr_, key_);
      if (++ctr_[0] == 0) ++ctr_[1];
      have_ = 4;
    }
    return block_[4 - have_--];
  }

  std::uint64_t next_u64() {
    std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1] (safe for logs).
  double uniform_pos() { return 1.0 - uniform(); }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller (deterministic sequence).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = uniform_pos(), v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    spare_ = r * std::sin(2.0 * 3.14159265358979323846 * v);
    has_spare_ = true;
    return r * std::cos(2.0 * 3.14159265358979323846 * v);
  }

 private:
  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> c,
                                             std::array<std::uint32_t, 2> k) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
      std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
      std::array<std::uint32_t, 4> n;
      n[0] = static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0];
      n[1] = static_cast<std::uint32_t>(p1);
      n[2] = static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1];
      n[3] = static_cast<std::uint32_t>(p0);
      c = n;
      k[0] += W0;
      k[1] += W1;
    }
    return c;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> block_{};
  int have_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace liouville
