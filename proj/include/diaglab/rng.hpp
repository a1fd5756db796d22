#pragma once

#include <array>
#include <cstdint>

namespace diaglab {

// Philox4x32-10 counter-based generator.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(m0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(m1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += w0;
      key[1] += w1;
    }
    return ctr;
  }
};

// Stream of uniforms for one (seed, index) pair; the values depend only on
// those two numbers.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t index)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        index_(index) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    if (pos_ >= 4) refill();
    const std::uint64_t hi = buf_[pos_], lo = buf_[pos_ + 1];
    pos_ += 2;
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1p-53;
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  void refill() {
    buf_ = Philox4x32::generate({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                 static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32)},
                                key_);
    ++block_;
    pos_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t index_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buf_{};
  int pos_ = 4;
};

}  // namespace diaglab
