#include "ains/rng.hpp"

#include <cmath>
#include <numbers>

namespace ains {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, ctr[0], hi0, lo0);
    mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint32_t chan, std::uint32_t run)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      chan_(chan),
      run_(run) {}

std::array<double, 2> NoiseStream::next_pair() {
  const Philox4x32::Counter c = Philox4x32::block(
      {static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32), chan_, run_},
      key_);
  ++index_;
  return {to_unit(c[0], c[1]), to_unit(c[2], c[3])};
}

double NoiseStream::uniform() {
  // one block per uniform; the second word pair is dropped
  return next_pair()[0];
}

double NoiseStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const auto u = next_pair();
  // u1 in (0, 1]
  const double u1 = 1.0 - u[0];
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u[1];
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

Vec3 NoiseStream::normal3() {
  Vec3 v;
  v.x() = normal();
  v.y() = normal();
  v.z() = normal();
  return v;
}

Vec3 random_unit_vector(NoiseStream& s) {
  for (;;) {
    const Vec3 v = s.normal3();
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

}  // namespace ains
