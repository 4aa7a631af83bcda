#pragma once

#include "ains/types.hpp"

#include <array>
#include <cstdint>

namespace ains {

// Philox4x32-10 (Salmon et al., Random123). Multipliers 0xD2511F53, 0xCD9E8D57;
// Weyl key increments 0x9E3779B9, 0xBB67AE85; ten rounds.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter ctr, Key key);
};

// Noise channels. The n-th sensor of a kind (n from 0) uses
// kSensorBase + catalogue index + 12 n; init and sampling sit at the top of the range.
namespace channel {
inline constexpr std::uint32_t kGyro = 0;
inline constexpr std::uint32_t kAccel = 1;
inline constexpr std::uint32_t kGyroBias = 2;
inline constexpr std::uint32_t kAccelBias = 3;
inline constexpr std::uint32_t kSensorBase = 4;
inline constexpr std::uint32_t kInit = 0xfffffff0u;
inline constexpr std::uint32_t kSampling = 0xfffffff1u;
}  // namespace channel

// Stream of draws for (seed, channel, run). Block i uses
// counter = (i lo, i hi, channel, run), key = (seed lo, seed hi).
// Each block gives two uniforms from 53-bit mantissas, hence one Box-Muller pair.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint32_t chan, std::uint32_t run = 0);

  double normal();
  Vec3 normal3();
  // Uniform on [0, 1).
  double uniform();
  std::uint64_t blocks_used() const { return index_; }

 private:
  std::array<double, 2> next_pair();

  Philox4x32::Key key_;
  std::uint32_t chan_;
  std::uint32_t run_;
  std::uint64_t index_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Unit vector uniform on the sphere, from three normals.
Vec3 random_unit_vector(NoiseStream& s);

}  // namespace ains
