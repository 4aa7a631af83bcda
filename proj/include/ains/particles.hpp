#pragma once

#include "ains/liegroups.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace ains {

// Structure-of-arrays batch of extended poses. r[3*i+j] holds R(i,j) for all particles.
struct ParticleSet {
  explicit ParticleSet(std::size_t n = 0);

  std::size_t size() const { return p[0].size(); }
  ExtendedPose get(std::size_t i) const;
  void set(std::size_t i, const ExtendedPose& x);

  std::array<std::vector<double>, 9> r;
  std::array<std::vector<double>, 3> v;
  std::array<std::vector<double>, 3> p;
};

// Per-particle inputs for one step.
struct ParticleInputs {
  explicit ParticleInputs(std::size_t n = 0);
  std::array<std::vector<double>, 3> gyro;
  std::array<std::vector<double>, 3> accel;
};

enum class SimdLevel { Scalar, Avx2 };

const char* to_string(SimdLevel level);
bool cpu_has_avx2();
// Highest level the CPU supports, capped by AINS_SIMD=scalar|avx2 when set.
SimdLevel active_simd();

// Exact strapdown step for every particle; same result as propagate_pose per particle.
void propagate_particles(ParticleSet& set, const ParticleInputs& in, double dt,
                         const Vec3& g, SimdLevel level);
void propagate_particles(ParticleSet& set, const ParticleInputs& in, double dt,
                         const Vec3& g = constants::kGravity);

}  // namespace ains
