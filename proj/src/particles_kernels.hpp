#pragma once

#include <cstddef>

namespace ains::detail {

// Pointers into a ParticleSet/ParticleInputs plus per-particle coefficient scratch.
struct ParticleView {
  double* r[9];
  double* v[3];
  double* p[3];
  const double* w[3];   // gyro * dt
  const double* a[3];   // accel
  const double* ca;     // sin(t)/t
  const double* cb;     // (1 - cos t)/t^2
  const double* cc;     // (t - sin t)/t^3
  const double* cd;     // (t^2 + 2 cos t - 2)/(2 t^4)
  double dt;
  double g[3];
};

void propagate_scalar(const ParticleView& pv, std::size_t begin, std::size_t end);
// Handles [begin, begin + 4k); returns the first index left for the scalar tail.
std::size_t propagate_avx2(const ParticleView& pv, std::size_t begin, std::size_t end);

}  // namespace ains::detail
