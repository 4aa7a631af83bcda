#include "ains/particles.hpp"

#include "particles_kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace ains {

ParticleSet::ParticleSet(std::size_t n) {
  for (int k = 0; k < 9; ++k) r[k].assign(n, (k % 4 == 0) ? 1.0 : 0.0);
  for (int k = 0; k < 3; ++k) {
    v[k].assign(n, 0.0);
    p[k].assign(n, 0.0);
  }
}

ExtendedPose ParticleSet::get(std::size_t i) const {
  Mat3 m;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) m(a, b) = r[3 * a + b][i];
  ExtendedPose x;
  x.rot = Rotation(m);
  for (int k = 0; k < 3; ++k) {
    x.vel(k) = v[k][i];
    x.pos(k) = p[k][i];
  }
  return x;
}

void ParticleSet::set(std::size_t i, const ExtendedPose& x) {
  const Mat3& m = x.rot.matrix();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r[3 * a + b][i] = m(a, b);
  for (int k = 0; k < 3; ++k) {
    v[k][i] = x.vel(k);
    p[k][i] = x.pos(k);
  }
}

ParticleInputs::ParticleInputs(std::size_t n) {
  for (int k = 0; k < 3; ++k) {
    gyro[k].assign(n, 0.0);
    accel[k].assign(n, 0.0);
  }
}

const char* to_string(SimdLevel level) { return level == SimdLevel::Avx2 ? "avx2" : "scalar"; }

bool cpu_has_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

SimdLevel active_simd() {
  SimdLevel best = cpu_has_avx2() ? SimdLevel::Avx2 : SimdLevel::Scalar;
  if (const char* env = std::getenv("AINS_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) best = SimdLevel::Scalar;
  }
  return best;
}

void propagate_particles(ParticleSet& set, const ParticleInputs& in, double dt, const Vec3& g,
                         SimdLevel level) {
  const std::size_t n = set.size();
  std::vector<double> w[3];
  for (int k = 0; k < 3; ++k) {
    w[k].resize(n);
    for (std::size_t i = 0; i < n; ++i) w[k][i] = in.gyro[k][i] * dt;
  }
  // transcendental prepass; shared by both kernels so they see identical coefficients
  std::vector<double> ca(n), cb(n), cc(n), cd(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = std::sqrt(w[0][i] * w[0][i] + w[1][i] * w[1][i] + w[2][i] * w[2][i]);
    const so3::Coeffs c = so3::coeffs(th);
    ca[i] = c.a;
    cb[i] = c.b;
    cc[i] = c.c;
    cd[i] = c.d;
  }

  detail::ParticleView pv{};
  for (int k = 0; k < 9; ++k) pv.r[k] = set.r[k].data();
  for (int k = 0; k < 3; ++k) {
    pv.v[k] = set.v[k].data();
    pv.p[k] = set.p[k].data();
    pv.w[k] = w[k].data();
    pv.a[k] = in.accel[k].data();
    pv.g[k] = g(k);
  }
  pv.ca = ca.data();
  pv.cb = cb.data();
  pv.cc = cc.data();
  pv.cd = cd.data();
  pv.dt = dt;

  std::size_t begin = 0;
  if (level == SimdLevel::Avx2 && cpu_has_avx2()) begin = detail::propagate_avx2(pv, 0, n);
  detail::propagate_scalar(pv, begin, n);
}

void propagate_particles(ParticleSet& set, const ParticleInputs& in, double dt, const Vec3& g) {
  propagate_particles(set, in, dt, g, active_simd());
}

namespace detail {

void propagate_scalar(const ParticleView& pv, std::size_t begin, std::size_t end) {
  const double dt = pv.dt;
  const double dt2 = dt * dt;
  for (std::size_t i = begin; i < end; ++i) {
    const double w0 = pv.w[0][i], w1 = pv.w[1][i], w2 = pv.w[2][i];
    const double a0 = pv.a[0][i], a1 = pv.a[1][i], a2 = pv.a[2][i];
    const double ca = pv.ca[i], cb = pv.cb[i], cc = pv.cc[i], cd = pv.cd[i];
    const double th2 = w0 * w0 + w1 * w1 + w2 * w2;

    // W a and W^2 a
    const double x0 = w1 * a2 - w2 * a1;
    const double x1 = w2 * a0 - w0 * a2;
    const double x2 = w0 * a1 - w1 * a0;
    const double y0 = w1 * x2 - w2 * x1;
    const double y1 = w2 * x0 - w0 * x2;
    const double y2 = w0 * x1 - w1 * x0;

    const double u0 = dt * (a0 + cb * x0 + cc * y0);
    const double u1 = dt * (a1 + cb * x1 + cc * y1);
    const double u2 = dt * (a2 + cb * x2 + cc * y2);
    const double s0 = dt2 * (0.5 * a0 + cc * x0 + cd * y0);
    const double s1 = dt2 * (0.5 * a1 + cc * x1 + cd * y1);
    const double s2 = dt2 * (0.5 * a2 + cc * x2 + cd * y2);

    // dR = I + ca W + cb (w w^T - th2 I)
    const double diag = 1.0 - cb * th2;
    const double d00 = diag + cb * w0 * w0;
    const double d11 = diag + cb * w1 * w1;
    const double d22 = diag + cb * w2 * w2;
    const double d01 = cb * w0 * w1 - ca * w2;
    const double d10 = cb * w0 * w1 + ca * w2;
    const double d02 = cb * w0 * w2 + ca * w1;
    const double d20 = cb * w0 * w2 - ca * w1;
    const double d12 = cb * w1 * w2 - ca * w0;
    const double d21 = cb * w1 * w2 + ca * w0;

    double r[9];
    for (int k = 0; k < 9; ++k) r[k] = pv.r[k][i];
    const double vx = pv.v[0][i], vy = pv.v[1][i], vz = pv.v[2][i];

    for (int row = 0; row < 3; ++row) {
      const double q0 = r[3 * row], q1 = r[3 * row + 1], q2 = r[3 * row + 2];
      pv.r[3 * row][i] = q0 * d00 + q1 * d10 + q2 * d20;
      pv.r[3 * row + 1][i] = q0 * d01 + q1 * d11 + q2 * d21;
      pv.r[3 * row + 2][i] = q0 * d02 + q1 * d12 + q2 * d22;
      const double ru = q0 * u0 + q1 * u1 + q2 * u2;
      const double rs = q0 * s0 + q1 * s1 + q2 * s2;
      const double vk = row == 0 ? vx : (row == 1 ? vy : vz);
      pv.v[row][i] = vk + ru + pv.g[row] * dt;
      pv.p[row][i] = pv.p[row][i] + vk * dt + rs + 0.5 * pv.g[row] * dt2;
    }
  }
}

}  // namespace detail

}  // namespace ains
