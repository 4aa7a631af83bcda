// Built with -mavx2 -mfma; only called after the runtime CPU check.
#include "particles_kernels.hpp"

#include <immintrin.h>

namespace ains::detail {

namespace {

inline __m256d ld(const double* p) { return _mm256_loadu_pd(p); }
inline __m256d add(__m256d a, __m256d b) { return _mm256_add_pd(a, b); }
inline __m256d sub(__m256d a, __m256d b) { return _mm256_sub_pd(a, b); }
inline __m256d mul(__m256d a, __m256d b) { return _mm256_mul_pd(a, b); }
inline __m256d fma(__m256d a, __m256d b, __m256d c) { return _mm256_fmadd_pd(a, b, c); }

}  // namespace

std::size_t propagate_avx2(const ParticleView& pv, std::size_t begin, std::size_t end) {
  const __m256d dt = _mm256_set1_pd(pv.dt);
  const __m256d dt2 = _mm256_set1_pd(pv.dt * pv.dt);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d gdt[3], gdt2[3];
  for (int k = 0; k < 3; ++k) {
    gdt[k] = _mm256_set1_pd(pv.g[k] * pv.dt);
    gdt2[k] = _mm256_set1_pd(0.5 * pv.g[k] * pv.dt * pv.dt);
  }

  std::size_t i = begin;
  for (; i + 4 <= end; i += 4) {
    const __m256d w0 = ld(pv.w[0] + i), w1 = ld(pv.w[1] + i), w2 = ld(pv.w[2] + i);
    const __m256d a0 = ld(pv.a[0] + i), a1 = ld(pv.a[1] + i), a2 = ld(pv.a[2] + i);
    const __m256d ca = ld(pv.ca + i), cb = ld(pv.cb + i), cc = ld(pv.cc + i),
                  cd = ld(pv.cd + i);
    const __m256d th2 = fma(w2, w2, fma(w1, w1, mul(w0, w0)));

    const __m256d x0 = sub(mul(w1, a2), mul(w2, a1));
    const __m256d x1 = sub(mul(w2, a0), mul(w0, a2));
    const __m256d x2 = sub(mul(w0, a1), mul(w1, a0));
    const __m256d y0 = sub(mul(w1, x2), mul(w2, x1));
    const __m256d y1 = sub(mul(w2, x0), mul(w0, x2));
    const __m256d y2 = sub(mul(w0, x1), mul(w1, x0));

    const __m256d u0 = mul(dt, fma(cc, y0, fma(cb, x0, a0)));
    const __m256d u1 = mul(dt, fma(cc, y1, fma(cb, x1, a1)));
    const __m256d u2 = mul(dt, fma(cc, y2, fma(cb, x2, a2)));
    const __m256d s0 = mul(dt2, fma(cd, y0, fma(cc, x0, mul(half, a0))));
    const __m256d s1 = mul(dt2, fma(cd, y1, fma(cc, x1, mul(half, a1))));
    const __m256d s2 = mul(dt2, fma(cd, y2, fma(cc, x2, mul(half, a2))));

    const __m256d diag = sub(one, mul(cb, th2));
    const __m256d d00 = fma(mul(cb, w0), w0, diag);
    const __m256d d11 = fma(mul(cb, w1), w1, diag);
    const __m256d d22 = fma(mul(cb, w2), w2, diag);
    const __m256d c01 = mul(mul(cb, w0), w1);
    const __m256d c02 = mul(mul(cb, w0), w2);
    const __m256d c12 = mul(mul(cb, w1), w2);
    const __m256d aw0 = mul(ca, w0), aw1 = mul(ca, w1), aw2 = mul(ca, w2);
    const __m256d d01 = sub(c01, aw2), d10 = add(c01, aw2);
    const __m256d d02 = add(c02, aw1), d20 = sub(c02, aw1);
    const __m256d d12 = sub(c12, aw0), d21 = add(c12, aw0);

    for (int row = 0; row < 3; ++row) {
      const __m256d q0 = ld(pv.r[3 * row] + i);
      const __m256d q1 = ld(pv.r[3 * row + 1] + i);
      const __m256d q2 = ld(pv.r[3 * row + 2] + i);
      _mm256_storeu_pd(pv.r[3 * row] + i, fma(q2, d20, fma(q1, d10, mul(q0, d00))));
      _mm256_storeu_pd(pv.r[3 * row + 1] + i, fma(q2, d21, fma(q1, d11, mul(q0, d01))));
      _mm256_storeu_pd(pv.r[3 * row + 2] + i, fma(q2, d22, fma(q1, d12, mul(q0, d02))));
      const __m256d ru = fma(q2, u2, fma(q1, u1, mul(q0, u0)));
      const __m256d rs = fma(q2, s2, fma(q1, s1, mul(q0, s0)));
      const __m256d vk = ld(pv.v[row] + i);
      const __m256d pk = ld(pv.p[row] + i);
      _mm256_storeu_pd(pv.v[row] + i, add(add(vk, ru), gdt[row]));
      _mm256_storeu_pd(pv.p[row] + i, add(add(fma(vk, dt, pk), rs), gdt2[row]));
    }
  }
  return i;
}

}  // namespace ains::detail
