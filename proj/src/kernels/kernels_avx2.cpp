#include "hb/kernels.hpp"

// AVX2+FMA variants. Complex doubles are processed two per 256-bit register
// in interleaved re/im layout; reductions keep independent lane accumulators
// and combine once at the end. This file is compiled with -mavx2 -mfma and
// only ever executed after the runtime CPU check in the dispatcher.

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace hb::kernels {
namespace {

// (a.re*b.re - a.im*b.im, a.re*b.im + a.im*b.re) for two packed complexes.
inline __m256d cmul_pd(__m256d a, __m256d b) {
    const __m256d a_re = _mm256_unpacklo_pd(a, a);           // [ar ar cr cr]
    const __m256d a_im = _mm256_unpackhi_pd(a, a);           // [ai ai ci ci]
    const __m256d b_swap = _mm256_permute_pd(b, 0b0101);     // [bi br di dr]
    return _mm256_fmaddsub_pd(a_re, b, _mm256_mul_pd(a_im, b_swap));
}

void v_cmul_inplace(cplx* z, const cplx* w, std::size_t n) {
    auto* zp = reinterpret_cast<double*>(z);
    const auto* wp = reinterpret_cast<const double*>(w);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d a = _mm256_loadu_pd(zp + 2 * i);
        const __m256d b = _mm256_loadu_pd(wp + 2 * i);
        _mm256_storeu_pd(zp + 2 * i, cmul_pd(a, b));
    }
    for (; i < n; ++i) z[i] *= w[i];
}

void v_cmul_to(cplx* dst, const cplx* a, const cplx* b, std::size_t n) {
    auto* dp = reinterpret_cast<double*>(dst);
    const auto* ap = reinterpret_cast<const double*>(a);
    const auto* bp = reinterpret_cast<const double*>(b);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d x = _mm256_loadu_pd(ap + 2 * i);
        const __m256d y = _mm256_loadu_pd(bp + 2 * i);
        _mm256_storeu_pd(dp + 2 * i, cmul_pd(x, y));
    }
    for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void v_caxpy(cplx* dst, cplx alpha, const cplx* x, std::size_t n) {
    auto* dp = reinterpret_cast<double*>(dst);
    const auto* xp = reinterpret_cast<const double*>(x);
    const __m256d al = _mm256_setr_pd(alpha.real(), alpha.imag(), alpha.real(), alpha.imag());
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d v = _mm256_loadu_pd(xp + 2 * i);
        const __m256d d = _mm256_loadu_pd(dp + 2 * i);
        _mm256_storeu_pd(dp + 2 * i, _mm256_add_pd(d, cmul_pd(al, v)));
    }
    for (; i < n; ++i) dst[i] += alpha * x[i];
}

void v_scale_inplace(cplx* z, double s, std::size_t n) {
    auto* zp = reinterpret_cast<double*>(z);
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        _mm256_storeu_pd(zp + 2 * i, _mm256_mul_pd(_mm256_loadu_pd(zp + 2 * i), sv));
    for (; i < n; ++i) z[i] *= s;
}

inline double hsum_pd(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double v_abs2_sum(const cplx* z, std::size_t n) {
    const auto* zp = reinterpret_cast<const double*>(z);
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d a = _mm256_loadu_pd(zp + 2 * i);
        const __m256d b = _mm256_loadu_pd(zp + 2 * i + 4);
        acc0 = _mm256_fmadd_pd(a, a, acc0);
        acc1 = _mm256_fmadd_pd(b, b, acc1);
    }
    double s = hsum_pd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += std::norm(z[i]);
    return s;
}

double v_weighted_abs2_sum(const cplx* z, const double* w, std::size_t n) {
    const auto* zp = reinterpret_cast<const double*>(z);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d a = _mm256_loadu_pd(zp + 2 * i);
        const __m128d wv = _mm_loadu_pd(w + i);
        const __m256d wd = _mm256_setr_m128d(_mm_unpacklo_pd(wv, wv), _mm_unpackhi_pd(wv, wv));
        acc = _mm256_fmadd_pd(_mm256_mul_pd(a, a), wd, acc);
    }
    double s = hsum_pd(acc);
    for (; i < n; ++i) s += w[i] * std::norm(z[i]);
    return s;
}

double v_diff_abs2_sum(const cplx* a, const cplx* b, std::size_t n) {
    const auto* ap = reinterpret_cast<const double*>(a);
    const auto* bp = reinterpret_cast<const double*>(b);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d d =
            _mm256_sub_pd(_mm256_loadu_pd(ap + 2 * i), _mm256_loadu_pd(bp + 2 * i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum_pd(acc);
    for (; i < n; ++i) s += std::norm(a[i] - b[i]);
    return s;
}

// |z|^2 per complex: squares then horizontal pair-add via shuffle.
inline __m256d abs2_pairs(__m256d v) {
    const __m256d sq = _mm256_mul_pd(v, v);
    return _mm256_add_pd(sq, _mm256_permute_pd(sq, 0b0101));  // both lanes hold re^2+im^2
}

double v_max_abs2(const cplx* z, std::size_t n) {
    const auto* zp = reinterpret_cast<const double*>(z);
    __m256d m = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        m = _mm256_max_pd(m, abs2_pairs(_mm256_loadu_pd(zp + 2 * i)));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, m);
    double r = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    for (; i < n; ++i) r = std::max(r, std::norm(z[i]));
    return r;
}

double v_max_abs2_diff(const cplx* a, const cplx* b, std::size_t n) {
    const auto* ap = reinterpret_cast<const double*>(a);
    const auto* bp = reinterpret_cast<const double*>(b);
    __m256d m = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d d =
            _mm256_sub_pd(_mm256_loadu_pd(ap + 2 * i), _mm256_loadu_pd(bp + 2 * i));
        m = _mm256_max_pd(m, abs2_pairs(d));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, m);
    double r = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    for (; i < n; ++i) r = std::max(r, std::norm(a[i] - b[i]));
    return r;
}

constexpr std::size_t kPhaseBlock = 64;  // must match scalar reseeding policy

void v_fourier_eval(const cplx* c, const cplx* dc, std::size_t n, double k0, double dk, double x,
                    cplx* val, cplx* dval) {
    __m256d vacc = _mm256_setzero_pd();
    __m256d dacc = _mm256_setzero_pd();
    const auto* cp = reinterpret_cast<const double*>(c);
    const auto* dcp = reinterpret_cast<const double*>(dc);
    const cplx step2 = std::polar(1.0, 2.0 * dk * x);
    const __m256d w2 = _mm256_setr_pd(step2.real(), step2.imag(), step2.real(), step2.imag());
    cplx vtail = 0.0, dtail = 0.0;

    for (std::size_t b = 0; b < n; b += kPhaseBlock) {
        const std::size_t e = std::min(n, b + kPhaseBlock);
        const cplx p0 = std::polar(1.0, (k0 + static_cast<double>(b) * dk) * x);
        const cplx p1 = p0 * std::polar(1.0, dk * x);
        __m256d ph = _mm256_setr_pd(p0.real(), p0.imag(), p1.real(), p1.imag());
        std::size_t j = b;
        for (; j + 2 <= e; j += 2) {
            vacc = _mm256_add_pd(vacc, cmul_pd(_mm256_loadu_pd(cp + 2 * j), ph));
            if (dc) dacc = _mm256_add_pd(dacc, cmul_pd(_mm256_loadu_pd(dcp + 2 * j), ph));
            ph = cmul_pd(ph, w2);
        }
        if (j < e) {  // odd block tail
            alignas(32) double pl[4];
            _mm256_store_pd(pl, ph);
            const cplx p{pl[0], pl[1]};
            vtail += c[j] * p;
            if (dc) dtail += dc[j] * p;
        }
    }
    alignas(32) double v4[4], d4[4];
    _mm256_store_pd(v4, vacc);
    *val = cplx{v4[0] + v4[2], v4[1] + v4[3]} + vtail;
    if (dc && dval) {
        _mm256_store_pd(d4, dacc);
        *dval = cplx{d4[0] + d4[2], d4[1] + d4[3]} + dtail;
    }
}

constexpr Ops kAvx2Ops = {
    .name = "avx2",
    .cmul_inplace = v_cmul_inplace,
    .cmul_to = v_cmul_to,
    .caxpy = v_caxpy,
    .scale_inplace = v_scale_inplace,
    .abs2_sum = v_abs2_sum,
    .weighted_abs2_sum = v_weighted_abs2_sum,
    .diff_abs2_sum = v_diff_abs2_sum,
    .max_abs2 = v_max_abs2,
    .max_abs2_diff = v_max_abs2_diff,
    .fourier_eval = v_fourier_eval,
};

}  // namespace

const Ops* avx2_ops_compiled() { return &kAvx2Ops; }

}  // namespace hb::kernels

#else

namespace hb::kernels {
const Ops* avx2_ops_compiled() { return nullptr; }
}  // namespace hb::kernels

#endif
