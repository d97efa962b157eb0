#pragma once

#include <complex>
#include <cstddef>
#include <string>

namespace hb::kernels {

using cplx = std::complex<double>;

// Data-parallel inner loops shared by the spectral solver, the packet ladder
// batch evaluator and the quadrature reductions. Arrays are interleaved
// re/im doubles (std::complex layout). Scalar versions are the reference;
// vector variants must agree within a few ulps and are selected at runtime.
struct Ops {
    const char* name;

    // z[i] *= w[i]
    void (*cmul_inplace)(cplx* z, const cplx* w, std::size_t n);
    // dst[i] = a[i] * b[i]
    void (*cmul_to)(cplx* dst, const cplx* a, const cplx* b, std::size_t n);
    // dst[i] += alpha * x[i]
    void (*caxpy)(cplx* dst, cplx alpha, const cplx* x, std::size_t n);
    // z[i] *= s
    void (*scale_inplace)(cplx* z, double s, std::size_t n);
    // sum |z[i]|^2
    double (*abs2_sum)(const cplx* z, std::size_t n);
    // sum w[i] * |z[i]|^2, real weights
    double (*weighted_abs2_sum)(const cplx* z, const double* w, std::size_t n);
    // sum |a[i] - b[i]|^2
    double (*diff_abs2_sum)(const cplx* a, const cplx* b, std::size_t n);
    // max |z[i]|^2
    double (*max_abs2)(const cplx* z, std::size_t n);
    // max |a[i] - b[i]|^2
    double (*max_abs2_diff)(const cplx* a, const cplx* b, std::size_t n);
    // Band-limited point evaluation on a uniform wavenumber ladder
    // k_j = k0 + j*dk:   *val  = sum_j c[j] exp(i k_j x)
    //                    *dval = sum_j dc[j] exp(i k_j x)   (skipped if dc null)
    void (*fourier_eval)(const cplx* c, const cplx* dc, std::size_t n, double k0, double dk,
                         double x, cplx* val, cplx* dval);
};

enum class Isa { scalar, avx2 };

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when unsupported at build or run time

// Active implementation. Picked once: HB_SIMD=scalar|avx2 overrides, else the
// best supported ISA.
const Ops& ops();
Isa active_isa();
void force_isa(Isa isa);  // test hook; throws if unavailable

}  // namespace hb::kernels
