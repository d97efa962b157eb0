#include "hb/kernels.hpp"

#include <cmath>

// Reference kernels. Straight loops, Kahan accumulation in the reductions so
// results do not depend on how callers batch their data.

namespace hb::kernels {
namespace {

void s_cmul_inplace(cplx* z, const cplx* w, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] *= w[i];
}

void s_cmul_to(cplx* dst, const cplx* a, const cplx* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void s_caxpy(cplx* dst, cplx alpha, const cplx* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * x[i];
}

void s_scale_inplace(cplx* z, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] *= s;
}

struct Kahan {
    double sum = 0.0, c = 0.0;
    void add(double v) {
        const double y = v - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

double s_abs2_sum(const cplx* z, std::size_t n) {
    Kahan acc;
    for (std::size_t i = 0; i < n; ++i) acc.add(std::norm(z[i]));
    return acc.sum;
}

double s_weighted_abs2_sum(const cplx* z, const double* w, std::size_t n) {
    Kahan acc;
    for (std::size_t i = 0; i < n; ++i) acc.add(w[i] * std::norm(z[i]));
    return acc.sum;
}

double s_diff_abs2_sum(const cplx* a, const cplx* b, std::size_t n) {
    Kahan acc;
    for (std::size_t i = 0; i < n; ++i) acc.add(std::norm(a[i] - b[i]));
    return acc.sum;
}

double s_max_abs2(const cplx* z, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::norm(z[i]));
    return m;
}

double s_max_abs2_diff(const cplx* a, const cplx* b, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::norm(a[i] - b[i]));
    return m;
}

// Phase recurrence reseeded every block: the rotation e^{i dk x} applied
// repeatedly drifts by ~n ulps, reseeding caps the drift at ~block ulps.
constexpr std::size_t kPhaseBlock = 64;

void s_fourier_eval(const cplx* c, const cplx* dc, std::size_t n, double k0, double dk, double x,
                    cplx* val, cplx* dval) {
    Kahan vr, vi, dr, di;
    const cplx step = std::polar(1.0, dk * x);
    for (std::size_t b = 0; b < n; b += kPhaseBlock) {
        const std::size_t e = std::min(n, b + kPhaseBlock);
        cplx ph = std::polar(1.0, (k0 + static_cast<double>(b) * dk) * x);
        for (std::size_t j = b; j < e; ++j) {
            const cplx t = c[j] * ph;
            vr.add(t.real());
            vi.add(t.imag());
            if (dc) {
                const cplx u = dc[j] * ph;
                dr.add(u.real());
                di.add(u.imag());
            }
            ph *= step;
        }
    }
    *val = {vr.sum, vi.sum};
    if (dc && dval) *dval = {dr.sum, di.sum};
}

constexpr Ops kScalarOps = {
    .name = "scalar",
    .cmul_inplace = s_cmul_inplace,
    .cmul_to = s_cmul_to,
    .caxpy = s_caxpy,
    .scale_inplace = s_scale_inplace,
    .abs2_sum = s_abs2_sum,
    .weighted_abs2_sum = s_weighted_abs2_sum,
    .diff_abs2_sum = s_diff_abs2_sum,
    .max_abs2 = s_max_abs2,
    .max_abs2_diff = s_max_abs2_diff,
    .fourier_eval = s_fourier_eval,
};

}  // namespace

const Ops& scalar_ops() { return kScalarOps; }

}  // namespace hb::kernels
