#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "hb/kernels.hpp"

using hb::kernels::cplx;

namespace {

std::vector<cplx> random_array(std::mt19937_64& gen, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<cplx> v(n);
    for (auto& z : v) z = {u(gen), u(gen)};
    return v;
}

// every vector kernel must agree with the scalar reference on awkward sizes
const std::size_t kSizes[] = {0, 1, 2, 3, 5, 63, 64, 65, 127, 130, 1000};

}  // namespace

TEST_CASE("scalar and vector kernels agree") {
    const auto& s = hb::kernels::scalar_ops();
    const auto* v = hb::kernels::avx2_ops();
    if (!v) {
        MESSAGE("AVX2 unavailable; dispatch falls back to scalar");
        CHECK(hb::kernels::active_isa() == hb::kernels::Isa::scalar);
        return;
    }

    std::mt19937_64 gen(42);
    for (const std::size_t n : kSizes) {
        CAPTURE(n);
        auto a = random_array(gen, n);
        auto b = random_array(gen, n);
        const cplx alpha{0.3, -1.1};

        auto za = a, zb = a;
        s.cmul_inplace(za.data(), b.data(), n);
        v->cmul_inplace(zb.data(), b.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(za[i] - zb[i]) < 1e-14);

        std::vector<cplx> da(n), db(n);
        s.cmul_to(da.data(), a.data(), b.data(), n);
        v->cmul_to(db.data(), a.data(), b.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(da[i] - db[i]) < 1e-14);

        auto ca = a, cb = a;
        s.caxpy(ca.data(), alpha, b.data(), n);
        v->caxpy(cb.data(), alpha, b.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ca[i] - cb[i]) < 1e-14);

        auto sa = a, sb = a;
        s.scale_inplace(sa.data(), 0.37, n);
        v->scale_inplace(sb.data(), 0.37, n);
        for (std::size_t i = 0; i < n; ++i) CHECK(sa[i] == sb[i]);

        CHECK(s.abs2_sum(a.data(), n) == doctest::Approx(v->abs2_sum(a.data(), n)).epsilon(1e-13));
        CHECK(s.diff_abs2_sum(a.data(), b.data(), n) ==
              doctest::Approx(v->diff_abs2_sum(a.data(), b.data(), n)).epsilon(1e-13));
        CHECK(s.max_abs2(a.data(), n) == doctest::Approx(v->max_abs2(a.data(), n)).epsilon(1e-14));
        CHECK(s.max_abs2_diff(a.data(), b.data(), n) ==
              doctest::Approx(v->max_abs2_diff(a.data(), b.data(), n)).epsilon(1e-14));

        std::vector<double> w(n);
        std::uniform_real_distribution<double> uw(0.0, 2.0);
        for (auto& x : w) x = uw(gen);
        CHECK(s.weighted_abs2_sum(a.data(), w.data(), n) ==
              doctest::Approx(v->weighted_abs2_sum(a.data(), w.data(), n)).epsilon(1e-13));
    }
}

TEST_CASE("fourier_eval matches the direct sum") {
    std::mt19937_64 gen(7);
    for (const auto& impl : {&hb::kernels::scalar_ops(), hb::kernels::avx2_ops()}) {
        if (!impl) continue;
        for (const std::size_t n : {1ul, 2ul, 7ul, 64ul, 65ul, 256ul, 1000ul}) {
            auto c = random_array(gen, n);
            auto dc = random_array(gen, n);
            const double k0 = -3.1, dk = 0.37, x = 1.234;

            cplx val, dval;
            impl->fourier_eval(c.data(), dc.data(), n, k0, dk, x, &val, &dval);

            cplx ref = 0.0, dref = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const cplx ph = std::polar(1.0, (k0 + static_cast<double>(j) * dk) * x);
                ref += c[j] * ph;
                dref += dc[j] * ph;
            }
            CHECK(std::abs(val - ref) < 1e-11 * (1.0 + std::abs(ref)));
            CHECK(std::abs(dval - dref) < 1e-11 * (1.0 + std::abs(dref)));

            // null dc path
            cplx val2;
            impl->fourier_eval(c.data(), nullptr, n, k0, dk, x, &val2, nullptr);
            CHECK(std::abs(val2 - val) < 1e-12 * (1.0 + std::abs(val)));
        }
    }
}

TEST_CASE("phase recurrence stays accurate over long ladders") {
    // worst case for the reseeded recurrence: large n, large |k x|
    const std::size_t n = 1 << 14;
    std::mt19937_64 gen(11);
    auto c = random_array(gen, n);
    const double k0 = -400.0, dk = 400.0 * 2 / static_cast<double>(n), x = 6.9;

    cplx val;
    hb::kernels::ops().fourier_eval(c.data(), nullptr, n, k0, dk, x, &val, nullptr);

    long double rr = 0.0, ri = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const long double ang = (k0 + static_cast<double>(j) * dk) * x;
        rr += c[j].real() * std::cos(ang) - c[j].imag() * std::sin(ang);
        ri += c[j].real() * std::sin(ang) + c[j].imag() * std::cos(ang);
    }
    const cplx ref{static_cast<double>(rr), static_cast<double>(ri)};
    CHECK(std::abs(val - ref) < 1e-10 * std::sqrt(static_cast<double>(n)));
}

TEST_CASE("force_isa round trip") {
    const auto prev = hb::kernels::active_isa();
    hb::kernels::force_isa(hb::kernels::Isa::scalar);
    CHECK(std::string(hb::kernels::ops().name) == "scalar");
    if (hb::kernels::avx2_ops()) {
        hb::kernels::force_isa(hb::kernels::Isa::avx2);
        CHECK(std::string(hb::kernels::ops().name) == "avx2");
    }
    hb::kernels::force_isa(prev);
}
