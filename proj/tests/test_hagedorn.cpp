#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "hb/errors.hpp"
#include "hb/hagedorn.hpp"

using namespace hb;
using std::complex;

namespace {

// 1d admissible scalar pairs: a = r e^{i th}, b = e^{i th}(1 + i beta)/r
// satisfy conj(a) b + conj(b) a = 2 for any r > 0, th, beta.
PacketParams packet_1d(double eps, double a0, double eta0, double r, double th, double beta,
                       double S = 0.0) {
    PacketParams p;
    p.eps = eps;
    p.a = RVec::Constant(1, a0);
    p.eta = RVec::Constant(1, eta0);
    p.A = CMat::Constant(1, 1, std::polar(r, th));
    p.B = CMat::Constant(1, 1, std::polar(1.0 / r, th) * cplx(1.0, beta));
    p.S = S;
    return p;
}

// Symbolic oracle: phi_k = poly_k(x - a) phi_0 with the polynomial obtained by
// applying the raising operator
//   A+ = (1/sqrt(2 eps)) [ conj(b)(x-a) - i conj(a)(p - eta) ]
// k times via explicit differentiation, independently of the ladder
// recurrence under test.
cplx oracle_value_1d(const PacketParams& p, int k, double x) {
    const cplx a = p.A(0, 0), b = p.B(0, 0);
    const double eps = p.eps;

    // (p - eta) [poly phi0] = [-i eps poly' + i (b/a)(x-a) poly] phi0
    // A+ [poly phi0] = (1/sqrt(2 eps)) [ (conj(b) + conj(a) b / a)(x-a) poly
    //                                    - eps conj(a) poly' ] phi0
    std::vector<cplx> poly{1.0};
    const cplx lin = std::conj(b) + std::conj(a) * b / a;
    const cplx dcoef = -eps * std::conj(a);
    for (int step = 0; step < k; ++step) {
        std::vector<cplx> next(poly.size() + 1, cplx{});
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i + 1] += lin * poly[i];
            if (i >= 1) next[i - 1] += dcoef * static_cast<double>(i) * poly[i];
        }
        // poly' shifts degree down: handle i = 0 (derivative zero) naturally
        for (auto& c : next) c /= std::sqrt(2.0 * eps);
        poly = std::move(next);
    }

    const double u = x - p.a[0];
    cplx pk = 0.0;
    for (std::size_t i = poly.size(); i-- > 0;) pk = pk * u + poly[i];

    const cplx phi0 = std::pow(std::numbers::pi * eps, -0.25) / std::sqrt(a) *
                      std::exp(-0.5 * (b / a) * u * u / eps + cplx(0, 1) * p.eta[0] * u / eps);
    double kfact = 1.0;
    for (int i = 2; i <= k; ++i) kfact *= i;
    return pk * phi0 / std::sqrt(kfact);
}

}  // namespace

TEST_CASE("admissibility residuals") {
    const CMat I = CMat::Identity(2, 2);
    auto r = validate_admissible(I, I);
    CHECK(r.sym == 0.0);
    CHECK(r.norm == 0.0);
    CHECK(r.admissible());

    r = validate_admissible(2.0 * I, I);
    CHECK(r.sym == doctest::Approx(0.0));
    CHECK(r.norm == doctest::Approx(2.0 * std::sqrt(2.0)));  // ||4I - 2I||_F in d = 2
    CHECK_FALSE(r.admissible());

    const CMat B = I + cplx(0, 1) * I;
    r = validate_admissible(I, B);
    CHECK(r.sym < 1e-15);
    CHECK(r.norm < 1e-15);

    CHECK_THROWS_AS(validate_admissible(CMat::Identity(2, 2), CMat::Identity(3, 3)),
                    std::invalid_argument);
}

TEST_CASE("ground state closed forms") {
    const PacketParams p = PacketParams::standard(1, 1.0);
    const PacketEvaluator ev(p, 2);
    const double x0 = 0.0;
    CHECK(std::abs(ev.value({0, 0, 0}, &x0) - std::pow(std::numbers::pi, -0.25)) < 1e-14);

    // modulus at x = a for generic admissible params
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int it = 0; it < 10; ++it) {
        const double eps = 0.02 + 0.5 * std::abs(u(gen));
        const double r = 0.5 + std::abs(u(gen));
        const auto q = packet_1d(eps, u(gen), u(gen), r, u(gen), u(gen), u(gen));
        const PacketEvaluator e2(q, 2);
        const double xa = q.a[0];
        const double expect = std::pow(std::numbers::pi * eps, -0.25) / std::sqrt(r);
        CHECK(std::abs(std::abs(e2.value({0, 0, 0}, &xa)) - expect) < 1e-12 * expect);

        // modulus independent of eta and S at fixed x
        const double x = q.a[0] + 0.3;
        auto q2 = q;
        q2.eta[0] += 0.7;
        q2.S += 1.3;
        const PacketEvaluator e3(q2, 2);
        CHECK(std::abs(std::abs(e3.value({1, 0, 0}, &x, true)) -
                       std::abs(e2.value({1, 0, 0}, &x, true))) < 1e-12);
    }
}

TEST_CASE("first excited state closed form") {
    const PacketParams p = PacketParams::standard(1, 1.0);
    const PacketEvaluator ev(p, 3);
    for (double x : {-1.7, -0.2, 0.0, 0.4, 2.2}) {
        const cplx expect =
            std::sqrt(2.0) * x * std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
        CHECK(std::abs(ev.value({1, 0, 0}, &x) - expect) < 1e-13);
    }
}

TEST_CASE("ladder equals the symbolic raising oracle") {
    std::mt19937_64 gen(10);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int it = 0; it < 12; ++it) {
        const double eps = 0.05 + 0.4 * std::abs(u(gen));
        const auto p = packet_1d(eps, 0.4 * u(gen), u(gen), 0.6 + std::abs(u(gen)), u(gen), u(gen));
        const PacketEvaluator ev(p, 3);
        for (int k = 0; k <= 3; ++k) {
            for (int ix = 0; ix < 6; ++ix) {
                const double x = p.a[0] + 2.5 * std::sqrt(eps) * u(gen);
                const cplx got = ev.value({k, 0, 0}, &x);
                const cplx want = oracle_value_1d(p, k, x);
                CHECK(std::abs(got - want) <= 1e-10 * (1.0 + std::abs(want)));
            }
        }
    }
}

TEST_CASE("orthonormality under quadrature") {
    // d = 1, generic admissible pair, |k|, |l| <= 3
    const auto p = packet_1d(1.0, 0.2, 0.4, 1.2, 0.5, -0.3);
    const PacketEvaluator ev(p, 3);
    const int n = 2001;
    const double half = 10.0, h = 2 * half / (n - 1);
    std::vector<double> ys(n);
    for (int i = 0; i < n; ++i) ys[i] = -half + h * i;
    const auto table = ev.unit_table(std::span<const double>(ys.data(), ys.size()), 3);

    // batch table reproduces the pointwise ground state
    for (int i = 0; i < n; i += 211)
        CHECK(std::abs(table.values(0)[i] - ev.unit_value({0, 0, 0}, &ys[static_cast<std::size_t>(i)])) <
              1e-14);

    for (int k = 0; k <= 3; ++k)
        for (int l = 0; l <= 3; ++l) {
            cplx acc = 0.0;
            const cplx* vk = table.values(ev.index_set().rank({k, 0, 0}));
            const cplx* vl = table.values(ev.index_set().rank({l, 0, 0}));
            for (int i = 0; i < n; ++i) acc += std::conj(vk[i]) * vl[i];
            acc *= h;
            CHECK(std::abs(acc - (k == l ? 1.0 : 0.0)) < 1e-8);
        }
}

TEST_CASE("orthonormality in two dimensions") {
    PacketParams p = PacketParams::standard(2, 1.0);
    // admissible non-trivial pair: A = diag(r, 1), B = diag((1 + i b)/r, 1 + i c)
    p.A(0, 0) = 1.3;
    p.B(0, 0) = cplx(1.0, 0.4) / 1.3;
    p.B(1, 1) = cplx(1.0, -0.2);
    const PacketEvaluator ev(p, 2);
    const int n = 161;
    const double half = 7.0, h = 2 * half / (n - 1);
    std::vector<double> ys;
    ys.reserve(static_cast<std::size_t>(n) * n * 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            ys.push_back(-half + h * i);
            ys.push_back(-half + h * j);
        }
    const auto table = ev.unit_table(ys, 2);
    const auto& set = ev.index_set();
    for (std::size_t r1 = 0; r1 < set.level_end(2); ++r1)
        for (std::size_t r2 = r1; r2 < set.level_end(2); ++r2) {
            cplx acc = 0.0;
            const cplx* vk = table.values(static_cast<int>(r1));
            const cplx* vl = table.values(static_cast<int>(r2));
            for (std::size_t i = 0; i < table.points(); ++i) acc += std::conj(vk[i]) * vl[i];
            acc *= h * h;
            CHECK(std::abs(acc - (r1 == r2 ? 1.0 : 0.0)) < 1e-7);
        }
}

TEST_CASE("gradient: closed form and finite differences") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    // k = 0 closed form: grad phi0 = [-(1/eps) B A^{-1} (x-a) + i eta/eps] phi0
    for (int it = 0; it < 8; ++it) {
        const double eps = 0.1 + 0.4 * std::abs(u(gen));
        const auto p = packet_1d(eps, u(gen), u(gen), 0.8 + std::abs(u(gen)), u(gen), u(gen));
        const PacketEvaluator ev(p, 2);
        const double x = p.a[0] + std::sqrt(eps) * u(gen);
        const cplx phi = ev.value({0, 0, 0}, &x);
        const cplx ba = p.B(0, 0) / p.A(0, 0);
        const cplx expect = (-(ba * (x - p.a[0])) / eps + cplx(0, 1) * p.eta[0] / eps) * phi;
        const CVec g = ev.gradient({0, 0, 0}, &x);
        CHECK(std::abs(g[0] - expect) < 1e-10 * std::abs(expect));
    }

    // x = a: gradient reduces to (i/eps) eta phi0(a)
    {
        const auto p = packet_1d(0.3, 0.7, 1.1, 1.0, 0.0, 0.5);
        const PacketEvaluator ev(p, 2);
        const double xa = p.a[0];
        const CVec g = ev.gradient({0, 0, 0}, &xa);
        const cplx expect = cplx(0, 1) / 0.3 * 1.1 * ev.value({0, 0, 0}, &xa);
        CHECK(std::abs(g[0] - expect) < 1e-12 * std::abs(expect));
    }

    // generic (p, k, x) against central differences
    for (int it = 0; it < 10; ++it) {
        const double eps = 0.2 + 0.3 * std::abs(u(gen));
        PacketParams p = PacketParams::standard(2, eps);
        p.a = RVec::Constant(2, 0.3 * u(gen));
        p.eta = RVec::Constant(2, u(gen));
        const PacketEvaluator ev(p, 3);
        const MultiIndex k{1 + static_cast<int>(gen() % 2), static_cast<int>(gen() % 2), 0};
        double x[2] = {p.a[0] + std::sqrt(eps) * u(gen), p.a[1] + std::sqrt(eps) * u(gen)};
        const CVec g = ev.gradient(k, x);
        const double h = std::sqrt(eps) * 1e-6;
        for (int j = 0; j < 2; ++j) {
            double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
            xp[j] += h;
            xm[j] -= h;
            const cplx fd = (ev.value(k, xp) - ev.value(k, xm)) / (2 * h);
            CHECK(std::abs(g[j] - fd) < 1e-6 * (std::abs(fd) + std::abs(g[0]) + 1e-12));
        }
    }
}

TEST_CASE("scaling law is exact in eps") {
    const double ys[] = {-2.3, -0.4, 0.0, 1.1, 3.7};
    for (int k = 0; k <= 3; ++k) {
        double ref = -1.0;
        for (const double eps : {1.0, 0.1, 0.01}) {
            auto p = packet_1d(eps, 0.3, -0.8, 1.1, 0.2, 0.6);
            const PacketEvaluator ev(p, 3);
            double probe = 0.0;
            for (const double y : ys) {
                const double x = p.a[0] + std::sqrt(eps) * y;
                probe += std::abs(ev.value({k, 0, 0}, &x)) * std::pow(eps, 0.25);
            }
            if (ref < 0)
                ref = probe;
            else
                CHECK(std::abs(probe - ref) < 1e-12 * ref);
        }
    }
}

TEST_CASE("position ladder selection rule") {
    // quadrature of ((x-a)_j / sqrt(eps)) phi_k against phi_l vanishes unless
    // |k - l| = 1
    const auto p = packet_1d(0.25, 0.1, 0.7, 1.15, -0.4, 0.3);
    const PacketEvaluator ev(p, 3);
    const int n = 2401;
    const double half = 11.0, h = 2 * half / (n - 1);
    std::vector<double> ys(n);
    for (int i = 0; i < n; ++i) ys[i] = -half + h * i;
    const auto table = ev.unit_table(std::span<const double>(ys.data(), ys.size()), 3);
    for (int k = 0; k <= 3; ++k)
        for (int l = 0; l <= 3; ++l) {
            cplx acc = 0.0;
            const cplx* vk = table.values(ev.index_set().rank({k, 0, 0}));
            const cplx* vl = table.values(ev.index_set().rank({l, 0, 0}));
            for (int i = 0; i < n; ++i) acc += ys[static_cast<std::size_t>(i)] * std::conj(vl[i]) * vk[i];
            acc *= h;
            if (std::abs(k - l) != 1) CHECK(std::abs(acc) < 1e-8);
        }
}

TEST_CASE("envelope dominates the packet") {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int it = 0; it < 4; ++it) {
        const double eps = 0.05 + 0.3 * std::abs(u(gen));
        const auto p = packet_1d(eps, u(gen), u(gen), 0.7 + std::abs(u(gen)), u(gen), u(gen));
        const PacketEvaluator ev(p, 4);
        const MultiIndex k{static_cast<int>(gen() % 5), 0, 0};
        const auto env = ev.fit_envelope(k);
        for (int i = 0; i < 10000; ++i) {
            const double y = -8.0 + 16.0 * i / 9999.0;
            const double x = p.a[0] + std::sqrt(eps) * y;
            CHECK(env.bound_at(p, &x) * (1 + 1e-12) >=
                  std::abs(ev.value(k, &x)));
        }
        // decay beyond the fitted region
        CHECK(env.unit_bound(50.0) < 1e-200);
    }

    // k = 0 with identity frame: exact Gaussian envelope with c = 1
    const PacketParams ps = PacketParams::standard(1, 1.0);
    const PacketEvaluator evs(ps, 1);
    const auto env = evs.fit_envelope({0, 0, 0});
    CHECK(env.c == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(env.C == doctest::Approx(1.1 * std::pow(std::numbers::pi, -0.25)).epsilon(1e-6));
}

TEST_CASE("quadrature moments") {
    std::mt19937_64 gen(14);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int it = 0; it < 4; ++it) {
        const double eps = 0.1 + 0.5 * std::abs(u(gen));
        const auto p = packet_1d(eps, u(gen), u(gen), 0.8 + 0.5 * std::abs(u(gen)), u(gen), u(gen));
        const PacketEvaluator ev(p, 2);
        const MultiIndex k{static_cast<int>(gen() % 3), 0, 0};
        const auto m = ev.moments(k);
        CHECK(std::abs(m.mean_x[0] - p.a[0]) < 1e-8);
        CHECK(std::abs(m.mean_p[0] - p.eta[0]) < 1e-8);
        CHECK(m.norm_deficit < 1e-6);
    }

    // k = 0, A = I, d = 1: position variance eps/2
    const double eps = 0.37;
    const PacketParams p = PacketParams::standard(1, eps);
    const PacketEvaluator ev(p, 1);
    const auto m = ev.moments({0, 0, 0});
    // central_norms aligned with multi_indices_up_to(1, 4): |alpha| = 1 is entry 1
    CHECK(m.central_norms[1] * m.central_norms[1] == doctest::Approx(eps / 2).epsilon(1e-10));
    // higher moments scale like eps^{|alpha|/2}
    CHECK(m.central_norms[2] == doctest::Approx(std::sqrt(3.0) / 2.0 * eps).epsilon(1e-9));
}

TEST_CASE("contract violations") {
    PacketParams bad = PacketParams::standard(1, 0.5);
    bad.B(0, 0) = 2.0;  // not admissible
    CHECK_THROWS_AS(PacketEvaluator(bad, 2), std::invalid_argument);

    const PacketParams p = PacketParams::standard(1, 0.5);
    const PacketEvaluator ev(p, 2);
    const double x = 0.0;
    CHECK_THROWS_AS((void)ev.value({3, 0, 0}, &x), std::invalid_argument);
    CHECK_THROWS_AS(PacketEvaluator(p, -1), std::invalid_argument);
}
