#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hb/potential.hpp"

using hb::MultiIndex;
using hb::PotentialModel;

TEST_CASE("harmonic closed forms") {
    const auto V = PotentialModel::harmonic(3);
    const double x[3] = {1.0, 0.0, 0.0};
    CHECK(V.value(x) == doctest::Approx(0.5).epsilon(1e-15));
    double g[3];
    V.gradient(x, g);
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
    double h[9];
    V.hessian(x, h);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(h[i * 3 + j] == (i == j ? 1.0 : 0.0));
}

TEST_CASE("free potential is identically zero") {
    const auto V = PotentialModel::free(2);
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int it = 0; it < 20; ++it) {
        const double x[2] = {u(gen), u(gen)};
        for (int order = 0; order <= 4; ++order)
            for (const auto& a : hb::multi_indices_of_order(2, order))
                CHECK(V.derivative(x, a) == 0.0);
    }
}

TEST_CASE("cosine at the origin") {
    for (int d : {1, 2, 3}) {
        const auto V = PotentialModel::cosine(d);
        const double x[3] = {0, 0, 0};
        CHECK(V.value(x) == doctest::Approx(static_cast<double>(d)));
        double g[3];
        V.gradient(x, g);
        for (int j = 0; j < d; ++j) CHECK(g[j] == doctest::Approx(0.0));
        double h[9];
        V.hessian(x, h);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) CHECK(h[i * d + j] == doctest::Approx(i == j ? -1.0 : 0.0));
    }
}

TEST_CASE("taylor remainder definitions") {
    // m = 1 is V(x) - V(a) for any family
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(-2, 2);
    for (const auto& V :
         {PotentialModel::cosine(2), PotentialModel::gaussian_well(2, 0.8, 1.3)}) {
        for (int it = 0; it < 10; ++it) {
            const double x[2] = {u(gen), u(gen)}, a[2] = {u(gen), u(gen)};
            CHECK(V.taylor_remainder(x, a, 1) ==
                  doctest::Approx(V.value(x) - V.value(a)).epsilon(1e-13));
        }
    }

    // quadratic potential has no third remainder
    const auto H = PotentialModel::harmonic(3, {1.0, 2.0, 0.5});
    for (int it = 0; it < 10; ++it) {
        const double x[3] = {u(gen), u(gen), u(gen)}, a[3] = {u(gen), u(gen), u(gen)};
        CHECK(std::abs(H.taylor_remainder(x, a, 3)) < 1e-12);
    }
}

TEST_CASE("cosine remainder against the independent series") {
    // V = cos in 1d about a = 0: V_3(x, 0) = sum_{n>=2} (-1)^n x^{2n} / (2n)!
    const auto V = PotentialModel::cosine(1);
    const double x = 0.1;
    double series = 0.0;
    double term;
    for (int n = 2; n <= 12; ++n) {
        term = std::pow(x, 2 * n);
        for (int i = 1; i <= 2 * n; ++i) term /= i;
        series += (n % 2 == 0) ? term : -term;
    }
    const double a = 0.0;
    CHECK(std::abs(V.taylor_remainder(&x, &a, 3) - series) < 1e-12);
    // frozen oracle value
    CHECK(series == doctest::Approx(4.1652780257660955e-06).epsilon(1e-12));
}

TEST_CASE("remainder plus polynomial reconstructs V") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-2, 2);
    const auto V = PotentialModel::parse("cosine:0.7,1.3 + gaussian_well:0.9,1.1", 2);
    for (int it = 0; it < 50; ++it) {
        const double x[2] = {u(gen), u(gen)}, a[2] = {u(gen), u(gen)};
        const int m = 1 + static_cast<int>(gen() % 4);
        double poly = 0.0;
        double dx[3] = {x[0] - a[0], x[1] - a[1], 0.0};
        for (int order = 0; order < m; ++order)
            for (const auto& al : hb::multi_indices_of_order(2, order))
                poly += V.derivative(a, al) / hb::multi_factorial(al) * hb::multi_power(dx, al, 2);
        CHECK(V.taylor_remainder(x, a, m) + poly == doctest::Approx(V.value(x)).epsilon(1e-10));
    }
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-3, 3);
    const double h = 1e-5;
    for (const auto& V : {PotentialModel::cosine(3, 1.2, 0.9),
                          PotentialModel::gaussian_well(3, 1.5, 0.8), PotentialModel::harmonic(3)}) {
        for (int it = 0; it < 20; ++it) {
            double x[3] = {u(gen), u(gen), u(gen)};
            double g[3];
            V.gradient(x, g);
            for (int j = 0; j < 3; ++j) {
                double xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
                xp[j] += h;
                xm[j] -= h;
                const double fd = (V.value(xp) - V.value(xm)) / (2 * h);
                CHECK(g[j] == doctest::Approx(fd).epsilon(1e-6).scale(1.0 + std::abs(g[j])));
            }
        }
    }
}

TEST_CASE("derivative of the remainder shifts the order") {
    // D^alpha V_m = (D^alpha V)_{m - |alpha|}; exercised through the remainder
    // bookkeeping by re-deriving both sides from raw derivatives
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const auto V = PotentialModel::parse("cosine:1,1 + gaussian_well:0.6,1.0", 2);
    for (int it = 0; it < 40; ++it) {
        const double x[2] = {u(gen), u(gen)}, a[2] = {u(gen), u(gen)};
        double dx[3] = {x[0] - a[0], x[1] - a[1], 0.0};
        const int m = 2 + static_cast<int>(gen() % 3);
        for (const auto& alpha : hb::multi_indices_up_to(2, std::min(2, m))) {
            if (alpha.order() == 0 || alpha.order() > m) continue;

            // left: D^alpha V(x) - D^alpha of the degree-(m-1) Taylor polynomial
            double left = 0.0;
            {
                double poly = 0.0;
                for (int order = 0; order < m; ++order)
                    for (const auto& beta : hb::multi_indices_of_order(2, order)) {
                        MultiIndex gamma;
                        bool ok = true;
                        for (int j = 0; j < 3; ++j) {
                            gamma[j] = beta[j] - alpha[j];
                            ok = ok && gamma[j] >= 0;
                        }
                        if (!ok) continue;
                        poly += V.derivative(a, beta) / hb::multi_factorial(gamma) *
                                hb::multi_power(dx, gamma, 2);
                    }
                left = V.derivative(x, alpha) - poly;
            }

            // right: remainder of order m-|alpha| of the derivative potential,
            // assembled from shifted derivatives
            double right = V.derivative(x, alpha);
            for (int order = 0; order < m - alpha.order(); ++order)
                for (const auto& gamma : hb::multi_indices_of_order(2, order)) {
                    MultiIndex beta = gamma;
                    for (int j = 0; j < 3; ++j) beta[j] += alpha[j];
                    right -= V.derivative(a, beta) / hb::multi_factorial(gamma) *
                             hb::multi_power(dx, gamma, 2);
                }
            CHECK(left == doctest::Approx(right).epsilon(1e-10).scale(1.0));
        }
    }
}

TEST_CASE("G_V boundedness report") {
    const double lo = -10.0, hi = 10.0;

    const auto C = PotentialModel::cosine(1);
    const auto rc = C.check_gv(&lo, &hi, 2001);
    CHECK(rc.pass);
    CHECK(rc.max_overall <= 1.0 + 1e-12);
    CHECK(C.is_bounded());

    const auto H = PotentialModel::harmonic(1);
    const auto rh = H.check_gv(&lo, &hi, 2001);
    CHECK_FALSE(rh.pass);
    CHECK(rh.max_by_order[1] == doctest::Approx(10.0));  // max |V'| on the box
    CHECK_FALSE(H.is_bounded());

    const auto F = PotentialModel::free(1);
    const auto rf = F.check_gv(&lo, &hi, 101);
    CHECK(rf.pass);
    CHECK(rf.max_overall == 0.0);

    const auto G = PotentialModel::gaussian_well(2, 1.4, 0.9);
    const double lo2[2] = {-6, -6}, hi2[2] = {6, 6};
    const auto rg = G.check_gv(lo2, hi2, 121);
    CHECK(rg.pass);
    CHECK(G.is_bounded());
}

TEST_CASE("parse errors and round trip") {
    CHECK_THROWS_AS((void)PotentialModel::parse("banana", 1), std::invalid_argument);
    CHECK_THROWS_AS((void)PotentialModel::parse("cosine:1,x", 1), std::invalid_argument);
    CHECK_THROWS_AS((void)PotentialModel::parse("", 1), std::invalid_argument);
    const auto V = PotentialModel::parse(" cosine : 2 , 0.5 + free ", 2);
    const double x[2] = {0.3, -0.4};
    CHECK(V.value(x) ==
          doctest::Approx(2.0 * (std::cos(0.5 * 0.3) + std::cos(0.5 * -0.4))).epsilon(1e-14));
}
