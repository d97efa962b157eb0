// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Runs the full pipeline at desk scale; see README for the
// settings behind each number.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>
#include <vector>

#include "hb/ensemble_stats.hpp"
#include "hb/experiment.hpp"

using namespace hb;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail) {
    std::printf("%s criterion %2d: %-34s %s\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

ClassicalTrajectory make_traj(const PotentialModel& V, double a0, double eta0, double T,
                              double tol = 1e-11) {
    ClassicalState init = ClassicalState::standard(V.dim());
    init.a[0] = a0;
    init.eta[0] = eta0;
    return integrate_flow(init, V, T, tol);
}

// ---------------------------------------------------------------------------
// criterion 1: quadratic exactness of the semiclassical propagation
void criterion_1() {
    Timer timer;
    const double eps = 0.1, T = 2.0 * std::numbers::pi;
    const auto V = PotentialModel::harmonic(1);
    const auto cl = make_traj(V, 1.0, 0.0, T);

    double worst_l2 = 0.0, worst_sup = 0.0;
    for (int k = 0; k <= 2; ++k) {
        const GridSpec g = GridSpec::auto_for(cl, eps, k, 1e-4);
        const PacketEvaluator ev0(cl.packet_at(0.0, eps), k);
        const GridWave psi0 = GridWave::from_packet(g, ev0, {k, 0, 0});
        PropagateOptions opt;
        opt.dt_target = 1e-4;
        opt.snapshot_spacing = T / 4.0;
        const auto seq = propagate(psi0, V, T, opt);
        const PacketEvaluator evT(cl.packet_at(T, eps), k);
        const auto cmp = compare_norms(seq.final_wave(), evT, {k, 0, 0});
        worst_l2 = std::max(worst_l2, cmp.l2_diff);
        worst_sup = std::max(worst_sup, cmp.phase_aligned_sup);
    }
    const double secs = timer.seconds();
    report(1, "harmonic exactness (k = 0,1,2)",
           worst_l2 < 1e-6 && worst_sup < 1e-5 && secs < 120.0,
           fmt("L2 %.3g (<1e-6), aligned sup %.3g (<1e-5), %.0f s (<120)", worst_l2, worst_sup,
               secs));
}

// shared cosine sweep (exact backend) for criteria 2, 3, 4, 6, 7, 8, 9
ExperimentResult sweep_for_k(int k, int paths, std::ostream& log) {
    std::ostringstream cfg;
    cfg << "potential = cosine\n"
           "eps = 0.2, 0.1, 0.05, 0.025\n"
           "backend = exact\n"
           "dimension = 1\n"
           "eta0 = 1\n"
           "a0 = 0\n"
           "T = 2\n"
           "R = 1, 2, 3, 4, 5\n"
           "delta_t = 0.25\n"
           "seed = 20240905\n"
           "remainder_m = 3\n"
           "flux = true\n"
        << "k = " << k << "\n"
        << "paths = " << paths << "\n";
    return run_experiment(ExperimentConfig::parse_text(cfg.str()), log);
}

void criteria_2_to_9(std::ostream& log) {
    Timer sweep_timer;
    const auto res0 = sweep_for_k(0, 2000, log);
    const auto res1 = sweep_for_k(1, 2000, log);
    const double sweep_secs = sweep_timer.seconds();
    const auto& eps = res0.config.eps;
    const auto& R = res0.config.R;

    // --- criterion 2: sqrt(eps) L2 rate for k = 0 and k = 1
    {
        const double s0 = res0.fits.at("l2_diff").slope;
        const double s1 = res1.fits.at("l2_diff").slope;
        const bool ok = s0 > 0.4 && s0 < 0.6 && s1 > 0.4 && s1 < 0.6 && sweep_secs < 600.0;
        report(2, "L2 rate slope in [0.4, 0.6]", ok,
               fmt("slope k0 %.3f, k1 %.3f, sweep %.0f s", s0, s1, sweep_secs));
    }

    // --- criterion 3: pointwise estimate scalings
    {
        auto spread = [&](const ExperimentResult& r, auto get, double power) {
            double lo = 1e300, hi = 0.0;
            for (const auto& per : r.per_eps) {
                const double v = get(per) * std::pow(per.eps, power);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            return hi / lo;
        };
        const double sup0 =
            spread(res0, [](const PerEpsResult& p) { return p.linf_diff; }, 0.25);
        const double sup1 =
            spread(res1, [](const PerEpsResult& p) { return p.linf_diff; }, 0.25);
        const double grad0 =
            spread(res0, [](const PerEpsResult& p) { return p.linf_grad_diff; }, 1.25);
        const double grad1 =
            spread(res1, [](const PerEpsResult& p) { return p.linf_grad_diff; }, 1.25);
        const bool ok = sup0 <= 3.0 && sup1 <= 3.0 && grad0 <= 3.0 && grad1 <= 3.0;
        report(3, "pointwise scaling spread <= 3", ok,
               fmt("eps^1/4 sup: %.2f / %.2f, eps^5/4 grad: %.2f / %.2f", sup0, sup1, grad0,
                   grad1));

        // momentum-norm scaling of the grid solution on the same sweep:
        // ||(p - eta)^alpha psi|| / eps^{|alpha|/2} bounded for |alpha| <= 2
        const double p1 =
            spread(res0, [](const PerEpsResult& p) { return p.momentum_norm_1; }, -0.5);
        const double p2 =
            spread(res0, [](const PerEpsResult& p) { return p.momentum_norm_2; }, -1.0);
        report(3, "momentum-norm scaling spread <= 3", p1 <= 3.0 && p2 <= 3.0,
               fmt("|alpha|=1: %.2f, |alpha|=2: %.2f", p1, p2));
    }

    // --- criterion 4: theorem coverage with R fixed at the largest eps
    auto coverage_check = [&](const ExperimentResult& r, const char* tag) {
        std::size_t rstar = R.size();
        for (std::size_t i = 0; i < R.size(); ++i)
            if (r.per_eps.front().deviation[i].probability >= 0.95) {
                rstar = i;
                break;
            }
        if (rstar == R.size()) {
            report(4, fmt("coverage (%s)", tag), false, "no R reaches 0.95 at eps = 0.2");
            return rstar;
        }
        bool ok = true;
        std::ostringstream detail;
        detail << "R* = " << R[rstar];
        for (const auto& per : r.per_eps) {
            const auto& st = per.deviation[rstar];
            if (st.probability < 0.95 - 3.0 * st.sigma) ok = false;
            detail << fmt(" | %.3f", st.probability);
        }
        double qlo = 1e300, qhi = 0.0;
        for (const auto& per : r.per_eps) {
            const double v = per.q95_dev / std::sqrt(per.eps);
            qlo = std::min(qlo, v);
            qhi = std::max(qhi, v);
        }
        if (qhi / qlo > 2.0) ok = false;
        detail << fmt(" | q95/sqrt(eps) spread %.2f (<=2)", qhi / qlo);
        report(4, fmt("coverage across the sweep (%s)", tag), ok, detail.str());
        return rstar;
    };
    const std::size_t rstar0 = coverage_check(res0, "k=0");
    coverage_check(res1, "k=1");

    // --- criterion 6: flux domination at eps = 0.05 (k = 0)
    {
        const PerEpsResult* per = nullptr;
        for (const auto& p : res0.per_eps)
            if (std::abs(p.eps - 0.05) < 1e-12) per = &p;
        bool ok = per != nullptr;
        std::ostringstream detail;
        double prev_bound = 1e300;
        if (per) {
            for (std::size_t i = 0; i < R.size(); ++i) {
                const double exit_p = 1.0 - per->deviation[i].probability;
                const double bound = per->flux[i].bound();
                if (exit_p > bound + 3.0 * per->deviation[i].sigma) ok = false;
                if (bound > prev_bound + 1e-12) ok = false;  // must decrease in R
                prev_bound = bound;
                detail << fmt("R%.0f: %.4f<=%.4f ", R[i], exit_p, bound);
            }
        }
        report(6, "flux bound dominates exits", ok, detail.str());
    }

    // --- criterion 7: equivariance at eps = 0.05, N = 5000
    {
        std::ostringstream cfg;
        cfg << "potential = cosine\neps = 0.05\nbackend = exact\neta0 = 1\nT = 2\n"
               "R = 3\ndelta_t = 0.25\nseed = 777\nflux = false\nremainder_m = 0\n"
               "k = 0\npaths = 5000\n";
        const auto resq = run_experiment(ExperimentConfig::parse_text(cfg.str()), log);
        const auto& per = resq.per_eps.front();
        const bool ok = per.has_chi2 && per.chi2.p_value > 0.01;
        report(7, "equivariance chi^2 (N = 5000)", ok,
               per.has_chi2 ? fmt("p = %.4f (dof %d, stat %.1f)", per.chi2.p_value, per.chi2.dof,
                                  per.chi2.statistic)
                            : "chi^2 unavailable");
    }

    // --- criterion 8: velocity corollary for k = 0
    {
        bool ok = rstar0 < R.size();
        std::ostringstream detail;
        double vlo = 1e300, vhi = 0.0;
        if (ok) {
            for (const auto& per : res0.per_eps) {
                const double v = per.vdev_good_max[rstar0] / std::sqrt(per.eps);
                vlo = std::min(vlo, v);
                vhi = std::max(vhi, v);
                // windowed-average bound (R/dt) sqrt(eps) holds on the good set
                const double cap = (R[rstar0] / 0.25) * std::sqrt(per.eps) * (1.0 + 1e-9);
                if (per.avg_vdev_good_max[rstar0] > cap) ok = false;
            }
            detail << fmt("max|v-eta|/sqrt(eps) in [%.3f, %.3f], spread %.2f (<=2)", vlo, vhi,
                          vhi / vlo);
            if (vhi / vlo > 2.0) ok = false;
        }
        report(8, "velocity corollary (k = 0)", ok, detail.str());
    }

    // --- criterion 9: remainder norm rates, and zero for harmonic
    {
        const double s0 = res0.fits.at("remainder").slope;
        const double s1 = res1.fits.at("remainder").slope;
        const auto Vh = PotentialModel::harmonic(1);
        const auto clh = make_traj(Vh, 1.0, 0.0, 2.0);
        double hmax = 0.0;
        for (double eps_h : {0.2, 0.05}) {
            const PacketEvaluator ev(clh.packet_at(1.0, eps_h), 1);
            hmax = std::max(hmax, remainder_norm(ev, {1, 0, 0}, Vh, 3));
        }
        const bool ok = s0 > 1.35 && s0 < 1.65 && s1 > 1.35 && s1 < 1.65 && hmax < 1e-10;
        report(9, "remainder norm rate m/2 = 1.5", ok,
               fmt("slope k0 %.3f, k1 %.3f, harmonic max %.1e", s0, s1, hmax));
    }
}

// ---------------------------------------------------------------------------
// criterion 5: closed-form Bohmian oracles at tight tolerance
void criterion_5() {
    const double eps = 0.06, T = 2.0;
    PathOptions opt;
    opt.tol = 1e-9;
    bool ok = true;
    std::ostringstream detail;

    // harmonic rigid transport
    {
        const auto V = PotentialModel::harmonic(1);
        const auto cl = make_traj(V, 1.0, 0.0, T);
        const SemiclassicalBackend b(cl, eps, {0, 0, 0});
        double worst = 0.0;
        for (double y0 : {-2.0, -0.5, 0.9, 2.3}) {
            const double x0 = 1.0 + y0 * std::sqrt(eps);
            const auto path = integrate_path(b, &x0, T, opt);
            if (!path.completed()) ok = false;
            for (const auto& ps : path.samples)
                worst = std::max(worst, std::abs(ps.q[0] - (x0 + cl.at(ps.t).a[0] - 1.0)));
        }
        detail << fmt("rigid %.2e ", worst);
        ok = ok && worst < 1e-6;
    }

    // free-particle sqrt(1 + t^2) spreading
    {
        const auto V = PotentialModel::free(1);
        const auto cl = make_traj(V, 0.0, 0.8, T);
        const SemiclassicalBackend b(cl, eps, {0, 0, 0});
        double worst = 0.0;
        for (double y0 : {-1.8, 0.4, 1.2}) {
            const double x0 = y0 * std::sqrt(eps);
            const auto path = integrate_path(b, &x0, T, opt);
            if (!path.completed()) ok = false;
            for (const auto& ps : path.samples) {
                const double want = cl.at(ps.t).a[0] + x0 * std::sqrt(1.0 + ps.t * ps.t);
                worst = std::max(worst, std::abs(ps.q[0] - want));
            }
        }
        detail << fmt("spread %.2e ", worst);
        ok = ok && worst < 1e-6;
    }

    // harmonic coverage equals erf(R)
    {
        const auto V = PotentialModel::harmonic(1);
        const auto cl = make_traj(V, 1.0, 0.0, T);
        const SemiclassicalBackend b(cl, eps, {0, 0, 0});
        const PacketEvaluator ev0(cl.packet_at(0.0, eps), 0);
        const auto x0s = born_sample(ev0, {0, 0, 0}, 4000, 424242);
        EnsembleResult ens;
        ens.eps = eps;
        PathOptions popt;
        for (const auto& x0 : x0s)
            ens.paths.push_back(summarize_path(integrate_path(b, x0.data(), T, popt), cl, 0.5));
        for (const double r : {1.0, 2.0}) {
            const auto st = deviation_stat(ens, r);
            const double want = std::erf(r);
            detail << fmt("| R=%.0f %.4f~%.4f ", r, st.probability, want);
            if (std::abs(st.probability - want) > 3.0 * st.sigma + 1e-9) ok = false;
        }
    }
    report(5, "closed-form Bohmian oracles", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 10: packet unit checks at acceptance tolerances
void criterion_10() {
    bool ok = true;
    std::ostringstream detail;

    // Gram identity, |k| <= 3
    {
        PacketParams p = PacketParams::standard(1, 1.0);
        p.A(0, 0) = 1.25;
        p.B(0, 0) = cplx(1.0, 0.35) / 1.25;
        const PacketEvaluator ev(p, 3);
        const int n = 2001;
        const double half = 10.0, h = 2 * half / (n - 1);
        std::vector<double> ys(n);
        for (int i = 0; i < n; ++i) ys[i] = -half + h * i;
        const auto t = ev.unit_table(std::span<const double>(ys.data(), ys.size()), 3);
        double worst = 0.0;
        for (int k = 0; k <= 3; ++k)
            for (int l = 0; l <= 3; ++l) {
                cplx acc = 0.0;
                for (int i = 0; i < n; ++i)
                    acc += std::conj(t.values(ev.index_set().rank({k, 0, 0}))[i]) *
                           t.values(ev.index_set().rank({l, 0, 0}))[i];
                worst = std::max(worst, std::abs(acc * h - (k == l ? 1.0 : 0.0)));
            }
        detail << fmt("gram %.1e ", worst);
        ok = ok && worst < 1e-8;
    }

    // ladder against one symbolic application of the raising operator:
    // phi_1 = sqrt(2/eps) conj(b) ... reduces to sqrt(2) x phi_0 for the
    // standard frame, and a generic-frame spot check via the polynomial route
    {
        const PacketParams p = PacketParams::standard(1, 1.0);
        const PacketEvaluator ev(p, 1);
        double worst = 0.0;
        for (double x : {-1.1, 0.3, 1.9}) {
            const cplx want = std::sqrt(2.0) * x * std::pow(std::numbers::pi, -0.25) *
                              std::exp(-0.5 * x * x);
            worst = std::max(worst, std::abs(ev.value({1, 0, 0}, &x) - want));
        }
        PacketParams q = PacketParams::standard(1, 0.3);
        q.A(0, 0) = 1.4;
        q.B(0, 0) = cplx(1.0, 0.5) / 1.4;
        q.eta[0] = 0.7;
        const PacketEvaluator evq(q, 2);
        const cplx a = q.A(0, 0), b = q.B(0, 0);
        for (double x : {-0.4, 0.25}) {
            // (A+)^2 phi_0 / sqrt(2) by symbolic differentiation of the
            // Gaussian: poly route with lin = conj(b) + conj(a) b/a, dcoef = -eps conj(a)
            const cplx lin = (std::conj(b) + std::conj(a) * b / a) / std::sqrt(2.0 * 0.3);
            const cplx dco = -0.3 * std::conj(a) / std::sqrt(2.0 * 0.3);
            const double u = x;  // a = 0
            const cplx phi0 = std::pow(std::numbers::pi * 0.3, -0.25) / std::sqrt(a) *
                              std::exp(-0.5 * (b / a) * u * u / 0.3 +
                                       cplx(0, 1) * q.eta[0] * u / 0.3);
            const cplx p1 = lin * u;                                  // degree-1 coefficient poly
            const cplx p2 = (lin * u * p1 + dco * lin) / std::sqrt(2.0);  // apply twice, 1/sqrt(2!)
            worst = std::max(worst, std::abs(evq.value({1, 0, 0}, &x) - p1 * phi0));
            worst = std::max(worst, std::abs(evq.value({2, 0, 0}, &x) - p2 * phi0));
        }
        detail << fmt("ladder %.1e ", worst);
        ok = ok && worst < 1e-10;
    }

    // gradient against central differences
    {
        PacketParams p = PacketParams::standard(1, 0.2);
        p.a[0] = 0.3;
        p.eta[0] = 0.9;
        const PacketEvaluator ev(p, 2);
        double worst = 0.0;
        const double h = std::sqrt(0.2) * 1e-6;
        for (int k = 0; k <= 2; ++k)
            for (double y : {-1.3, 0.2, 1.8}) {
                const double x = 0.3 + y * std::sqrt(0.2);
                const double xp = x + h, xm = x - h;
                const cplx fd = (ev.value({k, 0, 0}, &xp) - ev.value({k, 0, 0}, &xm)) / (2 * h);
                const CVec g = ev.gradient({k, 0, 0}, &x);
                worst = std::max(worst, std::abs(g[0] - fd) / (1.0 + std::abs(fd)));
            }
        detail << fmt("grad %.1e ", worst);
        ok = ok && worst < 1e-6;
    }

    // moments: mean_x = a, mean_p = eta
    {
        PacketParams p = PacketParams::standard(1, 0.15);
        p.a[0] = -0.4;
        p.eta[0] = 1.2;
        const PacketEvaluator ev(p, 2);
        const auto m = ev.moments({2, 0, 0});
        const double ex = std::abs(m.mean_x[0] + 0.4), ep = std::abs(m.mean_p[0] - 1.2);
        detail << fmt("moments %.1e/%.1e ", ex, ep);
        ok = ok && ex < 1e-8 && ep < 1e-8;
    }
    report(10, "packet unit checks", ok, detail.str());
}

}  // namespace

int main() {
    std::ostringstream quiet;
    std::ostream& log = std::cerr;

    criterion_1();
    criterion_5();
    criterion_10();
    criteria_2_to_9(log);

    if (g_failures > 0) {
        std::printf("%d criterion check(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
