#include "hb/ensemble_stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numbers>

#include "hb/errors.hpp"

namespace hb {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : s_(seed) {
    // warm up the scrambler so nearby seeds decorrelate
    for (int i = 0; i < 4; ++i) (void)splitmix64(s_);
}

Rng Rng::for_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t mix = seed;
    (void)splitmix64(mix);
    return Rng(mix ^ (0xD1B54A32D192ED03ull * (stream + 1)));
}

std::uint64_t Rng::next_u64() { return splitmix64(s_); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (have_cached_) {
        have_cached_ = false;
        return cached_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
}

std::vector<RVec> born_sample(const PacketEvaluator& ev, const MultiIndex& k, std::size_t n,
                              std::uint64_t seed) {
    const PacketParams& p = ev.params();
    const int d = p.dim();
    const double se = std::sqrt(p.eps);
    Rng rng(seed);
    std::vector<RVec> out;
    out.reserve(n);

    if (k.order() == 0) {
        // |phi_0|^2 is Gaussian in y with covariance (1/2) A A^* (a real
        // matrix for admissible pairs); x = a + sqrt(eps) y
        const RMat cov = 0.5 * (p.A * p.A.adjoint()).real();
        const Eigen::LLT<RMat> llt(cov);
        if (llt.info() != Eigen::Success)
            throw NumericalError("born_sample: covariance not positive definite");
        const RMat L = llt.matrixL();
        for (std::size_t i = 0; i < n; ++i) {
            RVec z(d);
            for (int j = 0; j < d; ++j) z[j] = rng.normal();
            out.push_back(p.a + se * (L * z));
        }
        return out;
    }

    // rejection against the fitted envelope: |phi_k|^2 <= C^2 (1+r)^{2|k|} e^{-c r^2}
    // <= M * N(0, sigma^2 I) with sigma^2 = 1/(2 c'), c' < c
    const PacketEnvelope env = ev.fit_envelope(k);
    const double cprime = 0.7 * env.c;
    const double sigma2 = 1.0 / (2.0 * cprime);
    double poly_max = 0.0;
    for (int i = 0; i <= 20000; ++i) {
        const double r = 12.0 * i / 20000.0;
        poly_max = std::max(poly_max,
                            std::pow(1.0 + r, 2 * k.order()) * std::exp(-(env.c - cprime) * r * r));
    }
    const double M =
        env.C * env.C * poly_max * std::pow(2.0 * std::numbers::pi * sigma2, 0.5 * d);

    std::size_t proposals = 0;
    const double sigma = std::sqrt(sigma2);
    double y[3];
    while (out.size() < n) {
        for (int j = 0; j < d; ++j) y[j] = sigma * rng.normal();
        ++proposals;
        double r2 = 0.0;
        for (int j = 0; j < d; ++j) r2 += y[j] * y[j];
        const double g = std::pow(2.0 * std::numbers::pi * sigma2, -0.5 * d) *
                         std::exp(-0.5 * r2 / sigma2);
        const double target = std::norm(ev.unit_value(k, y));
        const double accept = target / (M * g);
        if (accept > 1.0 + 1e-9)
            throw NumericalError("born_sample: envelope violated by the target density");
        if (rng.uniform() < accept) {
            RVec x(d);
            for (int j = 0; j < d; ++j) x[j] = p.a[j] + se * y[j];
            out.push_back(x);
        }
        if (proposals >= 10000 && static_cast<double>(out.size()) <
                                      1e-3 * static_cast<double>(proposals))
            throw NumericalError("born_sample: acceptance below 1e-3, envelope refit requested");
    }
    return out;
}

std::size_t EnsembleResult::abort_count() const {
    std::size_t c = 0;
    for (const auto& p : paths)
        if (!p.completed) ++c;
    return c;
}

PathSummary summarize_path(const BohmianPath& path, const ClassicalTrajectory& cl,
                           double delta_t) {
    PathSummary s;
    s.x0 = path.x0;
    s.completed = path.completed();
    s.abort_time = path.abort_time;
    s.min_scaled_amp = path.min_scaled_amp;
    if (path.samples.empty()) return s;

    const int d = static_cast<int>(path.x0.size());
    const std::size_t m = path.samples.size();
    s.q_final = path.samples.back().q;

    for (const auto& ps : path.samples) {
        const ClassicalState c = cl.at(ps.t);
        s.max_dev = std::max(s.max_dev, (ps.q - c.a).norm());
        s.max_vdev = std::max(s.max_vdev, (ps.v - c.eta).norm());
    }

    // windowed averages from increments: (Q(t+dt) - Q(t-dt)) / (2 dt)
    if (delta_t > 0.0 && m >= 3) {
        const double mesh_dt = path.samples[1].t - path.samples[0].t;
        const auto w = static_cast<std::size_t>(std::llround(delta_t / mesh_dt));
        if (w >= 1 && 2 * w < m) {
            for (std::size_t i = w; i + w < m; ++i) {
                const auto& lo = path.samples[i - w];
                const auto& hi = path.samples[i + w];
                const double denom = hi.t - lo.t;
                const ClassicalState clo = cl.at(lo.t);
                const ClassicalState chi = cl.at(hi.t);
                double dev = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double vbar = (hi.q[j] - lo.q[j]) / denom;
                    const double ebar = (chi.a[j] - clo.a[j]) / denom;
                    dev += (vbar - ebar) * (vbar - ebar);
                }
                s.max_avg_vdev = std::max(s.max_avg_vdev, std::sqrt(dev));
            }
        }
    }
    return s;
}

DeviationStat deviation_stat(const EnsembleResult& ens, double R) {
    DeviationStat st;
    st.total = ens.paths.size();
    const double radius = R * std::sqrt(ens.eps);
    for (const auto& p : ens.paths)
        if (p.completed && p.max_dev <= radius) ++st.inside;
    if (st.total > 0) {
        st.probability = static_cast<double>(st.inside) / static_cast<double>(st.total);
        st.sigma = std::sqrt(std::max(st.probability * (1.0 - st.probability), 1e-12) /
                             static_cast<double>(st.total));
    }
    return st;
}

double node_proximity_quantile(const EnsembleResult& ens, double q) {
    std::vector<double> v;
    v.reserve(ens.paths.size());
    for (const auto& p : ens.paths) v.push_back(p.min_scaled_amp);
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - f) + v[hi] * f;
}

RateFit rate_fit(const std::vector<double>& eps, const std::vector<double>& values) {
    if (eps.size() != values.size() || eps.size() < 4)
        throw std::invalid_argument("rate_fit: need >= 4 matched points");
    const auto n = static_cast<double>(eps.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0) || !(values[i] > 0.0))
            throw std::invalid_argument("rate_fit: nonpositive data");
        const double x = std::log(eps[i]);
        const double y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    RateFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;

    double ss = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double r = std::log(values[i]) - (fit.intercept + fit.slope * std::log(eps[i]));
        ss += r * r;
    }
    const double dof = n - 2.0;
    const double se_slope = std::sqrt((ss / dof) / (sxx - sx * sx / n));
    const boost::math::students_t dist(dof);
    fit.ci95 = boost::math::quantile(dist, 0.975) * se_slope;
    return fit;
}

FluxBound flux_bound(const ClassicalTrajectory& cl, double eps, const MultiIndex& k, double R,
                     double T, int time_intervals, int angular_points) {
    if (R < 0.0) throw std::invalid_argument("flux_bound: negative radius");
    const ClassicalState s0 = cl.at(cl.t_begin());
    const int d = s0.dim();

    // --- initial tail: 1 - integral of |phi|^2 over the unit ball of radius R
    auto ball_mass = [&](int nr, int nang) {
        const PacketEvaluator ev(cl.packet_at(cl.t_begin(), eps), k.order());
        // Gauss-Legendre nodes on [0, R] (or [-R, R] in 1d)
        auto gl = [](int n, double a, double b, std::vector<double>& xs, std::vector<double>& ws) {
            xs.resize(static_cast<std::size_t>(n));
            ws.resize(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                // Newton on Legendre P_n
                double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
                for (int it = 0; it < 100; ++it) {
                    double p0 = 1.0, p1 = x;
                    for (int j = 2; j <= n; ++j) {
                        const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
                        p0 = p1;
                        p1 = p2;
                    }
                    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
                    const double dx = p1 / dp;
                    x -= dx;
                    if (std::abs(dx) < 1e-15) break;
                }
                double p0 = 1.0, p1 = x;
                for (int j = 2; j <= n; ++j) {
                    const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = n * (x * p1 - p0) / (x * x - 1.0);
                xs[static_cast<std::size_t>(i)] = a + 0.5 * (b - a) * (x + 1.0);
                ws[static_cast<std::size_t>(i)] = (b - a) / ((1.0 - x * x) * dp * dp);
            }
        };

        std::vector<double> rx, rw;
        double mass = 0.0;
        double y[3] = {0, 0, 0};
        if (d == 1) {
            gl(nr, -R, R, rx, rw);
            for (int i = 0; i < nr; ++i) {
                y[0] = rx[static_cast<std::size_t>(i)];
                mass += rw[static_cast<std::size_t>(i)] * std::norm(ev.unit_value(k, y));
            }
        } else if (d == 2) {
            gl(nr, 0.0, R, rx, rw);
            for (int i = 0; i < nr; ++i) {
                const double r = rx[static_cast<std::size_t>(i)];
                double ang = 0.0;
                for (int a2 = 0; a2 < nang; ++a2) {
                    const double th = 2.0 * std::numbers::pi * a2 / nang;
                    y[0] = r * std::cos(th);
                    y[1] = r * std::sin(th);
                    ang += std::norm(ev.unit_value(k, y));
                }
                mass += rw[static_cast<std::size_t>(i)] * r * ang * 2.0 * std::numbers::pi / nang;
            }
        } else {
            gl(nr, 0.0, R, rx, rw);
            const int nth = std::max(8, nang / 4), nph = std::max(16, nang / 2);
            std::vector<double> cx, cw;
            gl(nth, -1.0, 1.0, cx, cw);
            for (int i = 0; i < nr; ++i) {
                const double r = rx[static_cast<std::size_t>(i)];
                double sph = 0.0;
                for (int it = 0; it < nth; ++it) {
                    const double ct = cx[static_cast<std::size_t>(it)];
                    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
                    double ring = 0.0;
                    for (int ip = 0; ip < nph; ++ip) {
                        const double ph = 2.0 * std::numbers::pi * ip / nph;
                        y[0] = r * st * std::cos(ph);
                        y[1] = r * st * std::sin(ph);
                        y[2] = r * ct;
                        ring += std::norm(ev.unit_value(k, y));
                    }
                    sph += cw[static_cast<std::size_t>(it)] * ring * 2.0 * std::numbers::pi / nph;
                }
                mass += rw[static_cast<std::size_t>(i)] * r * r * sph;
            }
        }
        return mass;
    };

    // --- surface term. In unit variables the relative current is
    // -Im(conj(phi) G)/sqrt(2) with G the momentum-ladder combination, and
    // the eps powers cancel against the sphere measure exactly.
    auto surface = [&](int nt, int nang) {
        double acc = 0.0;
        for (int it = 0; it <= nt; ++it) {
            const double t = cl.t_begin() + T * it / nt;
            const double wt = (it == 0 || it == nt) ? 0.5 : 1.0;  // trapezoid in time
            const PacketParams pp = cl.packet_at(t, eps);
            const PacketEvaluator ev(pp, k.order());
            const CMat& B = pp.B;

            std::array<cplx, 165> vals;
            double y[3] = {0, 0, 0};
            auto radial_flux = [&](const double* e) {
                for (int j = 0; j < d; ++j) y[j] = R * e[j];
                ev.unit_values_at(y, k.order() + 1, vals.data());
                const auto& set = ev.index_set();
                const cplx phi = vals[static_cast<std::size_t>(set.rank(k))];
                double dot = 0.0;
                for (int j = 0; j < d; ++j) {
                    cplx g = 0.0;
                    for (int l = 0; l < d; ++l) {
                        g += B(j, l) * std::sqrt(static_cast<double>(k[l] + 1)) *
                             vals[static_cast<std::size_t>(set.rank(k.raised(l)))];
                        if (k[l] > 0)
                            g -= std::conj(B(j, l)) * std::sqrt(static_cast<double>(k[l])) *
                                 vals[static_cast<std::size_t>(set.rank(k.lowered(l)))];
                    }
                    dot += std::imag(std::conj(phi) * g) * e[j];
                }
                return std::abs(dot) / std::sqrt(2.0);
            };

            double ang = 0.0;
            if (d == 1) {
                const double ep[1] = {1.0}, em[1] = {-1.0};
                ang = radial_flux(ep) + radial_flux(em);
            } else if (d == 2) {
                for (int a2 = 0; a2 < nang; ++a2) {
                    const double th = 2.0 * std::numbers::pi * a2 / nang;
                    const double e[2] = {std::cos(th), std::sin(th)};
                    ang += radial_flux(e) * 2.0 * std::numbers::pi / nang * R;
                }
            } else {
                const int nth = std::max(8, nang / 4), nph = std::max(16, nang / 2);
                for (int it2 = 0; it2 < nth; ++it2) {
                    const double ct = -1.0 + (it2 + 0.5) * 2.0 / nth;
                    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
                    for (int ip = 0; ip < nph; ++ip) {
                        const double ph = 2.0 * std::numbers::pi * ip / nph;
                        const double e[3] = {st * std::cos(ph), st * std::sin(ph), ct};
                        ang += radial_flux(e) * (2.0 / nth) * (2.0 * std::numbers::pi / nph) * R * R;
                    }
                }
            }
            acc += wt * ang;
        }
        return acc * T / nt;
    };

    FluxBound out;
    const double mass_full = ball_mass(256, angular_points);
    const double mass_half = ball_mass(128, angular_points / 2);
    out.tail = std::max(0.0, 1.0 - mass_full);
    const double tail_half = std::max(0.0, 1.0 - mass_half);

    const double f_full = surface(time_intervals, angular_points);
    const double f_half = surface(time_intervals / 2, angular_points / 2);
    out.flux = f_full;

    const double scale = std::max({out.tail + out.flux, tail_half + f_half, 1e-12});
    if (std::abs((out.tail + out.flux) - (tail_half + f_half)) > 0.01 * scale)
        throw NumericalError("flux_bound: quadrature not converged at the requested meshes");
    return out;
}

double remainder_norm(const PacketEvaluator& ev, const MultiIndex& k, const PotentialModel& V,
                      int m, int points_per_axis, double half_width) {
    const PacketParams& p = ev.params();
    const int d = p.dim();
    const double se = std::sqrt(p.eps);

    // widen the window with the frame so the packet mass stays captured when
    // sigma_max(A) > 1, keeping the node spacing of the requested resolution
    const double sig = p.A.jacobiSvd().singularValues().maxCoeff();
    if (sig > 1.0) {
        const double grow = std::min(sig, 8.0);
        points_per_axis = static_cast<int>(std::lround((points_per_axis - 1) * grow)) + 1;
        half_width *= grow;
    }
    const double h = 2.0 * half_width / (points_per_axis - 1);

    double acc = 0.0, norm2 = 0.0;
    std::array<int, 3> idx{0, 0, 0};
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(points_per_axis);

    double y[3] = {0, 0, 0}, x[3] = {0, 0, 0};
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int j = 0; j < d; ++j) {
            idx[static_cast<std::size_t>(j)] =
                static_cast<int>(rem % static_cast<std::size_t>(points_per_axis));
            rem /= static_cast<std::size_t>(points_per_axis);
            y[j] = -half_width + h * idx[static_cast<std::size_t>(j)];
            x[j] = p.a[j] + se * y[j];
        }
        const double phi2 = std::norm(ev.unit_value(k, y));
        const double vm = V.taylor_remainder(x, p.a.data(), m);
        acc += vm * vm * phi2;
        norm2 += phi2;
    }
    const double cell = std::pow(h, d);
    if (std::abs(norm2 * cell - 1.0) > 1e-6)
        throw NumericalError("remainder_norm: quadrature under-resolved");
    return std::sqrt(acc * cell);
}

Chi2Result equivariance_chi2(const std::vector<PathSummary>& paths, const GridWave& w_final,
                             int bins) {
    const GridSpec& g = w_final.grid();
    if (g.d != 1) throw std::invalid_argument("equivariance_chi2: d = 1 only");

    std::vector<double> finals;
    for (const auto& p : paths)
        if (p.completed) finals.push_back(p.q_final[0]);
    const auto n_used = finals.size();
    if (n_used < 100) throw std::invalid_argument("equivariance_chi2: too few completed paths");

    // bulk region from the grid density itself
    const auto amps = w_final.amplitudes();
    const double dx = g.dx();
    double mean = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double w = std::norm(amps[i]) * dx;
        mean += (-g.L + dx * static_cast<double>(i)) * w;
        mass += w;
    }
    mean /= mass;
    double var = 0.0;
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double xx = -g.L + dx * static_cast<double>(i) - mean;
        var += xx * xx * std::norm(amps[i]) * dx;
    }
    var /= mass;
    const double half = 4.0 * std::sqrt(var);
    const double lo = mean - half, hi = mean + half;
    const double bw = (hi - lo) / bins;

    // expected mass per bin by composite midpoint on the band-limited density;
    // the sub-bin mesh must resolve both the grid spacing and the bin width
    const SpectralSnapshot spec = w_final.spectral();
    std::vector<double> expected(static_cast<std::size_t>(bins) + 2, 0.0);
    const int sub = std::max(8, static_cast<int>(std::ceil(4.0 * bw / dx)));
    double bulk = 0.0;
    for (int b = 0; b < bins; ++b) {
        double acc = 0.0;
        for (int i = 0; i < sub; ++i) {
            const double x = lo + bw * (b + (i + 0.5) / sub);
            acc += std::norm(spec.eval(&x));
        }
        expected[static_cast<std::size_t>(b) + 1] = acc * bw / sub / mass;
        bulk += expected[static_cast<std::size_t>(b) + 1];
    }
    // open tails carry the rest; split by the density seen on the grid nodes
    double left_tail = 0.0, right_tail = 0.0;
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double x = -g.L + dx * static_cast<double>(i);
        if (x < lo) left_tail += std::norm(amps[i]) * dx / mass;
        if (x >= hi) right_tail += std::norm(amps[i]) * dx / mass;
    }
    const double tot_tail = std::max(0.0, 1.0 - bulk);
    const double split = left_tail + right_tail;
    expected[0] = split > 0 ? tot_tail * left_tail / split : tot_tail / 2;
    expected[static_cast<std::size_t>(bins) + 1] = tot_tail - expected[0];
    std::vector<double> observed(expected.size(), 0.0);
    for (const double x : finals) {
        int b = static_cast<int>(std::floor((x - lo) / bw));
        b = std::clamp(b, -1, bins);
        observed[static_cast<std::size_t>(b + 1)] += 1.0;
    }

    // merge bins with expected count below 5 into their neighbor
    std::vector<double> e_m, o_m;
    double e_acc = 0.0, o_acc = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        e_acc += expected[i] * static_cast<double>(n_used);
        o_acc += observed[i];
        if (e_acc >= 5.0) {
            e_m.push_back(e_acc);
            o_m.push_back(o_acc);
            e_acc = o_acc = 0.0;
        }
    }
    if (e_acc > 0.0 && !e_m.empty()) {
        e_m.back() += e_acc;
        o_m.back() += o_acc;
    }

    Chi2Result res;
    res.used_paths = n_used;
    for (std::size_t i = 0; i < e_m.size(); ++i) {
        const double diff = o_m[i] - e_m[i];
        res.statistic += diff * diff / e_m[i];
    }
    res.dof = static_cast<int>(e_m.size()) - 1;
    if (res.dof < 1) throw NumericalError("equivariance_chi2: degenerate binning");
    const boost::math::chi_squared dist(res.dof);
    res.p_value = boost::math::cdf(boost::math::complement(dist, res.statistic));
    return res;
}

}  // namespace hb
