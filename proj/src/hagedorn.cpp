#include "hb/hagedorn.hpp"

#include <cmath>
#include <numbers>

#include "hb/errors.hpp"
#include "hb/kernels.hpp"

namespace hb {

namespace {

constexpr double kAdmissibleTol = 1e-8;

// scratch capacity: |k| <= 8 in d = 3 has C(11,3) = 165 indices
constexpr std::size_t kMaxRanks = 165;

int argmax_component(const MultiIndex& k) {
    int j = 0;
    if (k[1] > k[j]) j = 1;
    if (k[2] > k[j]) j = 2;
    return j;
}

}  // namespace

AdmissibilityResidual validate_admissible(const CMat& A, const CMat& B) {
    if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
        throw std::invalid_argument("validate_admissible: square matrices of equal size required");
    const auto d = A.rows();
    const CMat sym = A.transpose() * B - B.transpose() * A;
    const CMat nrm = A.adjoint() * B + B.adjoint() * A - 2.0 * CMat::Identity(d, d);
    return {sym.norm(), nrm.norm()};
}

PacketParams PacketParams::standard(int d, double eps) {
    PacketParams p;
    p.eps = eps;
    p.a = RVec::Zero(d);
    p.eta = RVec::Zero(d);
    p.A = CMat::Identity(d, d);
    p.B = CMat::Identity(d, d);
    return p;
}

double PacketEnvelope::unit_bound(double r) const {
    return C * std::pow(1.0 + r, k_order) * std::exp(-0.5 * c * r * r);
}

double PacketEnvelope::bound_at(const PacketParams& p, const double* x) const {
    const int d = p.dim();
    double r2 = 0.0;
    for (int j = 0; j < d; ++j) {
        const double dx = x[j] - p.a[j];
        r2 += dx * dx;
    }
    return std::pow(p.eps, -0.25 * d) * unit_bound(std::sqrt(r2 / p.eps));
}

PacketEvaluator::PacketEvaluator(const PacketParams& p, int k_max)
    : params_(p), set_(p.dim(), k_max + 2), user_k_max_(k_max) {
    if (p.eps <= 0.0) throw std::invalid_argument("packet eps must be positive");
    if (k_max < 0 || set_.size() > kMaxRanks)
        throw std::invalid_argument("packet k_max out of supported range");
    const auto res = p.residual();
    if (!res.admissible(kAdmissibleTol))
        throw std::invalid_argument("inadmissible packet parameters (A,B)");

    const int d = p.dim();
    a_inv_ = p.A.inverse();
    a_inv_conj_a_ = a_inv_ * p.A.conjugate();
    ba_inv_ = p.B * a_inv_;
    mu_ = p.eta.cast<cplx>() / std::sqrt(p.eps);

    const cplx detA = p.A.determinant();
    cplx det_root;
    if (std::isnan(p.detA_arg)) {
        det_root = std::sqrt(detA);  // principal branch
    } else {
        det_root = std::sqrt(std::abs(detA)) * std::polar(1.0, 0.5 * p.detA_arg);
    }
    norm_prefactor_ = std::pow(std::numbers::pi, -0.25 * d) / det_root;
}

// Unit ground state at y: pi^{-d/4} det(A)^{-1/2} exp(-<y, BA^{-1} y>/2 + i <mu, y>)
// followed by the raising recurrence
//   sqrt(k_j) phi_k = sqrt(2) (A^{-1}y)_j phi_{k-e_j}
//                     - sum_l (A^{-1} conj A)_{jl} sqrt(k_l - d_{lj}) phi_{k-e_j-e_l}
void PacketEvaluator::ladder_fill(const double* y, int up_to, cplx* vals) const {
    const int d = params_.dim();

    CVec yv(d);
    for (int j = 0; j < d; ++j) yv[j] = y[j];

    cplx quad = 0.0, phase = 0.0;
    for (int i = 0; i < d; ++i) {
        cplx row = 0.0;
        for (int j = 0; j < d; ++j) row += ba_inv_(i, j) * yv[j];
        quad += yv[i] * row;
        phase += mu_[i] * yv[i];
    }
    vals[0] = norm_prefactor_ * std::exp(-0.5 * quad + cplx(0.0, 1.0) * phase);

    const CVec ay = std::sqrt(2.0) * (a_inv_ * yv);

    for (std::size_t r = 1; r < set_.level_end(up_to); ++r) {
        const MultiIndex& k = set_.at(r);
        const int j = argmax_component(k);
        const MultiIndex parent = k.lowered(j);
        cplx acc = ay[j] * vals[set_.rank(parent)];
        for (int l = 0; l < d; ++l) {
            if (parent[l] == 0) continue;
            acc -= a_inv_conj_a_(j, l) * std::sqrt(static_cast<double>(parent[l])) *
                   vals[set_.rank(parent.lowered(l))];
        }
        vals[r] = acc / std::sqrt(static_cast<double>(k[j]));
    }
}

cplx PacketEvaluator::unit_value(const MultiIndex& k, const double* y) const {
    if (set_.rank(k) < 0 || k.order() > user_k_max_)
        throw std::invalid_argument("packet index above k_max");
    std::array<cplx, kMaxRanks> vals;
    ladder_fill(y, k.order(), vals.data());
    return vals[static_cast<std::size_t>(set_.rank(k))];
}

void PacketEvaluator::unit_values_at(const double* y, int up_to, cplx* out) const {
    if (up_to > set_.max_order()) throw std::invalid_argument("packet index above k_max");
    ladder_fill(y, up_to, out);
}

cplx PacketEvaluator::value(const MultiIndex& k, const double* x, bool phased) const {
    const int d = params_.dim();
    const double rs = 1.0 / std::sqrt(params_.eps);
    double y[3] = {0, 0, 0};
    for (int j = 0; j < d; ++j) y[j] = (x[j] - params_.a[j]) * rs;
    cplx v = unit_value(k, y) * std::pow(params_.eps, -0.25 * d);
    if (phased) v *= std::polar(1.0, params_.S / params_.eps);
    return v;
}

// momentum-ladder combination G_{k,j} = (B phi^+ - conj(B) phi^-)_j read off a
// value table; grad phi = i mu phi - G / sqrt(2) in unit variables
void PacketEvaluator::unit_gradient(const MultiIndex& k, const cplx* vals, CVec& grad) const {
    const int d = params_.dim();
    grad = CVec::Zero(d);
    const cplx phi = vals[set_.rank(k)];
    for (int j = 0; j < d; ++j) {
        cplx g = 0.0;
        for (int l = 0; l < d; ++l) {
            g += params_.B(j, l) * std::sqrt(static_cast<double>(k[l] + 1)) *
                 vals[set_.rank(k.raised(l))];
            if (k[l] > 0)
                g -= std::conj(params_.B(j, l)) * std::sqrt(static_cast<double>(k[l])) *
                     vals[set_.rank(k.lowered(l))];
        }
        grad[j] = cplx(0.0, 1.0) * mu_[j] * phi - g / std::sqrt(2.0);
    }
}

CVec PacketEvaluator::gradient(const MultiIndex& k, const double* x, bool phased) const {
    if (k.order() > user_k_max_) throw std::invalid_argument("packet index above k_max");
    const int d = params_.dim();
    const double rs = 1.0 / std::sqrt(params_.eps);
    double y[3] = {0, 0, 0};
    for (int j = 0; j < d; ++j) y[j] = (x[j] - params_.a[j]) * rs;

    std::array<cplx, kMaxRanks> vals;
    ladder_fill(y, k.order() + 1, vals.data());
    CVec g(d);
    unit_gradient(k, vals.data(), g);

    cplx scale = std::pow(params_.eps, -0.25 * d - 0.5);
    if (phased) scale *= std::polar(1.0, params_.S / params_.eps);
    return g * scale;
}

PacketEvaluator::Field PacketEvaluator::field(const MultiIndex& k, const double* x) const {
    if (k.order() > user_k_max_) throw std::invalid_argument("packet index above k_max");
    const int d = params_.dim();
    const double rs = 1.0 / std::sqrt(params_.eps);
    double y[3] = {0, 0, 0};
    for (int j = 0; j < d; ++j) y[j] = (x[j] - params_.a[j]) * rs;

    std::array<cplx, kMaxRanks> vals;
    ladder_fill(y, k.order() + 1, vals.data());
    const cplx phi = vals[static_cast<std::size_t>(set_.rank(k))];

    Field f;
    f.value = phi;
    f.scaled_amp = std::abs(phi);

    // v = eta + sqrt(eps) Im( -(B phi^+ - conj B phi^-) / (sqrt(2) phi) )
    f.velocity = params_.eta;
    if (f.scaled_amp > 0.0) {
        const double se = std::sqrt(params_.eps);
        for (int j = 0; j < d; ++j) {
            cplx g = 0.0;
            for (int l = 0; l < d; ++l) {
                g += params_.B(j, l) * std::sqrt(static_cast<double>(k[l] + 1)) *
                     vals[set_.rank(k.raised(l))];
                if (k[l] > 0)
                    g -= std::conj(params_.B(j, l)) * std::sqrt(static_cast<double>(k[l])) *
                         vals[set_.rank(k.lowered(l))];
            }
            f.velocity[j] += se * std::imag(-g / (std::sqrt(2.0) * phi));
        }
    }
    return f;
}

double PacketEvaluator::quantum_potential(const MultiIndex& k, const double* x) const {
    if (k.order() > user_k_max_) throw std::invalid_argument("packet index above k_max");
    const int d = params_.dim();
    const double rs = 1.0 / std::sqrt(params_.eps);
    double y[3] = {0, 0, 0};
    for (int j = 0; j < d; ++j) y[j] = (x[j] - params_.a[j]) * rs;

    std::array<cplx, kMaxRanks> vals;
    ladder_fill(y, k.order() + 2, vals.data());
    const cplx phi = vals[static_cast<std::size_t>(set_.rank(k))];
    if (std::abs(phi) == 0.0) throw NodeProximityError(0.0, 0.0);

    // (p-mu)_j phi_k = i G_{k,j} / sqrt(2) with the table-local helper
    auto G = [&](const MultiIndex& kk, int j) {
        cplx g = 0.0;
        for (int l = 0; l < d; ++l) {
            g += params_.B(j, l) * std::sqrt(static_cast<double>(kk[l] + 1)) *
                 vals[set_.rank(kk.raised(l))];
            if (kk[l] > 0)
                g -= std::conj(params_.B(j, l)) * std::sqrt(static_cast<double>(kk[l])) *
                     vals[set_.rank(kk.lowered(l))];
        }
        return g;
    };

    // grad phi / phi and Laplacian phi / phi in unit variables
    cplx lap = 0.0;
    double imgrad2 = 0.0;
    for (int j = 0; j < d; ++j) {
        const cplx ratio_j = cplx(0.0, 1.0) * mu_[j] - G(k, j) / (std::sqrt(2.0) * phi);
        const double im = std::imag(ratio_j);
        imgrad2 += im * im;

        // (p-mu)_j^2 phi = -1/2 [ sum_l B_{jl} sqrt(k_l+1) G_{k+e_l, j}
        //                         - conj(B)_{jl} sqrt(k_l) G_{k-e_l, j} ]
        cplx pm2 = 0.0;
        for (int l = 0; l < d; ++l) {
            pm2 += params_.B(j, l) * std::sqrt(static_cast<double>(k[l] + 1)) * G(k.raised(l), j);
            if (k[l] > 0)
                pm2 -= std::conj(params_.B(j, l)) * std::sqrt(static_cast<double>(k[l])) *
                       G(k.lowered(l), j);
        }
        pm2 *= -0.5;

        // d_j^2 phi = -[ (p-mu)_j^2 + 2 mu_j (p-mu)_j + mu_j^2 ] phi
        const cplx pmj_phi = cplx(0.0, 1.0) * G(k, j) / std::sqrt(2.0);
        lap += -(pm2 + 2.0 * mu_[j] * pmj_phi + mu_[j] * mu_[j] * phi) / phi;
    }
    const double lap_ratio_re = std::real(lap);
    // Delta R / R = Re(Delta phi / phi) + |Im(grad phi / phi)|^2, all in y units
    return -0.5 * params_.eps * (lap_ratio_re + imgrad2);
}

PacketEvaluator::Table PacketEvaluator::unit_table(std::span<const double> ys, int up_to) const {
    if (up_to > set_.max_order()) throw std::invalid_argument("packet index above k_max");
    const int d = params_.dim();
    const std::size_t n = ys.size() / static_cast<std::size_t>(d);
    const std::size_t nranks = set_.level_end(up_to);
    const auto& K = kernels::ops();

    Table t;
    t.n_ = n;
    t.data_.assign(nranks * n, cplx{});

    // ground level: direct evaluation
    {
        cplx* v0 = t.data_.data();
        for (std::size_t i = 0; i < n; ++i) {
            const double* y = ys.data() + i * static_cast<std::size_t>(d);
            cplx quad = 0.0, phase = 0.0;
            for (int r = 0; r < d; ++r) {
                cplx row = 0.0;
                for (int cidx = 0; cidx < d; ++cidx) row += ba_inv_(r, cidx) * y[cidx];
                quad += y[r] * row;
                phase += mu_[r] * y[r];
            }
            v0[i] = norm_prefactor_ * std::exp(-0.5 * quad + cplx(0.0, 1.0) * phase);
        }
    }
    if (nranks == 1) return t;

    // sqrt(2) (A^{-1} y)_j per direction, reused across all levels
    std::vector<cplx> ayw(static_cast<std::size_t>(d) * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* y = ys.data() + i * static_cast<std::size_t>(d);
        for (int j = 0; j < d; ++j) {
            cplx s = 0.0;
            for (int l = 0; l < d; ++l) s += a_inv_(j, l) * y[l];
            ayw[static_cast<std::size_t>(j) * n + i] = std::sqrt(2.0) * s;
        }
    }

    for (std::size_t r = 1; r < nranks; ++r) {
        const MultiIndex& k = set_.at(r);
        const int j = argmax_component(k);
        const MultiIndex parent = k.lowered(j);
        cplx* dst = t.data_.data() + r * n;
        K.cmul_to(dst, ayw.data() + static_cast<std::size_t>(j) * n,
                  t.data_.data() + static_cast<std::size_t>(set_.rank(parent)) * n, n);
        for (int l = 0; l < d; ++l) {
            if (parent[l] == 0) continue;
            const cplx coef = -a_inv_conj_a_(j, l) * std::sqrt(static_cast<double>(parent[l]));
            K.caxpy(dst, coef,
                    t.data_.data() + static_cast<std::size_t>(set_.rank(parent.lowered(l))) * n, n);
        }
        K.scale_inplace(dst, 1.0 / std::sqrt(static_cast<double>(k[j])), n);
    }
    return t;
}

void PacketEvaluator::values_on(std::span<const double> xs, const MultiIndex& k, bool phased,
                                cplx* out) const {
    if (k.order() > user_k_max_) throw std::invalid_argument("packet index above k_max");
    const int d = params_.dim();
    const std::size_t n = xs.size() / static_cast<std::size_t>(d);
    const double rs = 1.0 / std::sqrt(params_.eps);
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            ys[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] =
                (xs[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] - params_.a[j]) * rs;

    const Table t = unit_table(ys, k.order());
    const cplx* src = t.values(set_.rank(k));
    cplx scale = std::pow(params_.eps, -0.25 * d);
    if (phased) scale *= std::polar(1.0, params_.S / params_.eps);
    for (std::size_t i = 0; i < n; ++i) out[i] = scale * src[i];
}

void PacketEvaluator::gradient_on(std::span<const double> xs, const MultiIndex& k, int j,
                                  bool phased, cplx* out) const {
    if (k.order() > user_k_max_) throw std::invalid_argument("packet index above k_max");
    const int d = params_.dim();
    const std::size_t n = xs.size() / static_cast<std::size_t>(d);
    const double rs = 1.0 / std::sqrt(params_.eps);
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < n; ++i)
        for (int l = 0; l < d; ++l)
            ys[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(l)] =
                (xs[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(l)] - params_.a[l]) * rs;

    const Table t = unit_table(ys, k.order() + 1);
    const auto& K = kernels::ops();

    // i mu_j phi_k - (B phi^+ - conj B phi^-)_j / sqrt(2), then x-space rescale
    std::fill(out, out + n, cplx{});
    K.caxpy(out, cplx(0.0, 1.0) * mu_[j], t.values(set_.rank(k)), n);
    for (int l = 0; l < d; ++l) {
        K.caxpy(out, -params_.B(j, l) * std::sqrt(static_cast<double>(k[l] + 1) / 2.0),
                t.values(set_.rank(k.raised(l))), n);
        if (k[l] > 0)
            K.caxpy(out, std::conj(params_.B(j, l)) * std::sqrt(static_cast<double>(k[l]) / 2.0),
                    t.values(set_.rank(k.lowered(l))), n);
    }
    cplx scale = std::pow(params_.eps, -0.25 * d - 0.5);
    if (phased) scale *= std::polar(1.0, params_.S / params_.eps);
    for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

PacketEnvelope PacketEvaluator::fit_envelope(const MultiIndex& k) const {
    if (k.order() > user_k_max_) throw std::invalid_argument("packet index above k_max");
    const int d = params_.dim();

    PacketEnvelope env;
    env.k_order = k.order();
    // exact Gaussian rate: |phi_k| ~ poly * exp(-<y, Re(BA^{-1}) y>/2)
    Eigen::SelfAdjointEigenSolver<RMat> es(ba_inv_.real());
    env.c = es.eigenvalues().minCoeff();
    if (env.c <= 0.0) throw NumericalError("packet envelope: Re(BA^{-1}) not positive definite");

    const double half = (d == 1) ? 9.0 : (d == 2 ? 7.0 : 6.0);
    const int npts = (d == 1) ? 4001 : (d == 2 ? 141 : 49);

    double best = 0.0;
    std::vector<double> ybuf;
    const std::size_t chunk_cap = 4096;
    ybuf.reserve(chunk_cap * static_cast<std::size_t>(d));

    auto flush = [&]() {
        if (ybuf.empty()) return;
        const Table t = unit_table(ybuf, k.order());
        const cplx* v = t.values(set_.rank(k));
        const std::size_t n = t.points();
        for (std::size_t i = 0; i < n; ++i) {
            double r2 = 0.0;
            for (int j = 0; j < d; ++j) {
                const double yj = ybuf[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
                r2 += yj * yj;
            }
            const double r = std::sqrt(r2);
            const double shape = std::pow(1.0 + r, env.k_order) * std::exp(-0.5 * env.c * r2);
            best = std::max(best, std::abs(v[i]) / shape);
        }
        ybuf.clear();
    };

    std::array<int, 3> idx{0, 0, 0};
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(npts);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int j = 0; j < d; ++j) {
            idx[static_cast<std::size_t>(j)] = static_cast<int>(rem % static_cast<std::size_t>(npts));
            rem /= static_cast<std::size_t>(npts);
            ybuf.push_back(-half + 2.0 * half * idx[static_cast<std::size_t>(j)] / (npts - 1));
        }
        if (ybuf.size() >= chunk_cap * static_cast<std::size_t>(d)) flush();
    }
    flush();

    env.C = best * 1.1;  // margin for between-node maxima
    return env;
}

PacketMoments PacketEvaluator::moments(const MultiIndex& k, int points_per_axis,
                                       double half_width) const {
    if (k.order() > user_k_max_) throw std::invalid_argument("packet index above k_max");
    const int d = params_.dim();
    const int n = points_per_axis;
    const double h = 2.0 * half_width / (n - 1);

    // tensor grid in y
    std::vector<double> ys;
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(n);
    ys.reserve(total * static_cast<std::size_t>(d));
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int j = 0; j < d; ++j) {
            ys.push_back(-half_width + h * static_cast<double>(rem % static_cast<std::size_t>(n)));
            rem /= static_cast<std::size_t>(n);
        }
    }

    const Table t = unit_table(ys, k.order() + 1);
    const cplx* phi = t.values(set_.rank(k));
    const double w = std::pow(h, d);

    PacketMoments m;
    m.mean_x = RVec::Zero(d);
    m.mean_p = RVec::Zero(d);

    double norm2 = 0.0;
    RVec ymean = RVec::Zero(d);
    for (std::size_t i = 0; i < total; ++i) {
        const double p2 = std::norm(phi[i]);
        norm2 += p2;
        for (int j = 0; j < d; ++j) ymean[j] += ys[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] * p2;
    }
    norm2 *= w;
    ymean *= w;
    m.norm_deficit = std::abs(norm2 - 1.0);
    if (m.norm_deficit > 1e-6)
        throw NumericalError("packet moments: quadrature under-resolved (norm deficit)");

    // <p_y> via Im(conj(phi) grad_y phi)
    RVec pmean = RVec::Zero(d);
    for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            cplx g = cplx(0.0, 1.0) * mu_[j] * phi[i];
            for (int l = 0; l < d; ++l) {
                g -= params_.B(j, l) * std::sqrt(static_cast<double>(k[l] + 1) / 2.0) *
                     t.values(set_.rank(k.raised(l)))[i];
                if (k[l] > 0)
                    g += std::conj(params_.B(j, l)) * std::sqrt(static_cast<double>(k[l]) / 2.0) *
                         t.values(set_.rank(k.lowered(l)))[i];
            }
            acc += std::imag(std::conj(phi[i]) * g);
        }
        pmean[j] = acc * w;
    }

    const double se = std::sqrt(params_.eps);
    m.mean_x = params_.a + se * ymean;
    m.mean_p = se * pmean;  // <p_x> = sqrt(eps) <p_y>, and <p_y> carries mu = eta/sqrt(eps)

    // ||(x-a)^alpha phi||_2 = eps^{|alpha|/2} ||y^alpha phi_u||_2
    const auto alphas = multi_indices_up_to(d, 4);
    m.central_norms.reserve(alphas.size());
    for (const auto& alpha : alphas) {
        double acc = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            const double ya = multi_power(ys.data() + i * static_cast<std::size_t>(d), alpha, d);
            acc += ya * ya * std::norm(phi[i]);
        }
        m.central_norms.push_back(std::pow(params_.eps, 0.5 * alpha.order()) * std::sqrt(acc * w));
    }
    return m;
}

}  // namespace hb
