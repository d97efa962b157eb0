#include "hb/classical_flow.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numbers>
#include <ostream>

#include "hb/errors.hpp"

namespace hb {
namespace {

using state_vec = std::vector<double>;

// layout: [a | eta | Re A | Im A | Re B | Im B | S], matrices row-major
std::size_t packed_size(int d) {
    return 2 * static_cast<std::size_t>(d) + 4 * static_cast<std::size_t>(d) * static_cast<std::size_t>(d) + 1;
}

void pack(const ClassicalState& s, state_vec& y) {
    const int d = s.dim();
    y.resize(packed_size(d));
    std::size_t p = 0;
    for (int j = 0; j < d; ++j) y[p++] = s.a[j];
    for (int j = 0; j < d; ++j) y[p++] = s.eta[j];
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) y[p++] = s.A(i, j).real();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) y[p++] = s.A(i, j).imag();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) y[p++] = s.B(i, j).real();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) y[p++] = s.B(i, j).imag();
    y[p] = s.S;
}

ClassicalState unpack(const state_vec& y, int d, double t) {
    ClassicalState s;
    s.t = t;
    s.a = RVec::Zero(d);
    s.eta = RVec::Zero(d);
    s.A = CMat::Zero(d, d);
    s.B = CMat::Zero(d, d);
    std::size_t p = 0;
    for (int j = 0; j < d; ++j) s.a[j] = y[p++];
    for (int j = 0; j < d; ++j) s.eta[j] = y[p++];
    const std::size_t re_a = p, im_a = p + static_cast<std::size_t>(d) * d;
    const std::size_t re_b = im_a + static_cast<std::size_t>(d) * d,
                      im_b = re_b + static_cast<std::size_t>(d) * d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const std::size_t o = static_cast<std::size_t>(i) * d + static_cast<std::size_t>(j);
            s.A(i, j) = {y[re_a + o], y[im_a + o]};
            s.B(i, j) = {y[re_b + o], y[im_b + o]};
        }
    s.S = y[im_b + static_cast<std::size_t>(d) * d];
    return s;
}

struct FlowRhs {
    const PotentialModel* V;
    int d;

    void operator()(const state_vec& y, state_vec& dy, double /*t*/) const {
        dy.assign(y.size(), 0.0);
        const double* a = y.data();
        const double* eta = y.data() + d;
        double grad[3], hess[9];
        V->gradient(a, grad);
        V->hessian(a, hess);

        double* da = dy.data();
        double* deta = dy.data() + d;
        double eta2 = 0.0;
        for (int j = 0; j < d; ++j) {
            da[j] = eta[j];
            deta[j] = -grad[j];
            eta2 += eta[j] * eta[j];
        }

        const std::size_t dd = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
        const double* re_a = y.data() + 2 * d;
        const double* im_a = re_a + dd;
        const double* re_b = im_a + dd;
        const double* im_b = re_b + dd;
        double* dre_a = dy.data() + 2 * d;
        double* dim_a = dre_a + dd;
        double* dre_b = dim_a + dd;
        double* dim_b = dre_b + dd;

        // dA = iB, dB = i Hess(a) A
        for (std::size_t o = 0; o < dd; ++o) {
            dre_a[o] = -im_b[o];
            dim_a[o] = re_b[o];
        }
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double hr = 0.0, hi = 0.0;
                for (int l = 0; l < d; ++l) {
                    const double h = hess[i * d + l];
                    hr += h * re_a[static_cast<std::size_t>(l) * d + j];
                    hi += h * im_a[static_cast<std::size_t>(l) * d + j];
                }
                const std::size_t o = static_cast<std::size_t>(i) * d + static_cast<std::size_t>(j);
                dre_b[o] = -hi;
                dim_b[o] = hr;
            }

        dy[y.size() - 1] = 0.5 * eta2 - V->value(a);
    }
};

double principal_det_arg(const CMat& A) { return std::arg(A.determinant()); }

}  // namespace

double ClassicalState::energy(const PotentialModel& V) const {
    return 0.5 * eta.squaredNorm() + V.value(a.data());
}

ClassicalState ClassicalState::standard(int d) {
    ClassicalState s;
    s.a = RVec::Zero(d);
    s.eta = RVec::Zero(d);
    s.A = CMat::Identity(d, d);
    s.B = CMat::Identity(d, d);
    return s;
}

QuadraticCoeffs quadratic_hamiltonian_coeffs(const ClassicalState& s, const PotentialModel& V) {
    const int d = s.dim();
    QuadraticCoeffs q;
    q.value = V.value(s.a.data());
    q.grad = RVec::Zero(d);
    q.hess = RMat::Zero(d, d);
    double g[3], h[9];
    V.gradient(s.a.data(), g);
    V.hessian(s.a.data(), h);
    for (int i = 0; i < d; ++i) {
        q.grad[i] = g[i];
        for (int j = 0; j < d; ++j) q.hess(i, j) = h[i * d + j];
    }
    return q;
}

ClassicalTrajectory integrate_flow(const ClassicalState& init, const PotentialModel& V,
                                   double t_initial, double t_final, double tol,
                                   int mesh_intervals) {
    if (init.dim() != V.dim()) throw std::invalid_argument("integrate_flow: dimension mismatch");
    if (t_final == t_initial) throw std::invalid_argument("integrate_flow: empty time span");
    if (!init.residual().admissible())
        throw std::invalid_argument("integrate_flow: initial (A,B) not admissible");

    namespace odeint = boost::numeric::odeint;
    const int d = init.dim();
    const double span = t_final - t_initial;
    const double dir = span > 0 ? 1.0 : -1.0;

    ClassicalTrajectory traj;
    traj.d_ = d;
    traj.times_.resize(static_cast<std::size_t>(mesh_intervals) + 1);
    traj.dt_ = span / mesh_intervals;
    for (int i = 0; i <= mesh_intervals; ++i)
        traj.times_[static_cast<std::size_t>(i)] = t_initial + traj.dt_ * i;
    traj.states_.resize(traj.times_.size());
    traj.derivs_.resize(traj.times_.size());

    FlowRhs rhs{&V, d};
    state_vec y0;
    pack(init, y0);

    // tighter internal control so accumulated error stays within the declared
    // per-step budget over the whole horizon
    const double ctl = tol / 50.0;
    auto stepper =
        odeint::make_dense_output(ctl, ctl, odeint::runge_kutta_dopri5<state_vec>());
    stepper.initialize(y0, t_initial, dir * std::min(std::abs(span) / 100.0, 1e-2));

    std::size_t next_node = 0;
    state_vec tmp(y0.size());

    auto emit_nodes_through = [&](double t_hi) {
        while (next_node < traj.times_.size() &&
               dir * (traj.times_[next_node] - t_hi) <= 1e-14 * std::abs(span)) {
            stepper.calc_state(traj.times_[next_node], tmp);
            traj.states_[next_node] = tmp;
            rhs(tmp, traj.derivs_[next_node], traj.times_[next_node]);
            ++next_node;
        }
    };

    while (next_node < traj.times_.size()) {
        if (std::abs(stepper.current_time_step()) < 1e-14 * (1.0 + std::abs(span)))
            throw NumericalError("integrate_flow: step size underflow");
        stepper.do_step(rhs);

        const ClassicalState cur = unpack(stepper.current_state(), d, stepper.current_time());
        const auto res = cur.residual();
        traj.max_residual_ = std::max({traj.max_residual_, res.sym, res.norm});
        if (traj.max_residual_ > 1e-6)
            throw NumericalError("integrate_flow: admissibility residual above 1e-6, aborting");

        emit_nodes_through(stepper.current_time());
    }

    // unwrapped arg det A along the mesh; mesh spacing keeps each increment
    // well below pi
    traj.det_arg_.resize(traj.times_.size());
    double prev = principal_det_arg(unpack(traj.states_[0], d, 0.0).A);
    traj.det_arg_[0] = prev;
    cplx prev_det = unpack(traj.states_[0], d, 0.0).A.determinant();
    for (std::size_t i = 1; i < traj.times_.size(); ++i) {
        const cplx det = unpack(traj.states_[i], d, 0.0).A.determinant();
        const double inc = std::arg(det / prev_det);
        if (std::abs(inc) > 2.5)
            throw NumericalError("integrate_flow: det(A) winding too fast for the mesh");
        traj.det_arg_[i] = traj.det_arg_[i - 1] + inc;
        prev_det = det;
    }
    return traj;
}

std::vector<double> ClassicalTrajectory::packed_at(double t) const {
    const double t0 = times_.front(), t1 = times_.back();
    const double lo = std::min(t0, t1), hi = std::max(t0, t1);
    if (t < lo - 1e-12 * (1 + std::abs(hi)) || t > hi + 1e-12 * (1 + std::abs(hi)))
        throw std::out_of_range("trajectory query outside integrated span");
    t = std::clamp(t, lo, hi);

    const double u = (t - t0) / dt_;
    std::size_t i = static_cast<std::size_t>(std::clamp(
        static_cast<long long>(u), 0ll, static_cast<long long>(times_.size()) - 2));
    const double s = u - static_cast<double>(i);

    // cubic Hermite on [t_i, t_i+1]
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    const auto& ya = states_[i];
    const auto& yb = states_[i + 1];
    const auto& fa = derivs_[i];
    const auto& fb = derivs_[i + 1];
    std::vector<double> out(ya.size());
    for (std::size_t j = 0; j < ya.size(); ++j)
        out[j] = h00 * ya[j] + h01 * yb[j] + dt_ * (h10 * fa[j] + h11 * fb[j]);
    return out;
}

ClassicalState ClassicalTrajectory::at(double t) const { return unpack(packed_at(t), d_, t); }

double ClassicalTrajectory::detA_arg_at(double t) const {
    const double t0 = times_.front();
    const double u = (t - t0) / dt_;
    const std::size_t i = static_cast<std::size_t>(std::clamp(
        static_cast<long long>(u), 0ll, static_cast<long long>(times_.size()) - 2));
    const double s = u - static_cast<double>(i);
    const double approx = det_arg_[i] * (1 - s) + det_arg_[i + 1] * s;

    // snap to the winding sheet nearest the linear estimate so that
    // exp(i arg) matches det(A(t)) of the interpolated matrix exactly
    const double principal = principal_det_arg(at(t).A);
    const double two_pi = 2.0 * std::numbers::pi;
    return principal + two_pi * std::round((approx - principal) / two_pi);
}

PacketParams ClassicalTrajectory::packet_at(double t, double eps) const {
    const ClassicalState s = at(t);
    PacketParams p;
    p.eps = eps;
    p.a = s.a;
    p.eta = s.eta;
    p.A = s.A;
    p.B = s.B;
    p.S = s.S;
    p.detA_arg = detA_arg_at(t);
    return p;
}

double ClassicalTrajectory::max_abs_center(int axis) const {
    double m = 0.0;
    for (const auto& y : states_) m = std::max(m, std::abs(y[static_cast<std::size_t>(axis)]));
    return m;
}

namespace {
// packed-state singular-value scan helper
template <typename Fn>
void scan_matrix(const std::vector<std::vector<double>>& states, int d, std::size_t offset,
                 Fn&& fn) {
    for (const auto& y : states) {
        CMat M(d, d);
        const std::size_t dd = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                const std::size_t o = static_cast<std::size_t>(i) * d + static_cast<std::size_t>(j);
                M(i, j) = {y[offset + o], y[offset + dd + o]};
            }
        fn(M);
    }
}
}  // namespace

double ClassicalTrajectory::max_sigma_A() const {
    double m = 0.0;
    scan_matrix(states_, d_, 2 * static_cast<std::size_t>(d_), [&](const CMat& M) {
        m = std::max(m, M.jacobiSvd().singularValues().maxCoeff());
    });
    return m;
}

double ClassicalTrajectory::min_sigma_A() const {
    double m = std::numeric_limits<double>::infinity();
    scan_matrix(states_, d_, 2 * static_cast<std::size_t>(d_), [&](const CMat& M) {
        m = std::min(m, M.jacobiSvd().singularValues().minCoeff());
    });
    return m;
}

double ClassicalTrajectory::max_sigma_B() const {
    double m = 0.0;
    const std::size_t dd = static_cast<std::size_t>(d_) * static_cast<std::size_t>(d_);
    scan_matrix(states_, d_, 2 * static_cast<std::size_t>(d_) + 2 * dd, [&](const CMat& M) {
        m = std::max(m, M.jacobiSvd().singularValues().maxCoeff());
    });
    return m;
}

double ClassicalTrajectory::max_momentum_norm() const {
    double m = 0.0;
    for (const auto& y : states_) {
        double n2 = 0.0;
        for (int j = 0; j < d_; ++j) {
            const double e = y[static_cast<std::size_t>(d_ + j)];
            n2 += e * e;
        }
        m = std::max(m, std::sqrt(n2));
    }
    return m;
}

void ClassicalTrajectory::write_csv(std::ostream& os) const {
    os << "t";
    for (int j = 0; j < d_; ++j) os << ",a" << j;
    for (int j = 0; j < d_; ++j) os << ",eta" << j;
    auto mat_cols = [&](const char* name) {
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j) os << "," << name << i << j;
    };
    mat_cols("ReA");
    mat_cols("ImA");
    mat_cols("ReB");
    mat_cols("ImB");
    os << ",S\n";
    char buf[32];
    for (std::size_t i = 0; i < times_.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", times_[i]);
        os << buf;
        for (double v : states_[i]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ',' << buf;
        }
        os << '\n';
    }
}

}  // namespace hb
