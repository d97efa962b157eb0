#include "hb/bohmian.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "hb/errors.hpp"

namespace hb {

void WaveBackend::check_floor(double amp, double t) const {
    if (!(amp >= node_floor_)) throw NodeProximityError(amp, t);
}

SemiclassicalBackend::SemiclassicalBackend(const ClassicalTrajectory& cl, double eps, MultiIndex k,
                                           double node_floor)
    : WaveBackend(cl.at(cl.t_begin()).dim(), eps, cl.t_begin(), cl.t_end(), node_floor),
      cl_(cl),
      k_(k) {}

PacketEvaluator SemiclassicalBackend::evaluator_at(double t) const {
    return PacketEvaluator(cl_.packet_at(t, eps_), k_.order());
}

WaveBackend::Sample SemiclassicalBackend::velocity(const double* x, double t) const {
    const PacketEvaluator ev = evaluator_at(t);
    const auto f = ev.field(k_, x);
    check_floor(f.scaled_amp, t);

    Sample s;
    s.v = f.velocity;
    s.scaled_amp = f.scaled_amp;
    const CVec g = ev.gradient(k_, x) * std::pow(eps_, 0.25 * d_) * std::sqrt(eps_);
    s.grad_scale = g.norm() / f.scaled_amp;  // |grad_y phi| / |phi|
    return s;
}

double SemiclassicalBackend::scaled_amplitude(const double* x, double t) const {
    const PacketEvaluator ev = evaluator_at(t);
    const double rs = 1.0 / std::sqrt(eps_);
    double y[3] = {0, 0, 0};
    const auto& p = ev.params();
    for (int j = 0; j < d_; ++j) y[j] = (x[j] - p.a[j]) * rs;
    return std::abs(ev.unit_value(k_, y));
}

double SemiclassicalBackend::quantum_potential(const double* x, double t) const {
    const PacketEvaluator ev = evaluator_at(t);
    check_floor(scaled_amplitude(x, t), t);
    return ev.quantum_potential(k_, x);
}

ExactBackend::ExactBackend(std::shared_ptr<const WaveSequence> seq, double node_floor)
    : WaveBackend(seq->wave(0).grid().d, seq->wave(0).eps(), seq->t_begin(), seq->t_end(),
                  node_floor),
      seq_(std::move(seq)) {
    if (seq_->size() < 4) throw std::invalid_argument("ExactBackend: need at least 4 snapshots");
}

ExactBackend::Stencil ExactBackend::stencil_at(double t) const {
    const double h = seq_->spacing();
    const double u = (t - t0_) / h;
    const auto m = static_cast<long long>(seq_->size());
    long long i = static_cast<long long>(std::floor(u));
    long long base = std::clamp(i - 1, 0ll, m - 4);

    Stencil st;
    st.base = static_cast<std::size_t>(base);
    // Lagrange weights over the four stencil nodes
    const double s = u - static_cast<double>(base);
    const double n0 = 0.0, n1 = 1.0, n2 = 2.0, n3 = 3.0;
    st.w[0] = (s - n1) * (s - n2) * (s - n3) / ((n0 - n1) * (n0 - n2) * (n0 - n3));
    st.w[1] = (s - n0) * (s - n2) * (s - n3) / ((n1 - n0) * (n1 - n2) * (n1 - n3));
    st.w[2] = (s - n0) * (s - n1) * (s - n3) / ((n2 - n0) * (n2 - n1) * (n2 - n3));
    st.w[3] = (s - n0) * (s - n1) * (s - n2) / ((n3 - n0) * (n3 - n1) * (n3 - n2));
    return st;
}

WaveBackend::Sample ExactBackend::velocity(const double* x, double t) const {
    const Stencil st = stencil_at(t);
    const double amp_scale = std::pow(eps_, 0.25 * d_);

    Sample out;
    out.v = RVec::Zero(d_);
    double amp = 0.0;
    for (int s = 0; s < 4; ++s) {
        cplx val;
        CVec grad;
        seq_->spectral(st.base + static_cast<std::size_t>(s)).eval_with_grad(x, val, grad);
        const double a = amp_scale * std::abs(val);
        check_floor(a, t);
        for (int j = 0; j < d_; ++j)
            out.v[j] += st.w[s] * eps_ * std::imag(grad[j] / val);
        amp += st.w[s] * a;
        out.grad_scale =
            std::max(out.grad_scale, std::sqrt(eps_) * (grad.norm() / std::abs(val)));
    }
    check_floor(amp, t);
    out.scaled_amp = amp;
    return out;
}

double ExactBackend::scaled_amplitude(const double* x, double t) const {
    const Stencil st = stencil_at(t);
    double amp = 0.0;
    for (int s = 0; s < 4; ++s)
        amp += st.w[s] * std::abs(seq_->spectral(st.base + static_cast<std::size_t>(s)).eval(x));
    return std::pow(eps_, 0.25 * d_) * amp;
}

double ExactBackend::quantum_potential(const double* x, double t) const {
    const Stencil st = stencil_at(t);
    const double amp_scale = std::pow(eps_, 0.25 * d_);
    double vq = 0.0;
    for (int s = 0; s < 4; ++s) {
        const auto& snap = seq_->spectral(st.base + static_cast<std::size_t>(s));
        cplx val;
        CVec grad;
        snap.eval_with_grad(x, val, grad);
        check_floor(amp_scale * std::abs(val), t);
        const cplx lap = snap.eval_laplacian(x);
        double imgrad2 = 0.0;
        for (int j = 0; j < d_; ++j) {
            const double im = std::imag(grad[j] / val);
            imgrad2 += im * im;
        }
        // Delta R / R = Re(Delta psi / psi) + |Im(grad psi / psi)|^2
        vq += st.w[s] * (-0.5 * eps_ * eps_ * (std::real(lap / val) + imgrad2));
    }
    return vq;
}

BohmianPath integrate_path(const WaveBackend& b, const double* x0, double T,
                           const PathOptions& opt) {
    namespace odeint = boost::numeric::odeint;
    using state = std::array<double, 3>;

    const int d = b.dim();
    const double t0 = b.t_begin();
    const double se = std::sqrt(b.eps());

    BohmianPath path;
    path.x0 = RVec::Zero(d);
    for (int j = 0; j < d; ++j) path.x0[j] = x0[j];
    path.samples.reserve(static_cast<std::size_t>(opt.mesh_points) + 1);

    double last_amp = 0.0, last_grad_scale = 0.0;
    auto rhs = [&](const state& q, state& dq, double t) {
        const auto s = b.velocity(q.data(), t);
        dq = {0.0, 0.0, 0.0};
        for (int j = 0; j < d; ++j) dq[static_cast<std::size_t>(j)] = s.v[j];
        last_amp = s.scaled_amp;
        last_grad_scale = s.grad_scale;
    };

    const double mesh_dt = T / opt.mesh_points;
    auto push_sample = [&](double t, const state& q, const state& f, double amp) {
        PathSample ps;
        ps.t = t;
        ps.q = RVec::Zero(d);
        ps.v = RVec::Zero(d);
        for (int j = 0; j < d; ++j) {
            ps.q[j] = q[static_cast<std::size_t>(j)];
            ps.v[j] = f[static_cast<std::size_t>(j)];
        }
        ps.scaled_amp = amp;
        path.samples.push_back(ps);
        path.min_scaled_amp = std::min(path.min_scaled_amp, amp);
    };

    // control tighter than the declared tolerance; mesh values come from the
    // per-step cubic Hermite below
    auto stepper = odeint::make_controlled(opt.tol / 20.0, opt.tol / 20.0,
                                           odeint::runge_kutta_dopri5<state>());

    state q{0.0, 0.0, 0.0};
    for (int j = 0; j < d; ++j) q[static_cast<std::size_t>(j)] = x0[j];

    try {
        state f_prev;
        rhs(q, f_prev, t0);
        push_sample(t0, q, f_prev, last_amp);

        double t = t0;
        double dt = T / 1000.0;
        state q_prev = q;
        double t_prev = t;
        int next_mesh = 1;
        // steps capped at a few mesh cells so the per-interval Hermite fill
        // stays far below the integration tolerance
        const double dt_cap = 4.0 * mesh_dt;

        while (t < t0 + T) {
            dt = std::min(dt, dt_cap);
            // velocity-Lipschitz-aware cap near low amplitude
            if (last_amp < 0.1 && last_grad_scale > 0.0) {
                double speed = 0.0;
                for (int j = 0; j < d; ++j)
                    speed = std::max(speed, std::abs(f_prev[static_cast<std::size_t>(j)]));
                const double cap = 0.1 * se / (last_grad_scale * std::max(speed, se));
                dt = std::min(dt, cap);
            }
            dt = std::min(dt, t0 + T - t);
            if (dt < opt.min_step_fraction * T) {
                path.status = BohmianPath::Status::node_abort;
                path.abort_time = t;
                return path;
            }

            const auto res = stepper.try_step(rhs, q, t, dt);
            if (res == odeint::fail) continue;

            state f_new;
            rhs(q, f_new, t);

            // fill mesh nodes inside (t_prev, t]: position by cubic Hermite,
            // velocity and amplitude from a fresh field evaluation there
            const double h = t - t_prev;
            while (next_mesh <= opt.mesh_points && t0 + next_mesh * mesh_dt <= t + 1e-14 * T) {
                const double tm = t0 + next_mesh * mesh_dt;
                const double s = (tm - t_prev) / h;
                const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
                const double h10 = s * (1 - s) * (1 - s);
                const double h01 = s * s * (3 - 2 * s);
                const double h11 = s * s * (s - 1);
                state qm;
                for (std::size_t j = 0; j < 3; ++j)
                    qm[j] = h00 * q_prev[j] + h01 * q[j] + h * (h10 * f_prev[j] + h11 * f_new[j]);
                const auto fs = b.velocity(qm.data(), tm);
                state fm{0.0, 0.0, 0.0};
                for (int j = 0; j < d; ++j) fm[static_cast<std::size_t>(j)] = fs.v[j];
                push_sample(tm, qm, fm, fs.scaled_amp);
                ++next_mesh;
            }

            q_prev = q;
            t_prev = t;
            f_prev = f_new;
        }
    } catch (const NodeProximityError& e) {
        path.status = BohmianPath::Status::node_abort;
        path.abort_time = e.t;
        path.min_scaled_amp = std::min(path.min_scaled_amp, e.scaled_amp);
    }
    return path;
}

}  // namespace hb
