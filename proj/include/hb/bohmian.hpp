#pragma once

#include <memory>
#include <vector>

#include "hb/classical_flow.hpp"
#include "hb/hagedorn.hpp"
#include "hb/reference_solver.hpp"

namespace hb {

// Guiding-wave interface for the trajectory integrator. Both backends expose
// the velocity field v = eps Im(grad psi / psi), the scale-invariant
// amplitude eps^{d/4} |psi| and the quantum potential at (x, t). Queries below
// the node floor throw NodeProximityError; immutable and safe to share
// across path workers.
class WaveBackend {
  public:
    virtual ~WaveBackend() = default;

    int dim() const { return d_; }
    double eps() const { return eps_; }
    double t_begin() const { return t0_; }
    double t_end() const { return t1_; }
    double node_floor() const { return node_floor_; }

    struct Sample {
        RVec v;
        double scaled_amp = 0.0;   // eps^{d/4} |psi|
        double grad_scale = 0.0;   // |grad_y psi| / |psi| in packet units, for step control
    };
    virtual Sample velocity(const double* x, double t) const = 0;
    virtual double scaled_amplitude(const double* x, double t) const = 0;
    virtual double quantum_potential(const double* x, double t) const = 0;

  protected:
    WaveBackend(int d, double eps, double t0, double t1, double floor)
        : d_(d), eps_(eps), t0_(t0), t1_(t1), node_floor_(floor) {}
    void check_floor(double amp, double t) const;

    int d_;
    double eps_, t0_, t1_, node_floor_;
};

// Analytic packet Phi_k transported along the classical flow.
class SemiclassicalBackend : public WaveBackend {
  public:
    SemiclassicalBackend(const ClassicalTrajectory& cl, double eps, MultiIndex k,
                         double node_floor = 1e-6);

    Sample velocity(const double* x, double t) const override;
    double scaled_amplitude(const double* x, double t) const override;
    double quantum_potential(const double* x, double t) const override;

    PacketEvaluator evaluator_at(double t) const;
    const ClassicalTrajectory& trajectory() const { return cl_; }
    MultiIndex k() const { return k_; }

  private:
    const ClassicalTrajectory& cl_;
    MultiIndex k_;
};

// Spectrally evaluated grid solution; the velocity field and amplitude are
// cubic-interpolated in time across four neighboring snapshots (the velocity
// and |psi| are smooth in t, unlike psi itself whose fast phase cancels in
// the ratio).
class ExactBackend : public WaveBackend {
  public:
    explicit ExactBackend(std::shared_ptr<const WaveSequence> seq, double node_floor = 1e-6);

    Sample velocity(const double* x, double t) const override;
    double scaled_amplitude(const double* x, double t) const override;
    double quantum_potential(const double* x, double t) const override;

    const WaveSequence& sequence() const { return *seq_; }

  private:
    struct Stencil {
        std::size_t base;
        double w[4];
    };
    Stencil stencil_at(double t) const;

    std::shared_ptr<const WaveSequence> seq_;
};

struct PathSample {
    double t = 0.0;
    RVec q;
    RVec v;
    double scaled_amp = 0.0;
};

struct BohmianPath {
    enum class Status { completed, node_abort };

    RVec x0;
    Status status = Status::completed;
    double abort_time = std::numeric_limits<double>::quiet_NaN();
    std::vector<PathSample> samples;  // uniform mesh; truncated on abort
    double min_scaled_amp = std::numeric_limits<double>::infinity();

    bool completed() const { return status == Status::completed; }
};

struct PathOptions {
    double tol = 1e-6;
    int mesh_points = 400;        // samples are at t_j = j T / mesh_points
    double min_step_fraction = 1e-12;
};

// Adaptive dopri5 on dQ/dt = v(Q, t) over [t_begin, t_begin + T]. Node
// proximity (from the backend) and step underflow mark the path node_abort;
// aborts are reported, not raised.
BohmianPath integrate_path(const WaveBackend& b, const double* x0, double T,
                           const PathOptions& opt = {});

}  // namespace hb
