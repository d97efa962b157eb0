#pragma once

#include <iosfwd>
#include <vector>

#include "hb/hagedorn.hpp"
#include "hb/potential.hpp"

namespace hb {

struct ClassicalState {
    double t = 0.0;
    RVec a;
    RVec eta;
    CMat A, B;
    double S = 0.0;

    int dim() const { return static_cast<int>(a.size()); }
    AdmissibilityResidual residual() const { return validate_admissible(A, B); }
    double energy(const PotentialModel& V) const;

    static ClassicalState standard(int d);  // a = eta = 0, A = B = I, S = 0
};

struct QuadraticCoeffs {
    double value;
    RVec grad;
    RMat hess;
};

// V(a), grad V(a), Hess V(a): the data of the quadratic Hamiltonian about a(t).
QuadraticCoeffs quadratic_hamiltonian_coeffs(const ClassicalState& s, const PotentialModel& V);

// Dense classical trajectory: uniform Hermite mesh sampled from the adaptive
// integrator, with the unwrapped arg(det A) tracked for the packet branch.
// Immutable after construction; interpolation error is O(mesh_dt^4).
class ClassicalTrajectory {
  public:
    double t_begin() const { return times_.front(); }
    double t_end() const { return times_.back(); }
    double mesh_dt() const { return dt_; }

    ClassicalState at(double t) const;
    // Packet parameters at time t for a given eps; detA_arg is the continuous
    // branch starting from the principal value at t_begin.
    PacketParams packet_at(double t, double eps) const;
    double detA_arg_at(double t) const;

    double max_abs_center(int axis) const;
    double max_momentum_norm() const;
    double max_admissibility_residual() const { return max_residual_; }
    // extreme singular values of A and B over the mesh; the packet's spatial
    // width scales with sigma_max(A), its narrowest feature with sigma_min(A)
    // and its momentum spread with sigma_max(B)
    double max_sigma_A() const;
    double min_sigma_A() const;
    double max_sigma_B() const;

    // CSV rows (t, a, eta, Re A, Im A, Re B, Im B, S), row-major matrices
    void write_csv(std::ostream& os) const;

  private:
    friend ClassicalTrajectory integrate_flow(const ClassicalState&, const PotentialModel&,
                                              double, double, double, int);
    int d_ = 0;
    double dt_ = 0.0;
    std::vector<double> times_;
    std::vector<std::vector<double>> states_;  // packed state per node
    std::vector<std::vector<double>> derivs_;  // packed RHS per node
    std::vector<double> det_arg_;              // unwrapped arg det A per node
    double max_residual_ = 0.0;

    std::vector<double> packed_at(double t) const;
};

// Adaptive Runge-Kutta (dopri5, dense output) on the combined system
//   da = eta, deta = -grad V(a), dA = iB, dB = i Hess V(a) A,
//   dS = |eta|^2/2 - V(a)
// t_final < t_initial integrates backwards. Aborts with NumericalError when
// the admissibility residual exceeds 1e-6 or the step size underflows.
ClassicalTrajectory integrate_flow(const ClassicalState& init, const PotentialModel& V,
                                   double t_initial, double t_final, double tol,
                                   int mesh_intervals = 2048);

inline ClassicalTrajectory integrate_flow(const ClassicalState& init, const PotentialModel& V,
                                          double T, double tol) {
    return integrate_flow(init, V, init.t, init.t + T, tol);
}

}  // namespace hb
