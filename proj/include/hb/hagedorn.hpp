#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "hb/multi_index.hpp"

namespace hb {

using cplx = std::complex<double>;
// fixed-capacity dynamic types for d in {1,2,3}; no heap traffic
using RVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, 3, 1>;
using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

struct AdmissibilityResidual {
    double sym;   // ||A^T B - B^T A||_F
    double norm;  // ||A^* B + B^* A - 2 I||_F
    bool admissible(double tol = 1e-8) const { return sym < tol && norm < tol; }
};

AdmissibilityResidual validate_admissible(const CMat& A, const CMat& B);

// Full state of a packet family: width/center data plus the action phase.
struct PacketParams {
    double eps = 1.0;
    RVec a;
    RVec eta;
    CMat A, B;
    double S = 0.0;
    // Unwrapped arg(det A) for the continuous branch of det(A)^{-1/2}; NaN
    // selects the principal branch (fresh packets at t = 0).
    double detA_arg = std::numeric_limits<double>::quiet_NaN();

    int dim() const { return static_cast<int>(a.size()); }
    AdmissibilityResidual residual() const { return validate_admissible(A, B); }

    static PacketParams standard(int d, double eps);  // a = eta = 0, A = B = I
};

// Gaussian-times-polynomial envelope of |phi_k| in the scaled variable
// y = (x-a)/sqrt(eps):  C (1+|y|)^{|k|} exp(-c |y|^2 / 2)  bounds the unit
// packet modulus; the x-space bound carries the extra eps^{-d/4}.
struct PacketEnvelope {
    double C = 0.0;
    double c = 1.0;
    int k_order = 0;

    double unit_bound(double r) const;
    double bound_at(const PacketParams& p, const double* x) const;
};

struct PacketMoments {
    RVec mean_x;
    RVec mean_p;
    // ||(x-a)^alpha phi_k||_2 for |alpha| <= 4, aligned with
    // multi_indices_up_to(d, 4)
    std::vector<double> central_norms;
    double norm_deficit = 0.0;  // | ||phi||^2 - 1 |
};

// Pointwise and batch evaluation of phi_k, |k| <= k_max, via the raising
// ladder. Internally everything runs on the unit packet at y = (x-a)/sqrt(eps)
// with momentum eta/sqrt(eps): all magnitudes stay O(1) for any eps and the
// output rescaling by eps^{-d/4} is exact.
class PacketEvaluator {
  public:
    static constexpr int kDefaultKMax = 6;

    PacketEvaluator(const PacketParams& p, int k_max = kDefaultKMax);

    const PacketParams& params() const { return params_; }
    int k_max() const { return set_.max_order(); }
    const MultiIndexSet& index_set() const { return set_; }

    // --- single point ------------------------------------------------------
    // phi_k(x); phased = true multiplies by e^{i S / eps}
    cplx value(const MultiIndex& k, const double* x, bool phased = false) const;
    CVec gradient(const MultiIndex& k, const double* x, bool phased = false) const;

    // Unit packet at scaled position y (the eps = 1, a = 0 packet with
    // momentum eta/sqrt(eps)); |unit_value| = eps^{d/4} |phi_k(a + sqrt(eps) y)|
    cplx unit_value(const MultiIndex& k, const double* y) const;

    // All unit values with |k'| <= up_to at one y, ranked per index_set().
    void unit_values_at(const double* y, int up_to, cplx* out) const;

    // Bohmian field data at x: value, gradient and velocity
    // v = eps * Im(grad phi / phi) computed without forming the large
    // eta/eps phase. scaled_amp = eps^{d/4} |phi_k(x)|.
    struct Field {
        cplx value;          // unit-scale value (eps^{d/4} phi_k)
        double scaled_amp;   // |value|
        RVec velocity;
    };
    Field field(const MultiIndex& k, const double* x) const;

    // Quantum potential -eps^2/2 * (Laplacian |phi|)/|phi| at x.
    double quantum_potential(const MultiIndex& k, const double* x) const;

    // --- batch over positions ---------------------------------------------
    // Unit-value tables over a set of scaled points; used by the grid solver
    // comparisons and the envelope/density fits. Points are d-major:
    // ys[i*d + j] is coordinate j of point i.
    class Table {
      public:
        std::size_t points() const { return n_; }
        const cplx* values(int rank) const { return data_.data() + static_cast<std::size_t>(rank) * n_; }

      private:
        friend class PacketEvaluator;
        std::size_t n_ = 0;
        std::vector<cplx> data_;
    };
    Table unit_table(std::span<const double> ys, int up_to) const;

    // x-space packet values on given points into out (length = npoints).
    void values_on(std::span<const double> xs, const MultiIndex& k, bool phased, cplx* out) const;
    // x-space gradient component j on given points.
    void gradient_on(std::span<const double> xs, const MultiIndex& k, int j, bool phased,
                     cplx* out) const;

    // --- envelope and moments ---------------------------------------------
    // Fit once per (k, A): exact Gaussian rate from the smallest eigenvalue of
    // Re(B A^{-1}), amplitude constant maximized over a reference grid plus a
    // margin so the bound holds between grid nodes.
    PacketEnvelope fit_envelope(const MultiIndex& k) const;

    // Quadrature moments on [-half_width, half_width]^d with n points per axis.
    PacketMoments moments(const MultiIndex& k, int points_per_axis = 401,
                          double half_width = 9.0) const;

    // matrices exposed for closed-form checks
    const CMat& A_inv() const { return a_inv_; }
    const CMat& BA_inv() const { return ba_inv_; }

  private:
    void ladder_fill(const double* y, int up_to, cplx* vals) const;
    void unit_gradient(const MultiIndex& k, const cplx* vals, CVec& grad) const;

    PacketParams params_;
    MultiIndexSet set_;        // up to k_max + 2 (gradient and Laplacian need neighbors)
    int user_k_max_ = 0;
    CMat a_inv_;               // A^{-1}
    CMat a_inv_conj_a_;        // A^{-1} conj(A)
    CMat ba_inv_;              // B A^{-1}
    CVec mu_;                  // eta / sqrt(eps)
    cplx norm_prefactor_;      // pi^{-d/4} det(A)^{-1/2} on the tracked branch
};

}  // namespace hb
