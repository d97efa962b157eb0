#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "hb/classical_flow.hpp"
#include "hb/hagedorn.hpp"
#include "hb/potential.hpp"

namespace hb {

// Periodic grid for the split-step solver, d in {1,2}; same box and point
// count on every axis, x_i = -L + i * (2L/N).
struct GridSpec {
    int d = 1;
    int N = 256;      // points per axis, power of two
    double L = 8.0;   // box half-width
    double dt = 5e-4;

    double dx() const { return 2.0 * L / N; }
    std::size_t total_points() const;
    // flattened d-major coordinates of all grid points
    std::vector<double> coordinates() const;

    // Resolution rules: dx <= sqrt(eps)/4 and spectral cutoff pi/dx at least
    // 8 (max|eta| + sqrt(eps)) / eps; L covers the classical path plus
    // 12 sqrt(eps) (1 + |k|), rounded up to an integer.
    static GridSpec auto_for(const ClassicalTrajectory& cl, double eps, int k_order,
                             double dt_target, int n_override = 0, double l_override = 0.0);
};

// Sorted-wavenumber spectral copy of one snapshot; supports band-limited
// point evaluation of psi, grad psi and Laplacian psi. Immutable, safe for
// concurrent reads.
class SpectralSnapshot {
  public:
    SpectralSnapshot() = default;
    SpectralSnapshot(int d, int N, double L, double t, std::vector<cplx> sorted_coef);

    double time() const { return t_; }
    cplx eval(const double* x) const;
    void eval_with_grad(const double* x, cplx& val, CVec& grad) const;
    cplx eval_laplacian(const double* x) const;

  private:
    void check_inside(const double* x) const;
    int d_ = 0, N_ = 0;
    double L_ = 0.0, t_ = 0.0, k0_ = 0.0, dk_ = 0.0;
    std::vector<cplx> coef_;                // ascending wavenumber order
    std::vector<std::vector<cplx>> dcoef_;  // i k_j * coef per axis
};

class GridWave;
class WaveSequence;
struct PropagateOptions;
WaveSequence propagate(const GridWave& psi0, const PotentialModel& V, double T,
                       const PropagateOptions& opt);

class GridWave {
  public:
    GridWave() = default;
    GridWave(const GridSpec& g, double eps, double t);

    // packet sampled on the grid, including the e^{iS/eps} phase
    static GridWave from_packet(const GridSpec& g, const PacketEvaluator& ev, const MultiIndex& k);

    const GridSpec& grid() const { return grid_; }
    double eps() const { return eps_; }
    double time() const { return t_; }
    std::span<const cplx> amplitudes() const { return amps_; }
    std::span<cplx> amplitudes() { return amps_; }

    double norm() const;           // quadrature L2 norm
    double boundary_max_abs() const;

    SpectralSnapshot spectral() const;
    cplx eval(const double* x) const { return spectral().eval(x); }

    // ||(p - eta)^alpha psi||_2 via Parseval
    double momentum_weighted_norm(const RVec& eta, const MultiIndex& alpha) const;

    // raw little-endian re/im doubles next to a text header (d, N, L, eps, t)
    void save(const std::filesystem::path& base) const;
    static GridWave load(const std::filesystem::path& base);

  private:
    friend WaveSequence propagate(const GridWave&, const PotentialModel&, double,
                                  const PropagateOptions&);
    GridSpec grid_;
    double eps_ = 1.0, t_ = 0.0;
    std::vector<cplx> amps_;
};

// Time-indexed snapshots at uniform spacing; spectral copies are prepared
// eagerly so concurrent path integration never mutates shared state.
class WaveSequence {
  public:
    double t_begin() const { return snaps_.front().time(); }
    double t_end() const { return snaps_.back().time(); }
    double spacing() const { return spacing_; }
    std::size_t size() const { return snaps_.size(); }
    const SpectralSnapshot& spectral(std::size_t i) const { return spectral_[i]; }
    const GridWave& wave(std::size_t i) const { return snaps_[i]; }
    const GridWave& final_wave() const { return snaps_.back(); }

    // nearest snapshot index for a time on the snapshot lattice
    std::size_t index_at(double t) const;

  private:
    friend WaveSequence propagate(const GridWave&, const PotentialModel&, double,
                                  const PropagateOptions&);
    double spacing_ = 0.0;
    std::vector<GridWave> snaps_;
    std::vector<SpectralSnapshot> spectral_;
};

// Options for propagate(): Strang splitting
// e^{-i dt V/2eps} e^{-i dt eps k^2/2} e^{-i dt V/2eps} per step (kinetic
// factor applied in Fourier space). Norm and box-edge amplitude are monitored
// at every snapshot; violations abort with NumericalError.
struct PropagateOptions {
    double dt_target = 5e-4;
    double snapshot_spacing = 0.0;  // 0: min(0.01, sqrt(eps)/16)
    double boundary_abort = 1e-10;
    double norm_drift_abort = 1e-7;
};

inline WaveSequence propagate(const GridWave& psi0, const PotentialModel& V, double T) {
    return propagate(psi0, V, T, PropagateOptions{});
}

struct NormComparison {
    double l2_diff = 0.0;
    double linf_diff = 0.0;
    double linf_grad_diff = 0.0;
    double l2_psi = 0.0;            // sanity: quadrature norm of psi
    double phase_aligned_sup = 0.0; // sup |psi - e^{i arg<Phi,psi>} Phi|
};

// Grid-vs-packet distances at the wave's own time; ev must carry the same eps.
NormComparison compare_norms(const GridWave& w, const PacketEvaluator& ev, const MultiIndex& k);

}  // namespace hb
