#pragma once

#include <cstdint>
#include <vector>

#include "hb/bohmian.hpp"
#include "hb/classical_flow.hpp"
#include "hb/hagedorn.hpp"
#include "hb/potential.hpp"

namespace hb {

// Deterministic splitmix64 stream with an explicit Box-Muller transform, so
// draws do not depend on standard-library distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);
    static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

    double uniform();  // [0, 1)
    double normal();

  private:
    std::uint64_t s_;
    bool have_cached_ = false;
    double cached_ = 0.0;
    std::uint64_t next_u64();
};

// I.i.d. draws from |phi_k|^2. k = 0 uses the exact Gaussian with covariance
// (eps/2) A A^*; k > 0 rejects against the fitted envelope under a Gaussian
// proposal. Deterministic given the seed.
std::vector<RVec> born_sample(const PacketEvaluator& ev, const MultiIndex& k, std::size_t n,
                              std::uint64_t seed);

// Per-path reductions against the classical trajectory on the common mesh.
struct PathSummary {
    RVec x0;
    RVec q_final;
    bool completed = false;
    double abort_time = std::numeric_limits<double>::quiet_NaN();
    double max_dev = 0.0;          // max_t |Q - a|
    double max_vdev = 0.0;         // max_t |v(Q,t) - eta|
    double max_avg_vdev = 0.0;     // windowed-average velocity statistic
    double min_scaled_amp = 0.0;   // min_t eps^{d/4} |psi(Q,t)|
};

struct EnsembleResult {
    double eps = 0.0;
    MultiIndex k;
    std::uint64_t seed = 0;
    double delta_t = 0.0;  // window used for max_avg_vdev
    std::vector<PathSummary> paths;

    std::size_t abort_count() const;
    std::size_t size() const { return paths.size(); }
};

// delta_t must be positive and at most half the horizon; it is snapped to the
// path mesh.
PathSummary summarize_path(const BohmianPath& path, const ClassicalTrajectory& cl,
                           double delta_t);

struct DeviationStat {
    double probability = 0.0;  // completed paths inside the moving ball; aborts count against
    double sigma = 0.0;        // binomial standard error
    std::size_t inside = 0;
    std::size_t total = 0;
};
DeviationStat deviation_stat(const EnsembleResult& ens, double R);

// Empirical quantile (linear interpolation) of min scaled amplitude.
double node_proximity_quantile(const EnsembleResult& ens, double q);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci95 = 0.0;  // half-width on the slope
};
// Least-squares slope of log(value) against log(eps); needs >= 4 points and
// positive values.
RateFit rate_fit(const std::vector<double>& eps, const std::vector<double>& values);

struct FluxBound {
    double tail = 0.0;   // P(|x0 - a(0)| > R sqrt(eps))
    double flux = 0.0;   // surface integral of the relative current
    double bound() const { return tail + flux; }
};
// Quadrature bound on the probability of leaving the moving ball of radius
// R sqrt(eps), evaluated analytically on the semiclassical packet. The
// relative current j - |psi|^2 eta reduces to unit-packet ladder data, so the
// integrand carries no explicit eps. Halving the meshes must move the result
// by < 1%, else NumericalError.
FluxBound flux_bound(const ClassicalTrajectory& cl, double eps, const MultiIndex& k, double R,
                     double T, int time_intervals = 512, int angular_points = 128);

// || V_m(. , a(s)) Phi_k(. , s) ||_2 by unit-variable quadrature.
double remainder_norm(const PacketEvaluator& ev, const MultiIndex& k, const PotentialModel& V,
                      int m, int points_per_axis = 1201, double half_width = 9.0);

struct Chi2Result {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 0.0;
    std::size_t used_paths = 0;
};
// Final ensemble positions against the grid density |psi(., T)|^2, d = 1.
// Bins are uniform over the bulk with open tail bins; bins with expected
// count below 5 are merged.
Chi2Result equivariance_chi2(const std::vector<PathSummary>& paths, const GridWave& w_final,
                             int bins = 40);

}  // namespace hb
