#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hb/multi_index.hpp"

namespace hb {

// Smooth potential with closed-form partial derivatives up to total order 4.
// Families are the built-ins of the experiment configs; "sum" composes them.
// Models are immutable after construction and safe to share across threads.
class PotentialModel {
  public:
    enum class Family { free, harmonic, cosine, gaussian_well, sum };

    static PotentialModel free(int d);
    // V = 1/2 sum_j c_j x_j^2 ; one coefficient broadcasts to all axes.
    static PotentialModel harmonic(int d, std::vector<double> stiffness = {1.0});
    // V = amp * sum_j cos(freq x_j)
    static PotentialModel cosine(int d, double amplitude = 1.0, double frequency = 1.0);
    // V = -depth * exp(-|x|^2 / (2 width^2))
    static PotentialModel gaussian_well(int d, double depth = 1.0, double width = 1.0);
    static PotentialModel sum(std::vector<PotentialModel> terms);

    // Config syntax: "id" | "id:coef,coef" | term '+' term, e.g.
    // "cosine:1,1 + gaussian_well:0.5,2".
    static PotentialModel parse(const std::string& text, int d);

    int dim() const { return d_; }
    Family family() const { return family_; }
    std::string describe() const;

    double value(const double* x) const { return derivative(x, MultiIndex{}); }
    // D^alpha V(x); throws std::invalid_argument for |alpha| > 4.
    double derivative(const double* x, const MultiIndex& alpha) const;

    // All D^alpha V(x) with |alpha| == order, aligned with
    // multi_indices_of_order(dim, order).
    std::vector<double> derivatives_of_order(const double* x, int order) const;

    // gradient / hessian (row-major d*d) convenience wrappers
    void gradient(const double* x, double* g) const;
    void hessian(const double* x, double* h) const;

    // m-th Taylor remainder V_m(x, a) = V(x) - sum_{|alpha| <= m-1} D^a V(a)(x-a)^a / a!
    double taylor_remainder(const double* x, const double* a, int m) const;

    // Declared derivative bound; the bounded families compute a true sup, the
    // unbounded ones report the nominal constant 1 and are expected to fail.
    double declared_cv() const;
    bool is_bounded() const;

    struct GvReport {
        double cv = 0.0;
        bool pass = false;
        // max sampled |D^alpha V| per total order 0..4
        std::array<double, 5> max_by_order{};
        double max_overall = 0.0;
    };
    // Sample sup-norms of all derivatives up to order 4 on the box
    // [lo,hi]^d with `samples` points per axis and compare with declared_cv().
    GvReport check_gv(const double* lo, const double* hi, int samples_per_axis) const;

  private:
    PotentialModel() = default;

    int d_ = 1;
    Family family_ = Family::free;
    std::vector<double> params_;
    std::vector<PotentialModel> terms_;  // for Family::sum
};

}  // namespace hb
