#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hb {

// Multi-index in up to 3 dimensions. Unused axes are zero.
struct MultiIndex {
    std::array<int, 3> k{0, 0, 0};

    int operator[](int j) const { return k[static_cast<std::size_t>(j)]; }
    int& operator[](int j) { return k[static_cast<std::size_t>(j)]; }

    int order() const { return k[0] + k[1] + k[2]; }

    MultiIndex raised(int j) const {
        MultiIndex r = *this;
        r[j] += 1;
        return r;
    }
    MultiIndex lowered(int j) const {
        MultiIndex r = *this;
        r[j] -= 1;
        return r;
    }

    bool operator==(const MultiIndex&) const = default;
};

inline double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// alpha! = prod_j alpha_j!
inline double multi_factorial(const MultiIndex& a) {
    return factorial(a[0]) * factorial(a[1]) * factorial(a[2]);
}

// (x - c)^alpha for real vectors given componentwise.
inline double multi_power(const double* x, const MultiIndex& a, int d) {
    double p = 1.0;
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < a[j]; ++i) p *= x[j];
    return p;
}

// All multi-indices with |alpha| == order, graded-lexicographic within the level.
std::vector<MultiIndex> multi_indices_of_order(int d, int order);

// All multi-indices with |alpha| <= max_order, grouped by level.
std::vector<MultiIndex> multi_indices_up_to(int d, int max_order);

// Enumeration of {k : |k| <= max_order} with O(1) rank lookup, shared by the
// packet ladder tables.
class MultiIndexSet {
  public:
    MultiIndexSet() = default;
    MultiIndexSet(int d, int max_order);

    int dim() const { return d_; }
    int max_order() const { return max_order_; }
    std::size_t size() const { return indices_.size(); }
    const MultiIndex& at(std::size_t rank) const { return indices_[rank]; }
    const std::vector<MultiIndex>& indices() const { return indices_; }

    // Rank of k, or -1 if outside the set (negative entry or |k| too large).
    int rank(const MultiIndex& k) const;

    // First rank of the given level |k| == order.
    std::size_t level_begin(int order) const { return level_begin_[static_cast<std::size_t>(order)]; }
    std::size_t level_end(int order) const { return level_begin_[static_cast<std::size_t>(order) + 1]; }

  private:
    int d_ = 0;
    int max_order_ = -1;
    std::vector<MultiIndex> indices_;
    std::vector<std::size_t> level_begin_;
    std::vector<int> rank_table_;  // dense (max_order+1)^d lookup
    int stride1_ = 0, stride2_ = 0;
};

}  // namespace hb
