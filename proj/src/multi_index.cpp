#include "hb/multi_index.hpp"

namespace hb {

std::vector<MultiIndex> multi_indices_of_order(int d, int order) {
    std::vector<MultiIndex> out;
    if (d == 1) {
        out.push_back({order, 0, 0});
        return out;
    }
    if (d == 2) {
        for (int i = order; i >= 0; --i) out.push_back({i, order - i, 0});
        return out;
    }
    for (int i = order; i >= 0; --i)
        for (int j = order - i; j >= 0; --j) out.push_back({i, j, order - i - j});
    return out;
}

std::vector<MultiIndex> multi_indices_up_to(int d, int max_order) {
    std::vector<MultiIndex> out;
    for (int m = 0; m <= max_order; ++m) {
        auto level = multi_indices_of_order(d, m);
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

MultiIndexSet::MultiIndexSet(int d, int max_order) : d_(d), max_order_(max_order) {
    if (d < 1 || d > 3) throw std::invalid_argument("MultiIndexSet: dimension must be 1..3");
    if (max_order < 0) throw std::invalid_argument("MultiIndexSet: negative order");
    indices_ = multi_indices_up_to(d, max_order);
    level_begin_.assign(static_cast<std::size_t>(max_order) + 2, 0);
    for (int m = 0; m <= max_order; ++m)
        level_begin_[static_cast<std::size_t>(m) + 1] =
            level_begin_[static_cast<std::size_t>(m)] + multi_indices_of_order(d, m).size();

    const int n = max_order + 1;
    stride1_ = (d >= 2) ? n : 0;
    stride2_ = (d >= 3) ? n * n : 0;
    rank_table_.assign(static_cast<std::size_t>(n) * (d >= 2 ? n : 1) * (d >= 3 ? n : 1), -1);
    for (std::size_t r = 0; r < indices_.size(); ++r) {
        const MultiIndex& k = indices_[r];
        rank_table_[static_cast<std::size_t>(k[0] + k[1] * stride1_ + k[2] * stride2_)] =
            static_cast<int>(r);
    }
}

int MultiIndexSet::rank(const MultiIndex& k) const {
    for (int j = 0; j < 3; ++j)
        if (k[j] < 0) return -1;
    if (k.order() > max_order_) return -1;
    return rank_table_[static_cast<std::size_t>(k[0] + k[1] * stride1_ + k[2] * stride2_)];
}

}  // namespace hb
