#include "hb/potential.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hb {
namespace {

constexpr int kMaxDerivOrder = 4;

void require_order(const MultiIndex& alpha) {
    if (alpha.order() > kMaxDerivOrder || alpha[0] < 0 || alpha[1] < 0 || alpha[2] < 0)
        throw std::invalid_argument("potential derivative order must be 0..4");
}

// n-th derivative of cos at u, n >= 0
double cos_deriv(double u, int n) {
    switch (n & 3) {
        case 0: return std::cos(u);
        case 1: return -std::sin(u);
        case 2: return -std::cos(u);
        default: return std::sin(u);
    }
}

// physicists' Hermite H_n(u)
double hermite(int n, double u) {
    double h0 = 1.0, h1 = 2.0 * u;
    if (n == 0) return h0;
    if (n == 1) return h1;
    for (int i = 1; i < n; ++i) {
        const double h2 = 2.0 * u * h1 - 2.0 * i * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

// max_u |H_n(u) e^{-u^2}|, scanned once; used for the gaussian family bound
double hermite_gauss_max(int n) {
    static const std::array<double, kMaxDerivOrder + 1> table = [] {
        std::array<double, kMaxDerivOrder + 1> t{};
        for (int m = 0; m <= kMaxDerivOrder; ++m) {
            double best = 0.0;
            for (int i = 0; i <= 60000; ++i) {
                const double u = -6.0 + 12.0 * i / 60000.0;
                best = std::max(best, std::abs(hermite(m, u)) * std::exp(-u * u));
            }
            t[static_cast<std::size_t>(m)] = best * 1.0001;  // pad the scan granularity
        }
        return t;
    }();
    return table[static_cast<std::size_t>(n)];
}

}  // namespace

PotentialModel PotentialModel::free(int d) {
    PotentialModel m;
    m.d_ = d;
    m.family_ = Family::free;
    return m;
}

PotentialModel PotentialModel::harmonic(int d, std::vector<double> stiffness) {
    if (stiffness.empty()) stiffness = {1.0};
    if (stiffness.size() == 1) stiffness.assign(static_cast<std::size_t>(d), stiffness[0]);
    if (stiffness.size() != static_cast<std::size_t>(d))
        throw std::invalid_argument("harmonic: need 1 or d stiffness coefficients");
    PotentialModel m;
    m.d_ = d;
    m.family_ = Family::harmonic;
    m.params_ = std::move(stiffness);
    return m;
}

PotentialModel PotentialModel::cosine(int d, double amplitude, double frequency) {
    PotentialModel m;
    m.d_ = d;
    m.family_ = Family::cosine;
    m.params_ = {amplitude, frequency};
    return m;
}

PotentialModel PotentialModel::gaussian_well(int d, double depth, double width) {
    if (width <= 0.0) throw std::invalid_argument("gaussian_well: width must be positive");
    PotentialModel m;
    m.d_ = d;
    m.family_ = Family::gaussian_well;
    m.params_ = {depth, width};
    return m;
}

PotentialModel PotentialModel::sum(std::vector<PotentialModel> terms) {
    if (terms.empty()) throw std::invalid_argument("sum potential needs at least one term");
    PotentialModel m;
    m.d_ = terms.front().d_;
    for (const auto& t : terms)
        if (t.d_ != m.d_) throw std::invalid_argument("sum potential: dimension mismatch");
    m.family_ = Family::sum;
    m.terms_ = std::move(terms);
    return m;
}

double PotentialModel::derivative(const double* x, const MultiIndex& alpha) const {
    require_order(alpha);
    const int n = alpha.order();
    switch (family_) {
        case Family::free:
            return 0.0;
        case Family::harmonic: {
            // 1/2 sum_j c_j x_j^2
            if (n == 0) {
                double v = 0.0;
                for (int j = 0; j < d_; ++j) v += 0.5 * params_[static_cast<std::size_t>(j)] * x[j] * x[j];
                return v;
            }
            if (n == 1) {
                for (int j = 0; j < d_; ++j)
                    if (alpha[j] == 1) return params_[static_cast<std::size_t>(j)] * x[j];
            }
            if (n == 2) {
                for (int j = 0; j < d_; ++j)
                    if (alpha[j] == 2) return params_[static_cast<std::size_t>(j)];
            }
            return 0.0;  // mixed second order and anything above is zero
        }
        case Family::cosine: {
            const double amp = params_[0], w = params_[1];
            if (n == 0) {
                double v = 0.0;
                for (int j = 0; j < d_; ++j) v += amp * std::cos(w * x[j]);
                return v;
            }
            // separable sum: nonzero only when alpha is concentrated on one axis
            for (int j = 0; j < d_; ++j)
                if (alpha[j] == n)
                    return amp * std::pow(w, n) * cos_deriv(w * x[j], n);
            return 0.0;
        }
        case Family::gaussian_well: {
            const double depth = params_[0], w = params_[1];
            const double sw = w * std::sqrt(2.0);
            // product of 1-d gaussian factors; differentiate each axis alpha_j times
            double v = -depth;
            for (int j = 0; j < d_; ++j) {
                const double u = x[j] / sw;
                const int nj = alpha[j];
                double f = std::exp(-u * u);
                if (nj > 0) {
                    double sign = (nj % 2 == 0) ? 1.0 : -1.0;
                    f *= sign * hermite(nj, u) / std::pow(sw, nj);
                }
                v *= f;
            }
            return v;
        }
        case Family::sum: {
            double v = 0.0;
            for (const auto& t : terms_) v += t.derivative(x, alpha);
            return v;
        }
    }
    return 0.0;
}

std::vector<double> PotentialModel::derivatives_of_order(const double* x, int order) const {
    const auto idx = multi_indices_of_order(d_, order);
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = derivative(x, idx[i]);
    return out;
}

void PotentialModel::gradient(const double* x, double* g) const {
    for (int j = 0; j < d_; ++j) {
        MultiIndex a;
        a[j] = 1;
        g[j] = derivative(x, a);
    }
}

void PotentialModel::hessian(const double* x, double* h) const {
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) {
            MultiIndex a;
            a[i] += 1;
            a[j] += 1;
            h[i * d_ + j] = derivative(x, a);
        }
}

double PotentialModel::taylor_remainder(const double* x, const double* a, int m) const {
    if (m < 1) throw std::invalid_argument("taylor_remainder: order m must be >= 1");
    double dx[3] = {0, 0, 0};
    for (int j = 0; j < d_; ++j) dx[j] = x[j] - a[j];
    double poly = 0.0;
    for (int order = 0; order < m; ++order)
        for (const auto& alpha : multi_indices_of_order(d_, order))
            poly += derivative(a, alpha) / multi_factorial(alpha) * multi_power(dx, alpha, d_);
    return value(x) - poly;
}

bool PotentialModel::is_bounded() const {
    switch (family_) {
        case Family::free:
        case Family::cosine:
        case Family::gaussian_well:
            return true;
        case Family::harmonic:
            return false;
        case Family::sum:
            return std::all_of(terms_.begin(), terms_.end(),
                               [](const PotentialModel& t) { return t.is_bounded(); });
    }
    return false;
}

double PotentialModel::declared_cv() const {
    switch (family_) {
        case Family::free:
            return 0.0;
        case Family::harmonic:
            return 1.0;  // nominal; the family violates the bound and check_gv flags it
        case Family::cosine: {
            const double amp = std::abs(params_[0]), w = std::abs(params_[1]);
            double cv = amp * d_;  // value bound; derivatives are amp * w^n
            for (int n = 1; n <= kMaxDerivOrder; ++n) cv = std::max(cv, amp * std::pow(w, n));
            return cv;
        }
        case Family::gaussian_well: {
            const double depth = std::abs(params_[0]), sw = params_[1] * std::sqrt(2.0);
            double cv = depth;
            for (int n = 1; n <= kMaxDerivOrder; ++n)
                cv = std::max(cv, depth * hermite_gauss_max(n) / std::pow(sw, n));
            return cv;
        }
        case Family::sum: {
            double cv = 0.0;
            for (const auto& t : terms_) cv += t.declared_cv();
            return cv;
        }
    }
    return 0.0;
}

PotentialModel::GvReport PotentialModel::check_gv(const double* lo, const double* hi,
                                                  int samples_per_axis) const {
    if (samples_per_axis < 2) throw std::invalid_argument("check_gv: need >= 2 samples per axis");
    GvReport rep;
    rep.cv = declared_cv();

    std::array<int, 3> idx{0, 0, 0};
    const int n = samples_per_axis;
    std::size_t total = 1;
    for (int j = 0; j < d_; ++j) total *= static_cast<std::size_t>(n);

    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        double x[3] = {0, 0, 0};
        for (int j = 0; j < d_; ++j) {
            idx[static_cast<std::size_t>(j)] = static_cast<int>(rem % static_cast<std::size_t>(n));
            rem /= static_cast<std::size_t>(n);
            x[j] = lo[j] + (hi[j] - lo[j]) * idx[static_cast<std::size_t>(j)] / (n - 1);
        }
        for (int order = 0; order <= kMaxDerivOrder; ++order)
            for (const auto& alpha : multi_indices_of_order(d_, order)) {
                const double v = std::abs(derivative(x, alpha));
                auto& slot = rep.max_by_order[static_cast<std::size_t>(order)];
                slot = std::max(slot, v);
            }
    }
    rep.max_overall = *std::max_element(rep.max_by_order.begin(), rep.max_by_order.end());
    rep.pass = rep.max_overall <= rep.cv * (1.0 + 1e-12) + 1e-300;
    return rep;
}

std::string PotentialModel::describe() const {
    std::ostringstream os;
    switch (family_) {
        case Family::free: os << "free"; break;
        case Family::harmonic:
            os << "harmonic:";
            for (std::size_t i = 0; i < params_.size(); ++i) os << (i ? "," : "") << params_[i];
            break;
        case Family::cosine: os << "cosine:" << params_[0] << "," << params_[1]; break;
        case Family::gaussian_well: os << "gaussian_well:" << params_[0] << "," << params_[1]; break;
        case Family::sum:
            for (std::size_t i = 0; i < terms_.size(); ++i)
                os << (i ? " + " : "") << terms_[i].describe();
            break;
    }
    return os.str();
}

PotentialModel PotentialModel::parse(const std::string& text, int d) {
    std::vector<PotentialModel> terms;
    std::size_t pos = 0;
    while (pos != std::string::npos && pos < text.size()) {
        std::size_t plus = text.find('+', pos);
        std::string term = text.substr(pos, plus == std::string::npos ? plus : plus - pos);
        pos = (plus == std::string::npos) ? std::string::npos : plus + 1;

        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        term = trim(term);
        if (term.empty()) throw std::invalid_argument("empty potential term");

        std::string id = term;
        std::vector<double> coefs;
        if (const auto colon = term.find(':'); colon != std::string::npos) {
            id = trim(term.substr(0, colon));
            std::stringstream cs(term.substr(colon + 1));
            std::string tok;
            while (std::getline(cs, tok, ',')) {
                tok = trim(tok);
                if (tok.empty()) continue;
                std::size_t used = 0;
                coefs.push_back(std::stod(tok, &used));
                if (used != tok.size())
                    throw std::invalid_argument("bad potential coefficient: " + tok);
            }
        }

        auto coef = [&](std::size_t i, double dflt) { return i < coefs.size() ? coefs[i] : dflt; };
        if (id == "free")
            terms.push_back(free(d));
        else if (id == "harmonic")
            terms.push_back(harmonic(d, coefs.empty() ? std::vector<double>{1.0} : coefs));
        else if (id == "cosine")
            terms.push_back(cosine(d, coef(0, 1.0), coef(1, 1.0)));
        else if (id == "gaussian_well")
            terms.push_back(gaussian_well(d, coef(0, 1.0), coef(1, 1.0)));
        else
            throw std::invalid_argument("unknown potential id: " + id);
    }
    if (terms.empty()) throw std::invalid_argument("empty potential spec");
    return terms.size() == 1 ? std::move(terms.front()) : sum(std::move(terms));
}

}  // namespace hb
