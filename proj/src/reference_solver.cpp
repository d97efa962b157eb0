#include "hb/reference_solver.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>

#include "hb/errors.hpp"
#include "hb/kernels.hpp"

namespace hb {
namespace {

// FFTW plan registry keyed by (d, N). Plan creation is not thread safe;
// fftw_execute_dft on distinct arrays is. Plans use FFTW_ESTIMATE so that the
// chosen algorithm, and therefore every last bit of the output, is stable
// across runs.
class FftEngine {
  public:
    static FftEngine& get(int d, int N) {
        static std::mutex mu;
        static std::map<std::pair<int, int>, std::unique_ptr<FftEngine>> cache;
        std::lock_guard lock(mu);
        auto& slot = cache[{d, N}];
        if (!slot) slot.reset(new FftEngine(d, N));
        return *slot;
    }

    void forward(cplx* z) const { fftw_execute_dft(fwd_, as_fftw(z), as_fftw(z)); }
    void backward(cplx* z) const { fftw_execute_dft(bwd_, as_fftw(z), as_fftw(z)); }

  private:
    FftEngine(int d, int N) {
        std::vector<cplx> buf(d == 1 ? static_cast<std::size_t>(N)
                                     : static_cast<std::size_t>(N) * static_cast<std::size_t>(N));
        if (d == 1) {
            fwd_ = fftw_plan_dft_1d(N, as_fftw(buf.data()), as_fftw(buf.data()), FFTW_FORWARD,
                                    FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_1d(N, as_fftw(buf.data()), as_fftw(buf.data()), FFTW_BACKWARD,
                                    FFTW_ESTIMATE);
        } else {
            fwd_ = fftw_plan_dft_2d(N, N, as_fftw(buf.data()), as_fftw(buf.data()), FFTW_FORWARD,
                                    FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_2d(N, N, as_fftw(buf.data()), as_fftw(buf.data()), FFTW_BACKWARD,
                                    FFTW_ESTIMATE);
        }
    }
    static fftw_complex* as_fftw(cplx* z) { return reinterpret_cast<fftw_complex*>(z); }

    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

// FFT bin m -> wavenumber index j in [-N/2, N/2): j = m for m < N/2, m - N
// otherwise. Sorted order is j ascending, i.e. sorted[j + N/2] = fft[m(j)].
inline int fft_bin_of(int j, int N) { return j < 0 ? j + N : j; }

}  // namespace

std::size_t GridSpec::total_points() const {
    std::size_t n = static_cast<std::size_t>(N);
    return d == 1 ? n : n * n;
}

std::vector<double> GridSpec::coordinates() const {
    const double h = dx();
    std::vector<double> xs;
    xs.reserve(total_points() * static_cast<std::size_t>(d));
    if (d == 1) {
        for (int i = 0; i < N; ++i) xs.push_back(-L + h * i);
    } else {
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                xs.push_back(-L + h * i);
                xs.push_back(-L + h * j);
            }
    }
    return xs;
}

GridSpec GridSpec::auto_for(const ClassicalTrajectory& cl, double eps, int k_order,
                            double dt_target, int n_override, double l_override) {
    GridSpec g;
    g.d = 0;
    // trajectory dimension: probe through a state sample
    g.d = cl.at(cl.t_begin()).dim();
    if (g.d > 2) throw std::invalid_argument("grid solver supports d in {1,2}");

    const double se = std::sqrt(eps);
    double reach = 0.0;
    for (int j = 0; j < g.d; ++j) reach = std::max(reach, cl.max_abs_center(j));
    // the 12 sqrt(eps)(1+|k|) margin assumes an O(1) frame; scale it by the
    // actual width growth sigma_max(A(t)) along the run
    const double width = std::max(1.0, cl.max_sigma_A());
    g.L = l_override > 0.0 ? l_override
                           : std::ceil(reach + 12.0 * se * (1.0 + k_order) * width);

    const double dx_packet = se * std::min(1.0, cl.min_sigma_A()) / 4.0;
    const double dx_cutoff =
        std::numbers::pi * eps /
        (8.0 * (cl.max_momentum_norm() + se * std::max(1.0, cl.max_sigma_B())));
    const double dx = std::min(dx_packet, dx_cutoff);

    int N = 16;
    while (N * dx < 2.0 * g.L) {
        N *= 2;
        if (N > (1 << 20)) throw NumericalError("grid resolution request out of range");
    }
    g.N = n_override > 0 ? n_override : N;
    g.dt = dt_target;
    return g;
}

SpectralSnapshot::SpectralSnapshot(int d, int N, double L, double t, std::vector<cplx> sorted_coef)
    : d_(d), N_(N), L_(L), t_(t), coef_(std::move(sorted_coef)) {
    dk_ = std::numbers::pi / L_;
    k0_ = -dk_ * (N_ / 2);
    dcoef_.resize(static_cast<std::size_t>(d_));
    const std::size_t n = coef_.size();
    for (int ax = 0; ax < d_; ++ax) {
        auto& dc = dcoef_[static_cast<std::size_t>(ax)];
        dc.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int idx = (d_ == 1) ? static_cast<int>(i)
                                      : (ax == 0 ? static_cast<int>(i) / N_
                                                 : static_cast<int>(i) % N_);
            double k = k0_ + dk_ * idx;
            if (idx == 0) k = 0.0;  // Nyquist row: no derivative contribution
            dc[i] = cplx(0.0, k) * coef_[i];
        }
    }
}

void SpectralSnapshot::check_inside(const double* x) const {
    const double margin = 4.0 * (2.0 * L_ / N_);
    for (int j = 0; j < d_; ++j)
        if (x[j] < -L_ + margin || x[j] > L_ - margin)
            throw std::out_of_range("wave evaluation outside the grid box");
}

cplx SpectralSnapshot::eval(const double* x) const {
    cplx v;
    if (d_ == 1) {
        check_inside(x);
        kernels::ops().fourier_eval(coef_.data(), nullptr, coef_.size(), k0_, dk_, x[0] + L_, &v,
                                    nullptr);
        return v;
    }
    CVec g;
    eval_with_grad(x, v, g);
    return v;
}

void SpectralSnapshot::eval_with_grad(const double* x, cplx& val, CVec& grad) const {
    check_inside(x);
    const auto& K = kernels::ops();
    grad = CVec::Zero(d_);
    if (d_ == 1) {
        cplx v, dv;
        K.fourier_eval(coef_.data(), dcoef_[0].data(), coef_.size(), k0_, dk_, x[0] + L_, &v, &dv);
        val = v;
        grad[0] = dv;
        return;
    }

    // 2d: contract the fast axis per row, then the slow axis
    const std::size_t n = static_cast<std::size_t>(N_);
    thread_local std::vector<cplx> rowv, rowd1, rowd2;
    rowv.resize(n);
    rowd1.resize(n);
    rowd2.resize(n);
    const double u0 = x[0] + L_, u1 = x[1] + L_;
    for (std::size_t r = 0; r < n; ++r) {
        cplx v, dv;
        K.fourier_eval(coef_.data() + r * n, dcoef_[1].data() + r * n, n, k0_, dk_, u1, &v, &dv);
        rowv[r] = v;
        rowd2[r] = dv;
        const int idx = static_cast<int>(r);
        double k = (idx == 0) ? 0.0 : k0_ + dk_ * idx;
        rowd1[r] = cplx(0.0, k) * v;
    }
    cplx v, d1;
    K.fourier_eval(rowv.data(), rowd1.data(), n, k0_, dk_, u0, &v, &d1);
    cplx d2;
    K.fourier_eval(rowd2.data(), nullptr, n, k0_, dk_, u0, &d2, nullptr);
    val = v;
    grad[0] = d1;
    grad[1] = d2;
}

cplx SpectralSnapshot::eval_laplacian(const double* x) const {
    check_inside(x);
    const auto& K = kernels::ops();
    const std::size_t n = coef_.size();
    thread_local std::vector<cplx> ddc;
    if (d_ == 1) {
        ddc.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double k = k0_ + dk_ * static_cast<double>(i);
            ddc[i] = -k * k * coef_[i];
        }
        cplx v;
        K.fourier_eval(ddc.data(), nullptr, n, k0_, dk_, x[0] + L_, &v, nullptr);
        return v;
    }
    const std::size_t rows = static_cast<std::size_t>(N_);
    ddc.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double k1 = k0_ + dk_ * static_cast<double>(i / rows);
        const double k2 = k0_ + dk_ * static_cast<double>(i % rows);
        ddc[i] = -(k1 * k1 + k2 * k2) * coef_[i];
    }
    thread_local std::vector<cplx> rowv;
    rowv.resize(rows);
    const double u0 = x[0] + L_, u1 = x[1] + L_;
    for (std::size_t r = 0; r < rows; ++r)
        K.fourier_eval(ddc.data() + r * rows, nullptr, rows, k0_, dk_, u1, &rowv[r], nullptr);
    cplx v;
    K.fourier_eval(rowv.data(), nullptr, rows, k0_, dk_, u0, &v, nullptr);
    return v;
}

GridWave::GridWave(const GridSpec& g, double eps, double t) : grid_(g), eps_(eps), t_(t) {
    if (g.d < 1 || g.d > 2) throw std::invalid_argument("GridWave: d must be 1 or 2");
    if (g.N < 4 || (g.N & (g.N - 1)) != 0)
        throw std::invalid_argument("GridWave: N must be a power of two");
    amps_.assign(g.total_points(), cplx{});
}

GridWave GridWave::from_packet(const GridSpec& g, const PacketEvaluator& ev, const MultiIndex& k) {
    GridWave w(g, ev.params().eps, 0.0);
    const auto xs = g.coordinates();
    ev.values_on(xs, k, /*phased=*/true, w.amps_.data());
    return w;
}

double GridWave::norm() const {
    const double cell = std::pow(grid_.dx(), grid_.d);
    return std::sqrt(kernels::ops().abs2_sum(amps_.data(), amps_.size()) * cell);
}

double GridWave::boundary_max_abs() const {
    const int N = grid_.N;
    double m2 = 0.0;
    if (grid_.d == 1) {
        m2 = std::max(std::norm(amps_[0]), std::norm(amps_[static_cast<std::size_t>(N) - 1]));
    } else {
        for (int i = 0; i < N; ++i) {
            for (int idx : {i, (N - 1) * N + i, i * N, i * N + N - 1})
                m2 = std::max(m2, std::norm(amps_[static_cast<std::size_t>(idx)]));
        }
    }
    return std::sqrt(m2);
}

SpectralSnapshot GridWave::spectral() const {
    const int N = grid_.N;
    std::vector<cplx> fft(amps_);
    FftEngine::get(grid_.d, N).forward(fft.data());

    const double scale = 1.0 / static_cast<double>(grid_.total_points());
    std::vector<cplx> sorted(fft.size());
    if (grid_.d == 1) {
        for (int j = -N / 2; j < N / 2; ++j)
            sorted[static_cast<std::size_t>(j + N / 2)] =
                fft[static_cast<std::size_t>(fft_bin_of(j, N))] * scale;
    } else {
        for (int j1 = -N / 2; j1 < N / 2; ++j1)
            for (int j2 = -N / 2; j2 < N / 2; ++j2) {
                const std::size_t dst = static_cast<std::size_t>(j1 + N / 2) * N +
                                        static_cast<std::size_t>(j2 + N / 2);
                const std::size_t src = static_cast<std::size_t>(fft_bin_of(j1, N)) * N +
                                        static_cast<std::size_t>(fft_bin_of(j2, N));
                sorted[dst] = fft[src] * scale;
            }
    }
    return SpectralSnapshot(grid_.d, N, grid_.L, t_, std::move(sorted));
}

double GridWave::momentum_weighted_norm(const RVec& eta, const MultiIndex& alpha) const {
    const int N = grid_.N;
    std::vector<cplx> fft(amps_);
    FftEngine::get(grid_.d, N).forward(fft.data());

    const double dk = std::numbers::pi / grid_.L;
    std::vector<double> w(fft.size());
    for (std::size_t m = 0; m < fft.size(); ++m) {
        double prod = 1.0;
        for (int ax = 0; ax < grid_.d; ++ax) {
            const int bin = (grid_.d == 1) ? static_cast<int>(m)
                                           : (ax == 0 ? static_cast<int>(m) / N
                                                      : static_cast<int>(m) % N);
            const int j = bin < N / 2 ? bin : bin - N;
            const double p = eps_ * dk * j - eta[ax];
            for (int r = 0; r < alpha[ax]; ++r) prod *= p;
        }
        w[m] = prod * prod;
    }
    const double cell = std::pow(grid_.dx(), grid_.d) / static_cast<double>(grid_.total_points());
    return std::sqrt(kernels::ops().weighted_abs2_sum(fft.data(), w.data(), fft.size()) * cell);
}

void GridWave::save(const std::filesystem::path& base) const {
    auto bin = base;
    bin += ".bin";
    auto txt = base;
    txt += ".txt";

    std::ofstream hb_os(txt);
    hb_os << "d " << grid_.d << "\nN " << grid_.N << "\nL ";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", grid_.L);
    hb_os << buf << "\neps ";
    std::snprintf(buf, sizeof buf, "%.17g", eps_);
    hb_os << buf << "\nt ";
    std::snprintf(buf, sizeof buf, "%.17g", t_);
    hb_os << buf << "\nformat interleaved_re_im_f64_le\n";

    std::ofstream os(bin, std::ios::binary);
    os.write(reinterpret_cast<const char*>(amps_.data()),
             static_cast<std::streamsize>(amps_.size() * sizeof(cplx)));
    if (!os) throw NumericalError("snapshot write failed: " + bin.string());
}

GridWave GridWave::load(const std::filesystem::path& base) {
    auto bin = base;
    bin += ".bin";
    auto txt = base;
    txt += ".txt";

    std::ifstream is(txt);
    if (!is) throw NumericalError("snapshot header missing: " + txt.string());
    GridSpec g;
    double eps = 1.0, t = 0.0;
    std::string key;
    while (is >> key) {
        if (key == "d")
            is >> g.d;
        else if (key == "N")
            is >> g.N;
        else if (key == "L")
            is >> g.L;
        else if (key == "eps")
            is >> eps;
        else if (key == "t")
            is >> t;
        else {
            std::string rest;
            is >> rest;
        }
    }
    GridWave w(g, eps, t);
    std::ifstream bs(bin, std::ios::binary);
    if (!bs) throw NumericalError("snapshot payload missing: " + bin.string());
    bs.read(reinterpret_cast<char*>(w.amps_.data()),
            static_cast<std::streamsize>(w.amps_.size() * sizeof(cplx)));
    if (bs.gcount() != static_cast<std::streamsize>(w.amps_.size() * sizeof(cplx)))
        throw NumericalError("snapshot payload truncated: " + bin.string());
    return w;
}

std::size_t WaveSequence::index_at(double t) const {
    const double u = (t - t_begin()) / spacing_;
    const auto i = static_cast<long long>(std::llround(u));
    if (i < 0 || i >= static_cast<long long>(snaps_.size()) ||
        std::abs(u - static_cast<double>(i)) > 1e-6)
        throw std::invalid_argument("requested time is not on the snapshot lattice");
    return static_cast<std::size_t>(i);
}

WaveSequence propagate(const GridWave& psi0, const PotentialModel& V, double T,
                       const PropagateOptions& opt) {
    if (T <= 0.0) throw std::invalid_argument("propagate: horizon must be positive");
    const GridSpec& g = psi0.grid();
    const double eps = psi0.eps();

    double spacing = opt.snapshot_spacing > 0.0
                         ? opt.snapshot_spacing
                         : std::min(0.01, std::sqrt(eps) / 16.0);
    const int n_snaps = std::max(1, static_cast<int>(std::llround(T / spacing)));
    spacing = T / n_snaps;
    const int steps_per_snap = std::max(1, static_cast<int>(std::ceil(spacing / opt.dt_target)));
    const double dt = spacing / steps_per_snap;

    // phase tables; kinetic factor carries the inverse-FFT 1/N^d
    const std::size_t n = g.total_points();
    std::vector<cplx> vhalf(n), kin(n);
    {
        const auto xs = g.coordinates();
        for (std::size_t i = 0; i < n; ++i)
            vhalf[i] = std::polar(1.0, -0.5 * dt * V.value(xs.data() + static_cast<std::size_t>(g.d) * i) / eps);

        const double dk = std::numbers::pi / g.L;
        const double norm = 1.0 / static_cast<double>(n);
        for (std::size_t m = 0; m < n; ++m) {
            double k2 = 0.0;
            for (int ax = 0; ax < g.d; ++ax) {
                const int bin = (g.d == 1) ? static_cast<int>(m)
                                           : (ax == 0 ? static_cast<int>(m) / g.N
                                                      : static_cast<int>(m) % g.N);
                const int j = bin < g.N / 2 ? bin : bin - g.N;
                k2 += (dk * j) * (dk * j);
            }
            kin[m] = std::polar(norm, -0.5 * dt * eps * k2);
        }
    }

    const auto& K = kernels::ops();
    const auto& engine = FftEngine::get(g.d, g.N);
    const double norm0 = psi0.norm();

    WaveSequence seq;
    seq.spacing_ = spacing;
    seq.snaps_.reserve(static_cast<std::size_t>(n_snaps) + 1);
    seq.snaps_.push_back(psi0);

    GridWave cur = psi0;
    for (int s = 1; s <= n_snaps; ++s) {
        for (int q = 0; q < steps_per_snap; ++q) {
            K.cmul_inplace(cur.amps_.data(), vhalf.data(), n);
            engine.forward(cur.amps_.data());
            K.cmul_inplace(cur.amps_.data(), kin.data(), n);
            engine.backward(cur.amps_.data());
            K.cmul_inplace(cur.amps_.data(), vhalf.data(), n);
        }
        cur.t_ = psi0.time() + spacing * s;

        if (cur.boundary_max_abs() > opt.boundary_abort)
            throw NumericalError(
                "propagate: wave reached the box edge; enlarge L (boundary amplitude above limit)");
        if (std::abs(cur.norm() - norm0) > opt.norm_drift_abort)
            throw NumericalError("propagate: L2 norm drift above limit");

        seq.snaps_.push_back(cur);
    }

    seq.spectral_.reserve(seq.snaps_.size());
    for (const auto& w : seq.snaps_) seq.spectral_.push_back(w.spectral());
    return seq;
}

NormComparison compare_norms(const GridWave& w, const PacketEvaluator& ev, const MultiIndex& k) {
    const GridSpec& g = w.grid();
    const auto& K = kernels::ops();
    const auto xs = g.coordinates();
    const std::size_t n = g.total_points();
    const double cell = std::pow(g.dx(), g.d);

    std::vector<cplx> packet(n);
    ev.values_on(xs, k, /*phased=*/true, packet.data());

    NormComparison out;
    out.l2_psi = w.norm();
    out.l2_diff = std::sqrt(K.diff_abs2_sum(w.amplitudes().data(), packet.data(), n) * cell);
    out.linf_diff = std::sqrt(K.max_abs2_diff(w.amplitudes().data(), packet.data(), n));

    // global-phase-aligned sup difference
    cplx inner = 0.0;
    for (std::size_t i = 0; i < n; ++i) inner += std::conj(packet[i]) * w.amplitudes()[i];
    const cplx rot = std::polar(1.0, std::arg(inner));
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        m2 = std::max(m2, std::norm(w.amplitudes()[i] - rot * packet[i]));
    out.phase_aligned_sup = std::sqrt(m2);

    // spectral gradient of psi vs packet gradient, componentwise sup
    std::vector<cplx> fft(w.amplitudes().begin(), w.amplitudes().end());
    FftEngine::get(g.d, g.N).forward(fft.data());
    const double dk = std::numbers::pi / g.L;
    std::vector<cplx> gpsi(n), gpacket(n), spec(n);
    double grad_m2 = 0.0;
    for (int ax = 0; ax < g.d; ++ax) {
        for (std::size_t m = 0; m < n; ++m) {
            const int bin = (g.d == 1) ? static_cast<int>(m)
                                       : (ax == 0 ? static_cast<int>(m) / g.N
                                                  : static_cast<int>(m) % g.N);
            int j = bin < g.N / 2 ? bin : bin - g.N;
            if (j == -g.N / 2) j = 0;  // drop the unmatched Nyquist line
            spec[m] = fft[m] * cplx(0.0, dk * j) / static_cast<double>(n);
        }
        FftEngine::get(g.d, g.N).backward(spec.data());
        gpsi = spec;
        ev.gradient_on(xs, k, ax, /*phased=*/true, gpacket.data());
        grad_m2 = std::max(grad_m2, K.max_abs2_diff(gpsi.data(), gpacket.data(), n));
    }
    out.linf_grad_diff = std::sqrt(grad_m2);
    return out;
}

}  // namespace hb
