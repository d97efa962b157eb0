#include "hb/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "hb/errors.hpp"

namespace hb {
namespace {

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto b = tok.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = tok.find_last_not_of(" \t");
        tok = tok.substr(b, e - b + 1);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw SchemaError("config key '" + key + "': bad number '" + tok + "'");
        }
    }
    return out;
}

double parse_double(const std::string& v, const std::string& key) {
    const auto list = parse_double_list(v, key);
    if (list.size() != 1) throw SchemaError("config key '" + key + "': expected one number");
    return list[0];
}

long parse_int(const std::string& v, const std::string& key) {
    const double d = parse_double(v, key);
    if (d != std::floor(d)) throw SchemaError("config key '" + key + "': expected an integer");
    return static_cast<long>(d);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw SchemaError("config key '" + key + "': expected true/false");
}

int env_workers() {
    if (const char* e = std::getenv("HB_WORKERS")) {
        const int w = std::atoi(e);
        if (w > 0) return w;
    }
    return 0;
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig ExperimentConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw SchemaError("cannot read config file: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_text(ss.str());
}

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
    ExperimentConfig c;
    c.raw_text = text;
    c.config_hash = fnv1a_hex(text);

    bool saw_potential = false, saw_eps = false;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw SchemaError("config line " + std::to_string(lineno) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto x = s.find_first_not_of(" \t\r");
            const auto y = s.find_last_not_of(" \t\r");
            return x == std::string::npos ? std::string{} : s.substr(x, y - x + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw SchemaError("config line " + std::to_string(lineno) + ": empty key or value");

        if (key == "potential") {
            c.potential = val;
            saw_potential = true;
        } else if (key == "eps") {
            c.eps = parse_double_list(val, key);
            saw_eps = true;
        } else if (key == "dimension") {
            c.dimension = static_cast<int>(parse_int(val, key));
        } else if (key == "k") {
            const auto ks = parse_double_list(val, key);
            if (ks.empty() || ks.size() > 3) throw SchemaError("config key 'k': 1..3 entries");
            for (std::size_t i = 0; i < ks.size(); ++i) {
                if (ks[i] < 0 || ks[i] != std::floor(ks[i]))
                    throw SchemaError("config key 'k': nonnegative integers required");
                c.k[static_cast<int>(i)] = static_cast<int>(ks[i]);
            }
        } else if (key == "T") {
            c.T = parse_double(val, key);
        } else if (key == "paths") {
            c.paths = static_cast<int>(parse_int(val, key));
        } else if (key == "R") {
            c.R = parse_double_list(val, key);
        } else if (key == "delta_t") {
            c.delta_t = parse_double(val, key);
        } else if (key == "backend") {
            c.backend = val;
        } else if (key == "seed") {
            const long s = parse_int(val, key);
            if (s < 0) throw SchemaError("config key 'seed': must be nonnegative");
            c.seed = static_cast<std::uint64_t>(s);
        } else if (key == "a0") {
            c.a0 = parse_double_list(val, key);
        } else if (key == "eta0") {
            c.eta0 = parse_double_list(val, key);
        } else if (key == "ode_tol") {
            c.ode_tol = parse_double(val, key);
        } else if (key == "path_tol") {
            c.path_tol = parse_double(val, key);
        } else if (key == "node_floor") {
            c.node_floor = parse_double(val, key);
        } else if (key == "grid_n") {
            c.grid_n = static_cast<int>(parse_int(val, key));
        } else if (key == "grid_l") {
            c.grid_l = parse_double(val, key);
        } else if (key == "grid_dt") {
            c.grid_dt = parse_double(val, key);
        } else if (key == "snapshot_spacing") {
            c.snapshot_spacing = parse_double(val, key);
        } else if (key == "mesh_points") {
            c.mesh_points = static_cast<int>(parse_int(val, key));
        } else if (key == "flux") {
            c.flux = parse_bool(val, key);
        } else if (key == "remainder_m") {
            c.remainder_m = static_cast<int>(parse_int(val, key));
        } else if (key == "quantile") {
            c.quantile = parse_double(val, key);
        } else if (key == "dump_final_wave") {
            c.dump_final_wave = parse_bool(val, key);
        } else if (key == "dump_classical") {
            c.dump_classical = parse_bool(val, key);
        } else if (key == "dump_path_samples") {
            c.dump_path_samples = static_cast<int>(parse_int(val, key));
        } else if (key == "workers") {
            c.workers = static_cast<int>(parse_int(val, key));
        } else if (key == "out") {
            c.out = val;
        } else {
            throw SchemaError("unknown config key '" + key + "'");
        }
    }
    if (!saw_potential) throw SchemaError("config is missing required key 'potential'");
    if (!saw_eps) throw SchemaError("config is missing required key 'eps'");
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    if (dimension < 1 || dimension > 3) throw SchemaError("dimension must be 1, 2 or 3");
    if (eps.empty()) throw SchemaError("eps list must be nonempty");
    for (double e : eps)
        if (!(e > 0.0)) throw SchemaError("eps values must be positive");
    if (!(T > 0.0)) throw SchemaError("T must be positive");
    if (paths < 1) throw SchemaError("paths must be >= 1");
    if (R.empty()) throw SchemaError("R list must be nonempty");
    for (double r : R)
        if (r < 0.0) throw SchemaError("R values must be nonnegative");
    if (!(delta_t > 0.0) || delta_t > T / 2.0)
        throw SchemaError("delta_t must satisfy 0 < delta_t <= T/2");
    if (backend != "exact" && backend != "semiclassical")
        throw SchemaError("backend must be 'exact' or 'semiclassical'");
    if (backend == "exact" && dimension > 2)
        throw SchemaError("exact backend requires dimension <= 2");
    if (a0.size() != 1 && a0.size() != static_cast<std::size_t>(dimension))
        throw SchemaError("a0 needs 1 or d entries");
    if (eta0.size() != 1 && eta0.size() != static_cast<std::size_t>(dimension))
        throw SchemaError("eta0 needs 1 or d entries");
    if (!(ode_tol > 0.0) || !(path_tol > 0.0)) throw SchemaError("tolerances must be positive");
    if (!(node_floor > 0.0)) throw SchemaError("node_floor must be positive");
    if (mesh_points < 8) throw SchemaError("mesh_points must be >= 8");
    if (quantile <= 0.0 || quantile >= 1.0) throw SchemaError("quantile must be in (0,1)");
    if (k.order() > PacketEvaluator::kDefaultKMax)
        throw SchemaError("|k| above the supported ladder depth");
    for (int j = dimension; j < 3; ++j)
        if (k[j] != 0) throw SchemaError("k has entries beyond the configured dimension");
    (void)PotentialModel::parse(potential, dimension);  // throws on bad spec
}

RVec ExperimentConfig::a0_vec() const {
    RVec v = RVec::Zero(dimension);
    for (int j = 0; j < dimension; ++j)
        v[j] = a0.size() == 1 ? a0[0] : a0[static_cast<std::size_t>(j)];
    return v;
}

RVec ExperimentConfig::eta0_vec() const {
    RVec v = RVec::Zero(dimension);
    for (int j = 0; j < dimension; ++j)
        v[j] = eta0.size() == 1 ? eta0[0] : eta0[static_cast<std::size_t>(j)];
    return v;
}

namespace {

// index-slotted worker pool; identical results for any worker count
template <typename Fn>
void parallel_for(int workers, std::size_t n, Fn&& fn) {
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - f) + v[hi] * f;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    ExperimentResult result;
    result.config = cfg;

    const PotentialModel V = PotentialModel::parse(cfg.potential, cfg.dimension);
    const int d = cfg.dimension;

    int workers = cfg.workers > 0 ? cfg.workers : env_workers();
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;

    // boundedness report for the record; unbounded families are allowed and
    // merely flagged
    {
        result.gv_box = 10.0;
        double lo[3], hi[3];
        for (int j = 0; j < d; ++j) {
            lo[j] = -result.gv_box;
            hi[j] = result.gv_box;
        }
        result.gv = V.check_gv(lo, hi, d == 3 ? 41 : (d == 2 ? 201 : 4001));
        if (!result.gv.pass)
            result.warnings.push_back("potential exceeds its declared derivative bound C_V = " +
                                      std::to_string(result.gv.cv) + " on the check box");
    }

    for (std::size_t ei = 0; ei < cfg.eps.size(); ++ei) {
        const double eps = cfg.eps[ei];
        log << "[hb] eps=" << eps << " flow+backend..." << std::endl;

        PerEpsResult per;
        per.eps = eps;

        ClassicalState init = ClassicalState::standard(d);
        init.a = cfg.a0_vec();
        init.eta = cfg.eta0_vec();
        const ClassicalTrajectory cl = integrate_flow(init, V, cfg.T, cfg.ode_tol);

        per.packet_initial = cl.packet_at(0.0, eps);
        per.packet_final = cl.packet_at(cfg.T, eps);

        const auto t_wave0 = std::chrono::steady_clock::now();
        std::shared_ptr<const WaveSequence> seq;
        std::unique_ptr<WaveBackend> backend;
        if (cfg.backend == "exact") {
            per.grid = GridSpec::auto_for(cl, eps, cfg.k.order(), cfg.grid_dt, cfg.grid_n,
                                          cfg.grid_l);
            per.has_grid = true;
            const PacketEvaluator ev0(per.packet_initial, cfg.k.order());
            const GridWave psi0 = GridWave::from_packet(per.grid, ev0, cfg.k);
            PropagateOptions popt;
            popt.dt_target = cfg.grid_dt;
            popt.snapshot_spacing = cfg.snapshot_spacing;
            seq = std::make_shared<const WaveSequence>(propagate(psi0, V, cfg.T, popt));
            backend = std::make_unique<ExactBackend>(seq, cfg.node_floor);

            // wave-vs-packet distances, max over a dense set of snapshot times
            const int n_compare = 32;
            for (int ci = 1; ci <= n_compare; ++ci) {
                const std::size_t si = std::min(
                    seq->size() - 1,
                    static_cast<std::size_t>(std::llround(
                        static_cast<double>(ci) / n_compare * (seq->size() - 1.0))));
                const GridWave& w = seq->wave(si);
                const PacketEvaluator evt(cl.packet_at(w.time(), eps), cfg.k.order());
                const NormComparison nc = compare_norms(w, evt, cfg.k);
                per.l2_diff = std::max(per.l2_diff, nc.l2_diff);
                per.linf_diff = std::max(per.linf_diff, nc.linf_diff);
                per.linf_grad_diff = std::max(per.linf_grad_diff, nc.linf_grad_diff);
                per.phase_aligned_sup = std::max(per.phase_aligned_sup, nc.phase_aligned_sup);
            }
            const ClassicalState sT = cl.at(cfg.T);
            MultiIndex a1, a2;
            a1[0] = 1;
            a2[0] = 2;
            per.momentum_norm_1 = seq->final_wave().momentum_weighted_norm(sT.eta, a1);
            per.momentum_norm_2 = seq->final_wave().momentum_weighted_norm(sT.eta, a2);
        } else {
            backend = std::make_unique<SemiclassicalBackend>(cl, eps, cfg.k, cfg.node_floor);
        }
        per.wave_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_wave0).count();

        // Born ensemble
        const PacketEvaluator ev0(per.packet_initial, cfg.k.order());
        const auto x0s = born_sample(ev0, cfg.k, static_cast<std::size_t>(cfg.paths),
                                     cfg.seed + 1000003ull * ei);

        log << "[hb] eps=" << eps << " integrating " << x0s.size() << " paths on " << workers
            << " worker(s)..." << std::endl;
        const auto t_paths0 = std::chrono::steady_clock::now();

        PathOptions popt;
        popt.tol = cfg.path_tol;
        popt.mesh_points = cfg.mesh_points;

        std::vector<PathSummary> summaries(x0s.size());
        std::vector<BohmianPath> kept(static_cast<std::size_t>(
            std::min<std::size_t>(x0s.size(), static_cast<std::size_t>(std::max(0, cfg.dump_path_samples)))));
        parallel_for(workers, x0s.size(), [&](std::size_t i) {
            BohmianPath path = integrate_path(*backend, x0s[i].data(), cfg.T, popt);
            summaries[i] = summarize_path(path, cl, cfg.delta_t);
            if (i < kept.size()) kept[i] = std::move(path);
        });
        per.paths_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_paths0).count();
        log << "[hb] eps=" << eps << " wave " << per.wave_seconds << " s, paths "
            << per.paths_seconds << " s" << std::endl;
        per.exported_paths = std::move(kept);

        per.ensemble.eps = eps;
        per.ensemble.k = cfg.k;
        per.ensemble.seed = cfg.seed;
        per.ensemble.delta_t = cfg.delta_t;
        per.ensemble.paths = std::move(summaries);

        // reductions
        std::vector<double> devs;
        for (const auto& s : per.ensemble.paths)
            if (s.completed) devs.push_back(s.max_dev);
        per.q50_dev = quantile_of(devs, 0.5);
        per.q95_dev = quantile_of(devs, cfg.quantile);
        per.node_q05 = node_proximity_quantile(per.ensemble, 0.05);
        per.node_q50 = node_proximity_quantile(per.ensemble, 0.5);

        const double se = std::sqrt(eps);
        for (const double R : cfg.R) {
            per.deviation.push_back(deviation_stat(per.ensemble, R));
            double vmax = 0.0, amax = 0.0;
            for (const auto& s : per.ensemble.paths) {
                if (!s.completed || s.max_dev > R * se) continue;
                vmax = std::max(vmax, s.max_vdev);
                amax = std::max(amax, s.max_avg_vdev);
            }
            per.vdev_good_max.push_back(vmax);
            per.avg_vdev_good_max.push_back(amax);
        }

        if (cfg.flux) {
            log << "[hb] eps=" << eps << " flux bounds..." << std::endl;
            for (const double R : cfg.R)
                per.flux.push_back(flux_bound(cl, eps, cfg.k, R, cfg.T));
        }

        if (cfg.remainder_m > 0) {
            double rmax = 0.0;
            for (int i = 1; i <= 5; ++i) {
                const double t = cfg.T * i / 5.0;
                const PacketEvaluator evt(cl.packet_at(t, eps), cfg.k.order());
                rmax = std::max(rmax, remainder_norm(evt, cfg.k, V, cfg.remainder_m));
            }
            per.remainder = rmax;
        }

        if (per.has_grid && d == 1 && cfg.paths >= 200) {
            try {
                per.chi2 = equivariance_chi2(per.ensemble.paths, seq->final_wave());
                per.has_chi2 = true;
            } catch (const std::exception& e) {
                result.warnings.push_back(std::string("chi2 skipped at eps=") +
                                          std::to_string(eps) + ": " + e.what());
            }
        }

        if (cfg.dump_classical) {
            std::ostringstream os;
            cl.write_csv(os);
            per.classical_csv = os.str();
        }
        if (cfg.dump_final_wave && seq) per.final_wave_dump = seq->final_wave();

        result.per_eps.push_back(std::move(per));
    }

    // sweep fits
    if (cfg.eps.size() >= 4) {
        std::vector<double> e(cfg.eps.begin(), cfg.eps.end());
        auto fit_of = [&](const char* name, auto getter) {
            std::vector<double> v;
            for (const auto& per : result.per_eps) v.push_back(getter(per));
            if (std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; }))
                result.fits[name] = rate_fit(e, v);
        };
        fit_of("q95_dev", [](const PerEpsResult& p) { return p.q95_dev; });
        if (result.per_eps.front().has_grid) {
            fit_of("l2_diff", [](const PerEpsResult& p) { return p.l2_diff; });
            fit_of("linf_diff", [](const PerEpsResult& p) { return p.linf_diff; });
            fit_of("linf_grad_diff", [](const PerEpsResult& p) { return p.linf_grad_diff; });
        }
        if (cfg.remainder_m > 0)
            fit_of("remainder", [](const PerEpsResult& p) { return p.remainder; });
    } else {
        result.warnings.push_back("fewer than 4 eps points: slope fits omitted");
    }
    return result;
}

}  // namespace hb
