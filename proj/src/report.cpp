#include <json.hpp>

#include <fstream>

#include "hb/errors.hpp"
#include "hb/experiment.hpp"
#include "hb/kernels.hpp"

namespace hb {
namespace {

using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json packet_json(const PacketParams& p, const MultiIndex& k) {
    json j;
    j["eps"] = p.eps;
    j["a"] = std::vector<double>(p.a.data(), p.a.data() + p.a.size());
    j["eta"] = std::vector<double>(p.eta.data(), p.eta.data() + p.eta.size());
    std::vector<double> re_a, im_a, re_b, im_b;
    const int d = p.dim();
    for (int i = 0; i < d; ++i)
        for (int c = 0; c < d; ++c) {
            re_a.push_back(p.A(i, c).real());
            im_a.push_back(p.A(i, c).imag());
            re_b.push_back(p.B(i, c).real());
            im_b.push_back(p.B(i, c).imag());
        }
    j["re_A"] = re_a;
    j["im_A"] = im_a;
    j["re_B"] = re_b;
    j["im_B"] = im_b;
    j["S"] = p.S;
    j["k"] = std::vector<int>{k[0], k[1], k[2]};
    return j;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw NumericalError("cannot write output file: " + p.string());
    return os;
}

}  // namespace

void write_report_files(const ExperimentResult& res, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const ExperimentConfig& cfg = res.config;

    // ---- report.json ----
    json root;
    root["provenance"]["tool"] = "hb";
    root["provenance"]["version"] = kVersion;
    root["provenance"]["config_hash"] = cfg.config_hash;
    root["provenance"]["seed"] = cfg.seed;
    root["provenance"]["kernel_isa"] = kernels::ops().name;
    root["provenance"]["config_text"] = cfg.raw_text;
    root["potential"] = cfg.potential;
    root["potential_gv"]["cv"] = res.gv.cv;
    root["potential_gv"]["max_sampled"] = res.gv.max_overall;
    root["potential_gv"]["pass"] = res.gv.pass;
    root["potential_gv"]["box_half_width"] = res.gv_box;
    root["backend"] = cfg.backend;
    root["dimension"] = cfg.dimension;
    root["k"] = std::vector<int>{cfg.k[0], cfg.k[1], cfg.k[2]};
    root["T"] = cfg.T;
    root["paths"] = cfg.paths;
    root["R"] = cfg.R;
    root["delta_t"] = cfg.delta_t;
    root["warnings"] = res.warnings;

    json runs = json::array();
    for (const auto& per : res.per_eps) {
        json r;
        r["eps"] = per.eps;
        r["packet_initial"] = packet_json(per.packet_initial, cfg.k);
        r["packet_final"] = packet_json(per.packet_final, cfg.k);
        r["paths_total"] = per.ensemble.size();
        r["paths_aborted"] = per.ensemble.abort_count();
        r["q50_max_dev"] = per.q50_dev;
        r["q95_max_dev"] = per.q95_dev;
        r["node_amp_q05"] = per.node_q05;
        r["node_amp_q50"] = per.node_q50;

        json cov = json::array();
        for (std::size_t i = 0; i < cfg.R.size(); ++i) {
            json c;
            c["R"] = cfg.R[i];
            c["coverage"] = per.deviation[i].probability;
            c["sigma"] = per.deviation[i].sigma;
            c["vdev_good_max"] = per.vdev_good_max[i];
            c["avg_vdev_good_max"] = per.avg_vdev_good_max[i];
            if (!per.flux.empty()) {
                c["tail"] = per.flux[i].tail;
                c["flux"] = per.flux[i].flux;
                c["bound"] = per.flux[i].bound();
            }
            cov.push_back(c);
        }
        r["radii"] = cov;

        if (per.has_grid) {
            r["grid"]["N"] = per.grid.N;
            r["grid"]["L"] = per.grid.L;
            r["grid"]["dt"] = per.grid.dt;
            r["l2_diff"] = per.l2_diff;
            r["linf_diff"] = per.linf_diff;
            r["linf_grad_diff"] = per.linf_grad_diff;
            r["phase_aligned_sup"] = per.phase_aligned_sup;
            r["momentum_norm_1"] = per.momentum_norm_1;
            r["momentum_norm_2"] = per.momentum_norm_2;
        }
        if (cfg.remainder_m > 0) r["remainder_norm"] = per.remainder;
        if (per.has_chi2) {
            r["chi2"]["statistic"] = per.chi2.statistic;
            r["chi2"]["dof"] = per.chi2.dof;
            r["chi2"]["p_value"] = per.chi2.p_value;
            r["chi2"]["used_paths"] = per.chi2.used_paths;
        }
        runs.push_back(r);
    }
    root["runs"] = runs;

    json fits;
    for (const auto& [name, fit] : res.fits) {
        fits[name]["slope"] = fit.slope;
        fits[name]["ci95"] = fit.ci95;
        fits[name]["intercept"] = fit.intercept;
    }
    root["fits"] = fits;

    open_out(dir / "report.json") << root.dump(2) << "\n";

    // ---- paths.csv: one row per path ----
    {
        auto os = open_out(dir / "paths.csv");
        os << "eps,path_id";
        for (int j = 0; j < cfg.dimension; ++j) os << ",x0_" << j;
        for (int j = 0; j < cfg.dimension; ++j) os << ",qT_" << j;
        os << ",status,abort_time,max_dev,max_vdev,max_avg_vdev,min_scaled_amp\n";
        for (const auto& per : res.per_eps) {
            for (std::size_t i = 0; i < per.ensemble.paths.size(); ++i) {
                const auto& s = per.ensemble.paths[i];
                os << fmt17(per.eps) << ',' << i;
                for (int j = 0; j < cfg.dimension; ++j) os << ',' << fmt17(s.x0[j]);
                for (int j = 0; j < cfg.dimension; ++j)
                    os << ',' << (s.q_final.size() ? fmt17(s.q_final[j]) : "nan");
                os << ',' << (s.completed ? "completed" : "node_abort") << ','
                   << fmt17(s.abort_time) << ',' << fmt17(s.max_dev) << ',' << fmt17(s.max_vdev)
                   << ',' << fmt17(s.max_avg_vdev) << ',' << fmt17(s.min_scaled_amp) << '\n';
            }
        }
    }

    // ---- sweep.csv: one row per eps, slope rows in the footer ----
    {
        auto os = open_out(dir / "sweep.csv");
        os << "eps,q50_max_dev,q95_max_dev";
        for (double r : cfg.R) os << ",coverage@R=" << r;
        os << ",l2_diff,linf_diff,linf_grad_diff,remainder_norm,node_amp_q05,aborted\n";
        for (const auto& per : res.per_eps) {
            os << fmt17(per.eps) << ',' << fmt17(per.q50_dev) << ',' << fmt17(per.q95_dev);
            for (std::size_t i = 0; i < cfg.R.size(); ++i)
                os << ',' << fmt17(per.deviation[i].probability);
            os << ',' << fmt17(per.l2_diff) << ',' << fmt17(per.linf_diff) << ','
               << fmt17(per.linf_grad_diff) << ',' << fmt17(per.remainder) << ','
               << fmt17(per.node_q05) << ',' << per.ensemble.abort_count() << '\n';
        }
        for (const auto& [name, fit] : res.fits)
            os << "slope:" << name << ',' << fmt17(fit.slope) << ',' << fmt17(fit.ci95) << '\n';
    }

    // ---- bounds.csv: one row per (eps, R) ----
    {
        auto os = open_out(dir / "bounds.csv");
        os << "eps,R,tail,flux,bound,empirical_exit,exit_sigma\n";
        for (const auto& per : res.per_eps) {
            for (std::size_t i = 0; i < cfg.R.size(); ++i) {
                const double exit_p = 1.0 - per.deviation[i].probability;
                os << fmt17(per.eps) << ',' << fmt17(cfg.R[i]) << ',';
                if (!per.flux.empty())
                    os << fmt17(per.flux[i].tail) << ',' << fmt17(per.flux[i].flux) << ','
                       << fmt17(per.flux[i].bound());
                else
                    os << ",,";
                os << ',' << fmt17(exit_p) << ',' << fmt17(per.deviation[i].sigma) << '\n';
            }
        }
    }

    // ---- optional dumps ----
    for (std::size_t ei = 0; ei < res.per_eps.size(); ++ei) {
        const auto& per = res.per_eps[ei];
        const std::string tag = "eps" + std::to_string(ei);
        if (!per.classical_csv.empty())
            open_out(dir / ("classical_" + tag + ".csv")) << per.classical_csv;
        if (per.final_wave_dump) per.final_wave_dump->save(dir / ("wave_" + tag));
        if (!per.exported_paths.empty()) {
            auto os = open_out(dir / ("path_samples_" + tag + ".csv"));
            os << "path_id,t";
            for (int j = 0; j < cfg.dimension; ++j) os << ",q" << j;
            for (int j = 0; j < cfg.dimension; ++j) os << ",v" << j;
            os << ",scaled_amp,status\n";
            for (std::size_t pi = 0; pi < per.exported_paths.size(); ++pi) {
                const auto& path = per.exported_paths[pi];
                const char* status = path.completed() ? "completed" : "node_abort";
                for (const auto& ps : path.samples) {
                    os << pi << ',' << fmt17(ps.t);
                    for (int j = 0; j < cfg.dimension; ++j) os << ',' << fmt17(ps.q[j]);
                    for (int j = 0; j < cfg.dimension; ++j) os << ',' << fmt17(ps.v[j]);
                    os << ',' << fmt17(ps.scaled_amp) << ',' << status << '\n';
                }
            }
        }
    }
}

}  // namespace hb
