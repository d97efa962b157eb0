#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hb/ensemble_stats.hpp"
#include "hb/reference_solver.hpp"

namespace hb {

// Flat key = value experiment description with a typed schema; every field
// except `potential` and `eps` has a default. Unknown keys, bad types and
// broken invariants raise SchemaError.
struct ExperimentConfig {
    std::string potential;           // id[:coefs] [+ id:coefs ...]
    std::vector<double> eps;         // required, nonempty, positive
    int dimension = 1;
    MultiIndex k;
    double T = 2.0;
    int paths = 2000;
    std::vector<double> R = {1, 2, 3, 4, 5};
    double delta_t = 0.25;
    std::string backend = "exact";   // exact | semiclassical
    std::uint64_t seed = 1;
    std::vector<double> a0 = {0.0};  // scalar broadcasts to all axes
    std::vector<double> eta0 = {0.0};
    double ode_tol = 1e-10;
    double path_tol = 1e-6;
    double node_floor = 1e-6;
    int grid_n = 0;       // 0 = auto
    double grid_l = 0.0;  // 0 = auto
    double grid_dt = 5e-4;
    double snapshot_spacing = 0.0;  // 0 = auto
    int mesh_points = 400;
    bool flux = true;
    int remainder_m = 3;  // 0 disables
    double quantile = 0.95;
    bool dump_final_wave = false;
    bool dump_classical = false;
    int dump_path_samples = 0;
    int workers = 0;  // 0 = hardware concurrency (HB_WORKERS overrides)
    std::string out = "out";

    std::string raw_text;     // exact text for reproduction
    std::string config_hash;  // fnv1a-64 of raw_text, hex

    static ExperimentConfig parse_file(const std::filesystem::path& path);
    static ExperimentConfig parse_text(const std::string& text);
    void validate() const;

    RVec a0_vec() const;
    RVec eta0_vec() const;
};

struct PerEpsResult {
    double eps = 0.0;
    EnsembleResult ensemble;
    std::vector<DeviationStat> deviation;       // aligned with config R
    std::vector<FluxBound> flux;                // empty when disabled
    std::vector<double> vdev_good_max;          // per R: max of max_vdev on the good set
    std::vector<double> avg_vdev_good_max;      // per R: same for the windowed statistic
    double q50_dev = 0.0, q95_dev = 0.0;
    double node_q05 = 0.0, node_q50 = 0.0;

    bool has_grid = false;
    GridSpec grid;
    double l2_diff = 0.0, linf_diff = 0.0, linf_grad_diff = 0.0, phase_aligned_sup = 0.0;
    double momentum_norm_1 = 0.0, momentum_norm_2 = 0.0;  // ||(p-eta)^alpha psi(T)||, |alpha|=1,2

    double remainder = 0.0;  // max over sample times of ||V_m Phi_k||_2

    bool has_chi2 = false;
    Chi2Result chi2;

    PacketParams packet_initial, packet_final;
    double wave_seconds = 0.0, paths_seconds = 0.0;

    // retained raw paths for the optional sample export
    std::vector<BohmianPath> exported_paths;
    // retained only when the config asks for the dumps
    std::optional<GridWave> final_wave_dump;
    std::string classical_csv;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<PerEpsResult> per_eps;
    std::map<std::string, RateFit> fits;  // present when >= 4 eps points
    std::vector<std::string> warnings;
    PotentialModel::GvReport gv;  // boundedness report on the experiment box
    double gv_box = 0.0;
};

// Full pipeline for one config: flow, backend, ensemble, statistics, sweeps.
// `log` receives one-line progress notes (pass std::cerr or a null stream).
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log);

// report.json, paths.csv, sweep.csv, bounds.csv (+ optional dumps) under dir.
void write_report_files(const ExperimentResult& res, const std::filesystem::path& dir);

std::string fnv1a_hex(const std::string& text);

}  // namespace hb
