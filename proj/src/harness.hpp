#ifndef MBNLS_HARNESS_HPP
#define MBNLS_HARNESS_HPP

#include "evolution.hpp"
#include "uniqueness.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mbnls {

enum class ExperimentKind { Construct, Pair, Cauchy, Sweep };
const char* experiment_name(ExperimentKind k);

struct GridConfig {
    double extent = 16.0;
    int points = 2048;
};

struct BubbleAnchorConfig {
    double omega = 1.0;
    Vec2 x{0.0, 0.0};
    double vartheta = 0.0;
};

struct NoiseRunConfig {
    bool enabled = false;
    int modes = 2;
    int nu_star = 5;
    double amplitude = 0.01;
    double envelope = 2.5;
    double factor_scale = 4.0;
    std::uint64_t seed = 1;
    double dt_noise = 2.5e-5;
};

struct ControllerConfig {
    double dt_base = 1e-4;
    double c_dt = 0.02;
    int checkpoints = 33;
    bool energy_trace = false;
};

struct PairExperimentConfig {
    std::string kind = "param_jitter"; // or "additive"
    double rel_size = 1e-3;
};

struct SweepConfig {
    int seeds = 3;
    int workers = 1;
};

struct RunConfig {
    ExperimentKind kind = ExperimentKind::Construct;
    int dim = 1;
    GridConfig grid;
    double T = 1.0;
    std::vector<double> t_n{0.75}; // several entries for cauchy
    double t_end = 0.0;
    std::vector<BubbleAnchorConfig> bubbles{{}};
    NoiseRunConfig noise;
    ControllerConfig controller;
    PairExperimentConfig pair;
    SweepConfig sweep;
    std::string cache_dir = "mbnls_cache";
    bool overlap_diag = true;

    std::string case_label; // filled by validate(): Case (I) / Case (II)
};

RunConfig parse_config(const std::string& yaml_text);
RunConfig load_config_file(const std::string& path);
std::string emit_config(const RunConfig& cfg); // canonical text, round-trip stable

// Throws ValidationError naming the offending field; records the Case label
// and returns warnings (e.g. nu_star below the flatness order the
// multi-bubble estimates assume).
std::vector<std::string> validate(RunConfig& cfg);

struct RunRecord {
    std::string dir;
    RunStatus status = RunStatus::Completed;
    int checkpoints_recorded = 0;
    std::string summary; // key = value lines, also persisted
};

RunRecord run(const RunConfig& cfg, const std::string& out_dir);

std::string report(const std::vector<std::string>& run_dirs);

// Kernel identities + conservation + decomposition basin + box sensitivity.
// dim = 0 runs both dimensions. Returns the report; ok=false on any FAIL.
std::string selftest(int dim, bool* ok);

// Checkpoint container format (see README): per checkpoint
//   f64 t | u32 dim | u32 N | f64 L | 2*N^d f64 interleaved re/im,
// with a text index "i t offset bytes" per line.
void write_checkpoints(const std::string& dir, const Trajectory& tr);
std::vector<std::pair<double, Field>> read_checkpoints(const std::string& dir);

std::string format17(double v);

} // namespace mbnls

#endif
