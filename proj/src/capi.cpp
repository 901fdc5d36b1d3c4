#include "mbnls.h"

#include "errors.hpp"
#include "harness.hpp"

#include <cstring>
#include <sstream>
#include <string>
#include <vector>

using namespace mbnls;

struct mbnls_config {
    RunConfig cfg;
};

struct mbnls_run {
    RunRecord rec;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

int set_error(int code, const char* what) {
    g_last_error = what ? what : "";
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        return set_error(MBNLS_ERR_VALIDATION, e.what());
    } catch (const DivergedError& e) {
        return set_error(MBNLS_ERR_DIVERGED, e.what());
    } catch (const ResolutionError& e) {
        return set_error(MBNLS_ERR_RESOLUTION_STOP, e.what());
    } catch (const std::exception& e) {
        return set_error(MBNLS_ERR_INTERNAL, e.what());
    }
}

int apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto as_d = [&]() { return std::stod(value); };
    auto as_i = [&]() { return std::stoi(value); };
    if (key == "experiment") {
        if (value == "construct")
            cfg.kind = ExperimentKind::Construct;
        else if (value == "pair")
            cfg.kind = ExperimentKind::Pair;
        else if (value == "cauchy")
            cfg.kind = ExperimentKind::Cauchy;
        else if (value == "sweep")
            cfg.kind = ExperimentKind::Sweep;
        else
            throw ValidationError("unknown experiment kind: " + value);
    } else if (key == "dim")
        cfg.dim = as_i();
    else if (key == "noise.seed")
        cfg.noise.seed = std::stoull(value);
    else if (key == "noise.enabled")
        cfg.noise.enabled = (value == "true" || value == "1");
    else if (key == "noise.amplitude")
        cfg.noise.amplitude = as_d();
    else if (key == "noise.modes")
        cfg.noise.modes = as_i();
    else if (key == "noise.nu_star")
        cfg.noise.nu_star = as_i();
    else if (key == "noise.dt_noise")
        cfg.noise.dt_noise = as_d();
    else if (key == "controller.checkpoints")
        cfg.controller.checkpoints = as_i();
    else if (key == "controller.dt_base")
        cfg.controller.dt_base = as_d();
    else if (key == "controller.c_dt")
        cfg.controller.c_dt = as_d();
    else if (key == "controller.energy_trace")
        cfg.controller.energy_trace = (value == "true" || value == "1");
    else if (key == "T")
        cfg.T = as_d();
    else if (key == "t_end")
        cfg.t_end = as_d();
    else if (key == "t_n") {
        cfg.t_n.clear();
        std::string v = value;
        for (char& ch : v)
            if (ch == ',' || ch == '[' || ch == ']') ch = ' ';
        std::istringstream is(v);
        double x;
        while (is >> x) cfg.t_n.push_back(x);
        if (cfg.t_n.empty())
            throw ValidationError("override t_n: no values parsed");
    } else if (key == "grid.points")
        cfg.grid.points = as_i();
    else if (key == "grid.extent")
        cfg.grid.extent = as_d();
    else if (key == "sweep.seeds")
        cfg.sweep.seeds = as_i();
    else if (key == "sweep.workers")
        cfg.sweep.workers = as_i();
    else if (key == "pair.rel_size")
        cfg.pair.rel_size = as_d();
    else if (key == "pair.kind")
        cfg.pair.kind = value;
    else if (key == "cache_dir")
        cfg.cache_dir = value;
    else
        throw ValidationError("unknown override key: " + key);
    return MBNLS_OK;
}

} // namespace

extern "C" {

const char* mbnls_version(void) { return "1.0.0"; }

const char* mbnls_last_error(void) { return g_last_error.c_str(); }

int mbnls_config_parse(const char* yaml_text, mbnls_config** out) {
    if (!yaml_text || !out) return set_error(MBNLS_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> int {
        auto* h = new mbnls_config{parse_config(yaml_text)};
        *out = h;
        return MBNLS_OK;
    });
}

int mbnls_config_load(const char* path, mbnls_config** out) {
    if (!path || !out) return set_error(MBNLS_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> int {
        auto* h = new mbnls_config{load_config_file(path)};
        *out = h;
        return MBNLS_OK;
    });
}

int mbnls_config_override(mbnls_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value)
        return set_error(MBNLS_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> int { return apply_override(cfg->cfg, key, value); });
}

int mbnls_config_emit(const mbnls_config* cfg, char** out_text) {
    if (!cfg || !out_text) return set_error(MBNLS_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> int {
        *out_text = dup_string(emit_config(cfg->cfg));
        return MBNLS_OK;
    });
}

int mbnls_run_execute(const mbnls_config* cfg, const char* out_dir, mbnls_run** out) {
    if (!cfg || !out_dir || !out)
        return set_error(MBNLS_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> int {
        RunRecord rec = run(cfg->cfg, out_dir);
        auto* h = new mbnls_run{std::move(rec)};
        *out = h;
        switch (h->rec.status) {
            case RunStatus::Completed: return MBNLS_OK;
            case RunStatus::Diverged:
                return set_error(MBNLS_ERR_DIVERGED, "run diverged");
            case RunStatus::ResolutionStop:
                // only an error when the run stopped before any usable window
                if (h->rec.checkpoints_recorded < 10)
                    return set_error(MBNLS_ERR_RESOLUTION_STOP,
                                     "resolution stop before any fit window");
                return MBNLS_OK;
        }
        return MBNLS_OK;
    });
}

int mbnls_run_status(const mbnls_run* run) {
    if (!run) return -1;
    switch (run->rec.status) {
        case RunStatus::Completed: return MBNLS_RUN_COMPLETED;
        case RunStatus::ResolutionStop: return MBNLS_RUN_RESOLUTION_STOP;
        case RunStatus::Diverged: return MBNLS_RUN_DIVERGED;
    }
    return -1;
}

const char* mbnls_run_directory(const mbnls_run* run) {
    return run ? run->rec.dir.c_str() : "";
}

int mbnls_run_summary(const mbnls_run* run, char** out_text) {
    if (!run || !out_text) return set_error(MBNLS_ERR_INVALID_ARGUMENT, "null argument");
    *out_text = dup_string(run->rec.summary);
    return MBNLS_OK;
}

int mbnls_report(const char* const* run_dirs, size_t count, char** out_text) {
    if (!run_dirs || !out_text)
        return set_error(MBNLS_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> int {
        std::vector<std::string> dirs(run_dirs, run_dirs + count);
        *out_text = dup_string(report(dirs));
        return MBNLS_OK;
    });
}

int mbnls_selftest(int dim, char** out_text) {
    if (!out_text) return set_error(MBNLS_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> int {
        bool ok = false;
        std::string text = selftest(dim, &ok);
        *out_text = dup_string(text);
        if (ok) return MBNLS_OK;
        return set_error(MBNLS_ERR_INTERNAL, "selftest failures");
    });
}

void mbnls_config_free(mbnls_config* cfg) { delete cfg; }
void mbnls_run_free(mbnls_run* run) { delete run; }
void mbnls_string_free(char* text) { delete[] text; }

} // extern "C"
