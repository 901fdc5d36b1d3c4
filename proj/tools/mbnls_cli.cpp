// Command-line front end for the multi-bubble NLS laboratory. Talks to the
// core exclusively through the C API in mbnls.h.

#include "mbnls.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

int exit_code_for(int rc) {
    switch (rc) {
        case MBNLS_OK: return 0;
        case MBNLS_ERR_VALIDATION: return 2;
        case MBNLS_ERR_DIVERGED: return 3;
        case MBNLS_ERR_RESOLUTION_STOP: return 4;
        default: return 1;
    }
}

int fail(int rc) {
    std::fprintf(stderr, "error: %s\n", mbnls_last_error());
    return exit_code_for(rc);
}

struct RunArgs {
    std::string config_path;
    std::string out_dir = "runs/out";
    std::string seed;
    std::string checkpoints;
};

int execute(const RunArgs& args, const char* kind) {
    mbnls_config* cfg = nullptr;
    int rc = mbnls_config_load(args.config_path.c_str(), &cfg);
    if (rc != MBNLS_OK) return fail(rc);
    rc = mbnls_config_override(cfg, "experiment", kind);
    if (rc == MBNLS_OK && !args.seed.empty())
        rc = mbnls_config_override(cfg, "noise.seed", args.seed.c_str());
    if (rc == MBNLS_OK && !args.checkpoints.empty())
        rc = mbnls_config_override(cfg, "controller.checkpoints", args.checkpoints.c_str());
    if (rc != MBNLS_OK) {
        mbnls_config_free(cfg);
        return fail(rc);
    }

    mbnls_run* run = nullptr;
    rc = mbnls_run_execute(cfg, args.out_dir.c_str(), &run);
    if (run) {
        char* summary = nullptr;
        if (mbnls_run_summary(run, &summary) == MBNLS_OK) {
            std::fputs(summary, stdout);
            mbnls_string_free(summary);
        }
        std::printf("run_dir = %s\n", mbnls_run_directory(run));
        mbnls_run_free(run);
    }
    mbnls_config_free(cfg);
    if (rc != MBNLS_OK) return fail(rc);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mbnls: multi-bubble blow-up laboratory for the mass-critical "
                 "NLS with noise-induced lower-order perturbations"};
    app.require_subcommand(1);

    RunArgs args;
    const char* kinds[4] = {"construct", "pair", "cauchy", "sweep"};
    const char* blurbs[4] = {
        "backward construction from sum_j S_j(t_n)",
        "evolve a perturbed pair and track the difference functional",
        "Cauchy check over several boundary times t_n",
        "seed sweep of construct runs"};
    std::vector<CLI::App*> subs;
    for (int i = 0; i < 4; ++i) {
        CLI::App* sub = app.add_subcommand(kinds[i], blurbs[i]);
        sub->add_option("-c,--config", args.config_path, "run config (YAML)")
            ->required();
        sub->add_option("--out-dir", args.out_dir, "run directory");
        sub->add_option("--seed", args.seed, "override noise.seed");
        sub->add_option("--checkpoints", args.checkpoints,
                        "override controller.checkpoints");
        subs.push_back(sub);
    }

    std::vector<std::string> report_dirs;
    CLI::App* rep = app.add_subcommand("report", "summary tables over run directories");
    rep->add_option("dirs", report_dirs, "run directories")->required();

    int selftest_dim = 0;
    CLI::App* st = app.add_subcommand(
        "selftest", "kernel identities + conservation suite");
    st->add_option("--dim", selftest_dim, "restrict to one dimension (1 or 2)");

    CLI11_PARSE(app, argc, argv);

    for (int i = 0; i < 4; ++i)
        if (subs[i]->parsed()) return execute(args, kinds[i]);

    if (rep->parsed()) {
        std::vector<const char*> ptrs;
        for (const std::string& d : report_dirs) ptrs.push_back(d.c_str());
        char* text = nullptr;
        int rc = mbnls_report(ptrs.data(), ptrs.size(), &text);
        if (text) {
            std::fputs(text, stdout);
            mbnls_string_free(text);
        }
        return rc == MBNLS_OK ? 0 : fail(rc);
    }

    if (st->parsed()) {
        char* text = nullptr;
        int rc = mbnls_selftest(selftest_dim, &text);
        if (text) {
            std::fputs(text, stdout);
            mbnls_string_free(text);
        }
        if (rc == MBNLS_OK) return 0;
        return rc == MBNLS_ERR_INTERNAL ? 1 : fail(rc);
    }
    return 1;
}
