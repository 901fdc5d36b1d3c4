#include <doctest.h>

#include "errors.hpp"
#include "harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mbnls;
namespace fs = std::filesystem;

namespace {
std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.kind = ExperimentKind::Construct;
    cfg.dim = 1;
    cfg.grid.extent = 16.0;
    cfg.grid.points = 512;
    cfg.T = 1.0;
    cfg.t_n = {0.5};
    cfg.t_end = 0.3;
    cfg.bubbles = {{1.0, {0.0, 0.0}, 0.0}};
    cfg.noise.enabled = true;
    cfg.noise.modes = 2;
    cfg.noise.amplitude = 0.005;
    cfg.noise.seed = 77;
    cfg.noise.dt_noise = 2.5e-5;
    cfg.controller.dt_base = 2e-4;
    cfg.controller.checkpoints = 12;
    cfg.cache_dir = "/tmp/mbnls_test_cache";
    return cfg;
}
} // namespace

TEST_CASE("config: canonical round trip is byte-identical") {
    RunConfig cfg = tiny_config();
    std::string a = emit_config(cfg);
    RunConfig parsed = parse_config(a);
    std::string b = emit_config(parsed);
    CHECK(a == b);

    RunConfig again = parse_config(b);
    CHECK(emit_config(again) == b);
}

TEST_CASE("config validation names the offending rule") {
    RunConfig cfg = tiny_config();
    cfg.grid.points = 1000;
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("grid.points"),
                         ValidationError);

    cfg = tiny_config();
    cfg.t_n = {0.999}; // omega (T - t_n) below 4h
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("resolvability"),
                         ValidationError);

    cfg = tiny_config();
    cfg.bubbles[0].x = {15.5, 0.0};
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("margin"),
                         ValidationError);

    cfg = tiny_config();
    cfg.kind = ExperimentKind::Cauchy;
    cfg.t_n = {0.4, 0.5};
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("cauchy"),
                         ValidationError);

    cfg = tiny_config();
    cfg.noise.dt_noise = 1e-3; // > dt_base / 4
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("dt_noise"),
                         ValidationError);

    cfg = tiny_config();
    cfg.noise.nu_star = 4;
    auto warnings = validate(cfg);
    REQUIRE(warnings.size() >= 1);
    CHECK(warnings[0].find("nu_star") != std::string::npos);

    // case labelling
    cfg = tiny_config();
    cfg.bubbles = {{1.0, {-4.0, 0.0}, 0.0}, {1.0, {4.0, 0.0}, 0.0}};
    validate(cfg);
    CHECK(cfg.case_label == "Case (I)");
    cfg.bubbles[0].omega = 0.7;
    validate(cfg);
    CHECK(cfg.case_label == "Case (II)");
}

TEST_CASE("checkpoint container round trip is bit exact") {
    GridPtr g = make_grid(1, 16.0, 256);
    Trajectory tr;
    for (int k = 0; k < 3; ++k) {
        Field f = synthesize(g, [&](double x, double) {
            return cplx(std::sin(0.3 * (k + 1) * x) * std::exp(-0.1 * x * x),
                        std::cos(0.2 * k * x));
        });
        tr.times.push_back(0.1 * k);
        tr.fields.push_back(std::move(f));
    }
    std::string dir = "/tmp/mbnls_test_ckpt";
    fs::create_directories(dir);
    write_checkpoints(dir, tr);
    auto back = read_checkpoints(dir);
    REQUIRE(back.size() == 3);
    for (int k = 0; k < 3; ++k) {
        CHECK(back[k].first == tr.times[k]);
        REQUIRE(back[k].second.size() == tr.fields[k].size());
        for (std::size_t i = 0; i < tr.fields[k].size(); ++i)
            CHECK(back[k].second.v[i] == tr.fields[k].v[i]);
    }
    fs::remove_all(dir);
}

TEST_CASE("construct run: persists a reproducible record") {
    RunConfig cfg = tiny_config();
    std::string d1 = "/tmp/mbnls_test_run_a";
    std::string d2 = "/tmp/mbnls_test_run_b";
    fs::remove_all(d1);
    fs::remove_all(d2);
    RunRecord r1 = run(cfg, d1);
    RunRecord r2 = run(cfg, d2);
    CHECK(r1.status == RunStatus::Completed);
    CHECK(fs::exists(d1 + "/config.yaml"));
    CHECK(fs::exists(d1 + "/checkpoints.bin"));
    CHECK(fs::exists(d1 + "/checkpoints.idx"));
    CHECK(fs::exists(d1 + "/diagnostics.csv"));
    CHECK(fs::exists(d1 + "/params.csv"));
    CHECK(fs::exists(d1 + "/summary.txt"));
    CHECK(fs::exists(d1 + "/noise_paths.csv"));

    // determinism: byte-identical diagnostics across reruns
    CHECK(slurp(d1 + "/diagnostics.csv") == slurp(d2 + "/diagnostics.csv"));
    CHECK(slurp(d1 + "/params.csv") == slurp(d2 + "/params.csv"));
    CHECK(r1.summary == r2.summary);

    std::string rep = report({d1, d2});
    CHECK(rep.find("rate fits") != std::string::npos);
    CHECK(rep.find("conservation drifts") != std::string::npos);

    CHECK_THROWS_AS(report({}), ValidationError);

    // per-step energy trace on demand
    RunConfig traced = tiny_config();
    traced.controller.energy_trace = true;
    traced.t_n = {0.45};
    traced.t_end = 0.4;
    std::string d3 = "/tmp/mbnls_test_run_c";
    fs::remove_all(d3);
    run(traced, d3);
    std::string trace = slurp(d3 + "/energy_trace.csv");
    CHECK(trace.find("t,E,dEdt_formula") == 0);
    CHECK(std::count(trace.begin(), trace.end(), '\n') > 100);
    fs::remove_all(d3);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("sweep spawns children with disjoint seeds") {
    RunConfig cfg = tiny_config();
    cfg.kind = ExperimentKind::Sweep;
    cfg.sweep.seeds = 3;
    cfg.sweep.workers = 2;
    cfg.controller.checkpoints = 6;
    std::string dir = "/tmp/mbnls_test_sweep";
    fs::remove_all(dir);
    RunRecord rec = run(cfg, dir);
    CHECK(rec.status == RunStatus::Completed);
    for (int s = 77; s <= 79; ++s)
        CHECK(fs::exists(dir + "/seed_" + std::to_string(s) + "/diagnostics.csv"));
    CHECK(slurp(dir + "/seed_77/diagnostics.csv") !=
          slurp(dir + "/seed_78/diagnostics.csv"));
    CHECK(slurp(dir + "/seed_78/diagnostics.csv") !=
          slurp(dir + "/seed_79/diagnostics.csv"));
    fs::remove_all(dir);
}
