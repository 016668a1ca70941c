// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "rispa/bench/config.hpp"
#include "rispa/bench/experiment.hpp"
#include "rispa/errors.hpp"
#include "support.hpp"

using namespace rispa;
using namespace rispa::bench;
using rispa::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig small(const TempDir& dir)
{
    ExperimentConfig c = preset("desk");
    c.train_count = 300;
    c.test_count = 60;
    c.validation_count = 50;
    c.gmm.components = 2;
    c.gmm.max_iter = 10;
    c.train.epochs = 2;
    c.train.arch.kernels = 4;
    c.train.batch_size = 32;
    c.artifacts_dir = dir / "artifacts";
    c.output = dir / "results.csv";
    return c;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(RISPA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p);
    out << text;
}

} // namespace

TEST_CASE("presets")
{
    for (const auto& name : preset_names())
        CHECK_NOTHROW(preset(name).validate());
    CHECK(preset("desk").shape() == ChannelShape{4, 8});
    CHECK(preset("m8l16").shape() == ChannelShape{8, 16});
    CHECK(preset("m16l64").shape() == ChannelShape{16, 64});
    CHECK_THROWS_AS(preset("huge"), ParameterError);
}

TEST_CASE("config parsing keeps preset defaults for absent keys")
{
    const auto c = parse_config(R"({"preset": "m8l16", "train_count": 500,
        "sweep": {"n_v": [2, 4, 8], "snr_db": 10},
        "estimators": ["ls", "gmm"], "gmm": {"components": 4},
        "scenario": {"rician_k": "inf"}})");
    CHECK(c.preset == "m8l16");
    CHECK(c.train_count == 500);
    CHECK(c.test_count == preset("m8l16").test_count);
    CHECK(c.shape() == ChannelShape{8, 16});
    CHECK(std::isinf(c.scenario.rician_k));
    CHECK(c.gmm.components == 4);
    const auto pts = c.sweep.points();
    REQUIRE(pts.size() == 3);
    CHECK(pts[2].allocations == 8);
    CHECK(pts[2].snr_db == 10.0);
    CHECK(c.estimators == std::vector<EstimatorKind>{EstimatorKind::ls, EstimatorKind::gmm});

    // the rendering parses back to the same config
    const auto back = parse_config(dump_config(c));
    CHECK(dump_config(back) == dump_config(c));
}

TEST_CASE("config errors")
{
    CHECK_THROWS_AS(parse_config("{"), ParameterError);
    CHECK_THROWS_AS(parse_config(R"({"trian_count": 3})"), ParameterError);
    CHECK_THROWS_AS(parse_config(R"({"gmm": {"k": 3}})"), ParameterError);
    CHECK_THROWS_AS(parse_config(R"({"strategies": ["best"]})"), ParameterError);
    CHECK_THROWS_AS(parse_config(R"({"train_count": "many"})"), ParameterError);
    CHECK_THROWS_AS(parse_config(R"({"estimators": ["cnn"]})"), ParameterError);
    CHECK_THROWS_AS(parse_config(R"({"sweep": {"snr_db": [0], "n_v": 10}})"), ParameterError);
    CHECK_THROWS_AS(load_config("/nonexistent/rispa.json"), IoError);
}

TEST_CASE("default evaluation produces one record per combination")
{
    TempDir dir("bench");
    const auto c = small(dir);
    const auto records = run_experiment(c);
    // 2 strategies x 2 estimators x 3 SNRs
    REQUIRE(records.size() == 12);
    std::set<std::tuple<std::string, std::string, double>> keys;
    for (const auto& r : records) {
        keys.emplace(r.strategy, r.estimator, r.snr_db);
        CHECK(r.samples == 60);
        CHECK(r.n_v == 4);
        CHECK(r.nmse > 0.0);
        CHECK(std::isfinite(r.nmse));
        CHECK(r.underdetermined == (r.estimator == "ls"));
    }
    CHECK(keys.size() == 12);
    CHECK(records.front().strategy == "dft_sub");
    CHECK(records.front().estimator == "ls");

    std::istringstream csv(slurp(c.output));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "strategy,estimator,snr_db,n_v,nmse,samples,seed");
    int rows = 0;
    while (std::getline(csv, line))
        ++rows;
    CHECK(rows == 12);

    // identical inputs, identical bytes
    const std::string first = slurp(c.output);
    run_experiment(c);
    CHECK(slurp(c.output) == first);
}

TEST_CASE("LS with a full DFT is exact at very high SNR")
{
    TempDir dir("exact");
    auto c = small(dir);
    c.strategies = {Strategy::dft_sub};
    c.estimators = {EstimatorKind::ls};
    c.sweep.axis = Sweep::Axis::nv;
    c.sweep.allocations = {9};
    c.sweep.fixed_snr_db = 200.0;
    const auto records = run_experiment(c);
    REQUIRE(records.size() == 1);
    CHECK(records[0].nmse < 1e-18);
    CHECK_FALSE(records[0].underdetermined);
}

TEST_CASE("partitions are disjoint and validation is the tail of training")
{
    TempDir dir("parts");
    const Workspace ws(small(dir));
    CHECK(ws.train().size() == 300);
    CHECK(ws.test().size() == 60);
    CHECK(ws.cnn_train().size() == 250);
    CHECK(ws.validation().size() == 50);
    CHECK(ws.validation().data() == ws.train().data() + 250);
    CHECK(ws.test().data() == ws.train().data() + 300);
    // normalized on the training partition
    double sum = 0.0;
    for (const auto& H : ws.train())
        sum += H.squaredNorm();
    CHECK(sum / 300.0 == doctest::Approx(36.0).epsilon(1e-9));
}

TEST_CASE("artifact-backed strategies need their producers")
{
    TempDir dir("missing");
    auto c = small(dir);
    c.estimators = {EstimatorKind::gmm};
    try {
        run_experiment(c);
        FAIL("expected a missing artifact");
    } catch (const MissingArtifactError& e) {
        CHECK(e.producer() == "fit-gmm");
    }
    c.estimators = {EstimatorKind::ls};
    c.strategies = {Strategy::dft_search};
    try {
        run_experiment(c);
        FAIL("expected a missing artifact");
    } catch (const MissingArtifactError& e) {
        CHECK(e.producer() == "search-dft");
    }
    c.strategies = {Strategy::learned};
    try {
        run_experiment(c);
        FAIL("expected a missing artifact");
    } catch (const MissingArtifactError& e) {
        CHECK(e.producer() == "train-cnn");
    }
}

TEST_CASE("full pipeline through the artifact producers")
{
    TempDir dir("pipeline");
    auto c = small(dir);
    c.sweep.snr_db = {20.0};
    c.strategies = {Strategy::dft_sub, Strategy::random, Strategy::dft_search, Strategy::learned};
    c.estimators = {EstimatorKind::sample_cov, EstimatorKind::gmm, EstimatorKind::cnn};
    c.search.samples = 20;
    c.search.estimator = EstimatorKind::ls;
    const Workspace ws(c);
    CHECK(fit_gmm_artifacts(ws).size() == 1);
    CHECK(train_cnn_artifacts(ws).size() == 1);
    CHECK(search_dft_artifacts(ws).size() == 1);
    CHECK(std::filesystem::exists(ws.cnn_path(1, c.sweep.points()[0]).replace_extension(".log.csv")));
    const auto records = run_experiment(ws);
    // cnn only pairs with the learned strategy
    CHECK(records.size() == 4 * 2 + 1);
    for (const auto& r : records)
        CHECK(std::isfinite(r.nmse));

    const PhaseMatrix V = phase_matrix_for(ws, Strategy::dft_search, 1, c.sweep.points()[0]);
    CHECK(V.allocations() == 4);
    CHECK((V.values().row(0).array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("histogram at N_v = L+1 is uniform")
{
    TempDir dir("uniform");
    auto c = small(dir);
    c.sweep.axis = Sweep::Axis::nv;
    c.sweep.allocations = {9};
    c.search.samples = 10;
    c.search.estimator = EstimatorKind::ls;
    const Workspace ws(c);
    const auto r = run_dft_histogram(ws, dir / "h.csv");
    CHECK(r.combinations == 1);
    for (double h : r.histogram)
        CHECK(h == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(slurp(dir / "h_best_set.csv") == "column\n1\n2\n3\n4\n5\n6\n7\n8\n9\n");
}

TEST_CASE("histogram on a small RIS sums to one")
{
    TempDir dir("smallris");
    auto c = small(dir);
    c.scenario.shape = {2, 3};
    c.scenario.ris_rows = 1;
    c.scenario.ris_cols = 3;
    c.sweep.axis = Sweep::Axis::nv;
    c.sweep.allocations = {2};
    c.search.samples = 30;
    c.search.estimator = EstimatorKind::sample_cov;
    const Workspace ws(c);
    const auto r = run_dft_histogram(ws, dir / "h.csv");
    CHECK(r.combinations == 6);
    double sum = 0.0;
    for (double h : r.histogram)
        sum += h;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(r.per_sample_best.size() == 30);
}

TEST_CASE("command line")
{
    TempDir dir("cli");
    const std::string base = R"({"train_count": 300, "test_count": 40, "validation_count": 50,
        "gmm": {"components": 2, "max_iter": 5}, "artifacts_dir": ")" +
                             (dir / "art").string() + "\"}";
    write_file(dir / "ok.json", base);

    const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
    CHECK(run_cli("evaluate --config " + (dir / "ok.json").string() + " --seed 7 --out " + a) == 0);
    CHECK(run_cli("evaluate --config " + (dir / "ok.json").string() + " --seed 7 --out " + b) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a).find(",7\n") != std::string::npos);
    const std::string inline_run = slurp(a);

    write_file(dir / "gmm.json", base.substr(0, base.size() - 1) + R"(, "estimators": ["gmm"]})");
    CHECK(run_cli("evaluate --config " + (dir / "gmm.json").string() + " -q --out " + a) == 3);
    CHECK(run_cli("fit-gmm --config " + (dir / "gmm.json").string() + " -q") == 0);
    CHECK(run_cli("evaluate --config " + (dir / "gmm.json").string() + " -q --out " + a) == 0);

    write_file(dir / "bad.json", R"({"no_such_key": 1})");
    CHECK(run_cli("evaluate --config " + (dir / "bad.json").string()) == 2);
    CHECK(run_cli("evaluate --bogus-flag") == 2);
    CHECK(run_cli("evaluate --dataset " + (dir / "none.risd").string()) == 3);

    const std::string ds = (dir / "d.risd").string();
    CHECK(run_cli("generate-data --config " + (dir / "ok.json").string() + " --out " + ds) == 0);
    CHECK(run_cli("evaluate --config " + (dir / "ok.json").string() + " --seed 7 --dataset " + ds + " --out " + b) ==
          0);
    // a saved dataset evaluates exactly like the inline generation
    CHECK(slurp(b) == inline_run);
}

TEST_CASE("shipped configs are valid")
{
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(RISPA_CONFIG_DIR)) {
        if (entry.path().extension() != ".json")
            continue;
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(load_config(entry.path()));
        ++n;
    }
    CHECK(n >= 4);
}
