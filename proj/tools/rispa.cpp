// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rispa/bench/config.hpp"
#include "rispa/bench/experiment.hpp"
#include "rispa/errors.hpp"

namespace {

using namespace rispa;

struct Common {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string dataset;
    std::optional<std::size_t> parallel;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--preset", c.preset, "base preset when no config is given (desk, m8l16, m16l64)");
    cmd->add_option("--seed", c.seed, "run with this single seed instead of the config's seed list");
    cmd->add_option("--out", c.out, "output path (see the subcommand help)");
    cmd->add_option("--dataset", c.dataset, "channel dataset file, overrides dataset_path");
    cmd->add_option("--parallel", c.parallel, "worker threads for independent sweep points")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("-q,--quiet", c.quiet, "only print the summary line");
}

bench::ExperimentConfig resolve(const Common& c)
{
    bench::ExperimentConfig cfg;
    if (!c.config.empty()) {
        cfg = bench::load_config(c.config);
        if (!c.preset.empty() && c.preset != cfg.preset)
            throw ParameterError("--preset " + c.preset + " conflicts with preset '" + cfg.preset + "' in " +
                                 c.config);
    } else {
        cfg = bench::preset(c.preset.empty() ? "desk" : c.preset);
    }
    if (c.seed)
        cfg.seeds = {*c.seed};
    if (!c.dataset.empty())
        cfg.dataset_path = c.dataset;
    if (c.parallel)
        cfg.parallel = *c.parallel;
    return cfg;
}

bench::Logger logger(const Common& c)
{
    if (c.quiet)
        return {};
    return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

int exit_code(ErrorCategory cat)
{
    switch (cat) {
    case ErrorCategory::config:
        return 2;
    case ErrorCategory::data:
        return 3;
    case ErrorCategory::numeric:
        return 4;
    case ErrorCategory::io:
        return 5;
    case ErrorCategory::state:
        return 1;
    }
    return 1;
}

const char* category_name(ErrorCategory cat)
{
    switch (cat) {
    case ErrorCategory::config:
        return "config error";
    case ErrorCategory::data:
        return "data error";
    case ErrorCategory::numeric:
        return "numerical error";
    case ErrorCategory::io:
        return "i/o error";
    case ErrorCategory::state:
        return "state error";
    }
    return "error";
}

int cmd_generate(const Common& c)
{
    auto cfg = resolve(c);
    cfg.validate();
    std::filesystem::path out = c.out;
    if (out.empty())
        out = cfg.dataset_path ? *cfg.dataset_path : cfg.artifacts_dir / "dataset.risd";
    cfg.dataset_path.reset();
    const auto ds = bench::make_dataset(cfg);
    if (out.has_parent_path())
        std::filesystem::create_directories(out.parent_path());
    save(ds, out);
    std::printf("generate-data: %zu channels (M=%zu, L=%zu) -> %s\n", ds.size(), ds.shape.antennas, ds.shape.elements,
                out.string().c_str());
    return 0;
}

int cmd_artifacts(const Common& c, const char* name,
                  std::vector<std::filesystem::path> (*produce)(const bench::Workspace&, const bench::Logger&))
{
    auto cfg = resolve(c);
    if (!c.out.empty())
        cfg.artifacts_dir = c.out;
    const bench::Workspace ws(cfg);
    const auto paths = produce(ws, logger(c));
    std::printf("%s: %zu artifact(s) in %s\n", name, paths.size(), cfg.artifacts_dir.string().c_str());
    return 0;
}

int cmd_evaluate(const Common& c)
{
    auto cfg = resolve(c);
    if (!c.out.empty())
        cfg.output = c.out;
    const auto records = bench::run_experiment(cfg, logger(c));
    std::printf("evaluate: %zu records -> %s\n", records.size(), cfg.output.string().c_str());
    return 0;
}

int cmd_histogram(const Common& c)
{
    auto cfg = resolve(c);
    const std::filesystem::path out = c.out.empty() ? std::string("histogram.csv") : c.out;
    const bench::Workspace ws(cfg);
    const auto r = bench::run_dft_histogram(ws, out, logger(c));
    std::string set;
    for (auto col : r.best_average_set)
        set += (set.empty() ? "" : ",") + std::to_string(col);
    std::printf("histogram: %zu combinations, best average set {%s} -> %s\n", r.combinations, set.c_str(),
                out.string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Channel estimation with reduced RIS phase allocations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rispa 1.0.0");

    Common common;
    auto* gen = app.add_subcommand("generate-data", "generate a synthetic channel dataset (--out: dataset file)");
    auto* fit = app.add_subcommand("fit-gmm", "fit the GMM prior for every seed (--out: artifacts directory)");
    auto* train = app.add_subcommand("train-cnn",
                                      "jointly train phases and CNN per seed and sweep point (--out: artifacts directory)");
    auto* search = app.add_subcommand("search-dft",
                                      "exhaustive DFT column search per seed and sweep point (--out: artifacts directory)");
    auto* eval = app.add_subcommand("evaluate", "NMSE sweep over strategies and estimators (--out: result CSV)");
    auto* hist = app.add_subcommand("histogram", "DFT column histogram at the first sweep point (--out: CSV)");
    for (auto* cmd : {gen, fit, train, search, eval, hist})
        add_common(cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_generate(common);
        if (fit->parsed())
            return cmd_artifacts(common, "fit-gmm", &bench::fit_gmm_artifacts);
        if (train->parsed())
            return cmd_artifacts(common, "train-cnn", &bench::train_cnn_artifacts);
        if (search->parsed())
            return cmd_artifacts(common, "search-dft", &bench::search_dft_artifacts);
        if (eval->parsed())
            return cmd_evaluate(common);
        if (hist->parsed())
            return cmd_histogram(common);
    } catch (const Error& e) {
        std::fprintf(stderr, "rispa: %s: %s\n", category_name(e.category()), e.what());
        return exit_code(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "rispa: i/o error: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "rispa: %s\n", e.what());
        return 1;
    }
    return 1;
}
