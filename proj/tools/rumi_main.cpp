// Command-line entry point: synth | pool | train | eval | crossval.
// Flag values override the JSON config (flag > file > default).

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rumi/errors.hpp"
#include "rumi/kernels.hpp"
#include "rumi/pipeline.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    std::string solver;
    int T = 0;
    bool T_set = false;
    unsigned jobs = 0;
    bool jobs_set = false;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "pipeline config JSON")->required();
    cmd->add_option("--seed", o.seed, "override the global seed")
        ->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--out", o.out_dir, "override paths.out_dir");
    cmd->add_option("--solver", o.solver, "rank pooling solver: exact | approx")
        ->check(CLI::IsMember({"exact", "approx"}));
    cmd->add_option("--T", o.T, "override the window length")
        ->each([&o](const std::string&) { o.T_set = true; });
    cmd->add_option("--jobs", o.jobs, "worker threads (0 = hardware)")
        ->each([&o](const std::string&) { o.jobs_set = true; });
}

rumi::cli::PipelineConfig resolve_config(const Overrides& o) {
    rumi::cli::PipelineConfig cfg = rumi::cli::load_config(o.config_path);
    if (o.seed_set) {
        cfg.seed = o.seed;
        cfg.train.seed = o.seed;
    }
    if (!o.out_dir.empty()) cfg.paths.out_dir = o.out_dir;
    if (!o.solver.empty()) cfg.rankpool.method = o.solver;
    if (o.T_set) {
        if (o.T < 2) throw rumi::ValidationError("--T must be at least 2");
        cfg.dataset.T = o.T;
    }
    if (o.jobs_set) cfg.jobs = o.jobs;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rumi: rank-pooled dynamic images with a small CNN classifier"};
    app.require_subcommand(1);

    Overrides o;
    bool show_isa = false;
    app.add_flag("--isa", show_isa, "print the kernel ISA in use and exit")
        ->trigger_on_parse();

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic clips and a manifest");
    CLI::App* pool = app.add_subcommand("pool", "pool manifest clips into dynamic images");
    CLI::App* train = app.add_subcommand("train", "train the classifier on pooled images");
    CLI::App* eval = app.add_subcommand("eval", "evaluate trained weights on the test split");
    CLI::App* crossval = app.add_subcommand("crossval", "k-fold cross-validation");
    for (CLI::App* cmd : {synth, pool, train, eval, crossval}) {
        add_common_flags(cmd, o);
    }

    CLI11_PARSE(app, argc, argv);

    if (show_isa) {
        std::cout << rumi::kern::active_isa() << "\n";
        return 0;
    }

    try {
        const rumi::cli::PipelineConfig cfg = resolve_config(o);
        if (synth->parsed()) rumi::cli::cmd_synth(cfg);
        else if (pool->parsed()) rumi::cli::cmd_pool(cfg);
        else if (train->parsed()) rumi::cli::cmd_train(cfg);
        else if (eval->parsed()) rumi::cli::cmd_eval(cfg);
        else if (crossval->parsed()) rumi::cli::cmd_crossval(cfg);
    } catch (const rumi::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
