#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ss/experiment.hpp"

namespace {

// 0 success, 1 configuration/input error, 2 runtime error, 3 divergence
int guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const ss::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return 3;
    } catch (const ss::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const ss::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

void print_outcome(const ss::RunOutcome& out) {
    for (const auto& [task, metrics] : out.per_task) {
        std::cout << task << ':';
        for (const auto& [split, value] : metrics) std::cout << ' ' << split << '=' << value;
        std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-task sequence labeling with per-task sparse subnetworks"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", out_override;
    uint64_t seed_override = 0;
    bool seed_set = false;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "experiment config (JSON)")
            ->required();
        sub->add_option("--output-dir", out_override, "override config output_dir");
        sub->add_option("--seed", seed_override, "override config seed")
            ->each([&](const std::string&) { seed_set = true; });
    };
    auto load = [&]() {
        auto cfg = ss::load_config(config_path);
        if (!out_override.empty()) cfg.output_dir = out_override;
        if (seed_set) cfg.seed = seed_override;
        return cfg;
    };

    auto* run = app.add_subcommand("run", "full pipeline for the configured mode");
    add_config(run);
    auto* warmup = app.add_subcommand("warmup", "multi-task warmup, save checkpoints");
    add_config(warmup);
    auto* gen = app.add_subcommand("generate-subnets",
                                   "iterative magnitude pruning per task");
    add_config(gen);
    auto* select = app.add_subcommand("select", "pick best candidate mask per task");
    add_config(select);
    auto* train = app.add_subcommand("train", "parallel training of selected subnets");
    add_config(train);
    auto* eval = app.add_subcommand("evaluate", "test metrics from best checkpoints");
    add_config(eval);

    auto* analyze = app.add_subcommand("analyze", "sparsity/overlap report for a run");
    analyze->add_option("dir", out_dir, "experiment output directory")->required();

    uint64_t seed = 1;
    int n_seeds = 5, vocab_size = 200, sentences = 1500;
    double relatedness = 0.5;
    ss::SynthConfig sc;
    auto* nt = app.add_subcommand("negative-transfer",
                                  "synthetic unrelated-task experiment over seeds");
    nt->add_option("--seed", seed, "base seed");
    nt->add_option("--seeds", n_seeds, "number of seeds");
    nt->add_option("--out", out_dir, "report directory");
    nt->add_option("--relatedness", sc.relatedness, "latent state overlap in [0,1]");
    nt->add_option("--sentences", sc.sentences, "training sentences");
    nt->add_option("--steps", sc.train_steps, "parallel training steps");

    auto* synth = app.add_subcommand("synth-data", "write synthetic corpora as CoNLL");
    synth->add_option("--seed", seed, "generator seed");
    synth->add_option("--vocab", vocab_size, "vocabulary size");
    synth->add_option("--sentences", sentences, "sentences per task");
    synth->add_option("--relatedness", relatedness, "latent state overlap in [0,1]");
    synth->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    return guarded([&]() -> int {
        if (run->parsed()) {
            auto out = ss::run_experiment(load());
            print_outcome(out);
            return 0;
        }
        if (warmup->parsed()) return ss::stage_warmup(load());
        if (gen->parsed()) return ss::stage_generate_subnets(load());
        if (select->parsed()) return ss::stage_select(load());
        if (train->parsed()) return ss::stage_train(load());
        if (eval->parsed()) return ss::stage_evaluate(load());
        if (analyze->parsed()) return ss::analyze_dir(out_dir);
        if (nt->parsed()) return ss::cmd_negative_transfer(seed, n_seeds, out_dir, sc);
        if (synth->parsed())
            return ss::cmd_synth_data(seed, vocab_size, sentences, relatedness, out_dir);
        return 1;
    });
}
