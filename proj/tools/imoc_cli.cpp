#include "imoc/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"InfoMax option-critic experiment runner"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, out_path, variants_arg;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int episodes = 20;
    int instances = 10;

    auto* train = app.add_subcommand("train", "Train an agent from a config file");
    train->add_option("--config", config_path, "Run config (JSON)")->required();
    train->add_option("--seed", seed, "Seed override")->each([&](const std::string&) { seed_set = true; });
    train->add_option("--override", overrides, "key=value config overrides (dotted keys)");

    auto* eval = app.add_subcommand("eval", "Evaluate a saved checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint.bin")->required();
    eval->add_option("--episodes", episodes, "Evaluation episodes");
    eval->add_option("--config", config_path, "Resolved config (defaults to the checkpoint dir)");
    eval->add_option("--seed", seed, "Evaluation seed");

    auto* viz = app.add_subcommand("viz", "Export policy/termination visualization data");
    viz->add_option("--checkpoint", checkpoint_path, "checkpoint.bin")->required();
    viz->add_option("--out", out_path, "Output JSON path")->required();
    viz->add_option("--config", config_path, "Resolved config (defaults to the checkpoint dir)");

    auto* ablate = app.add_subcommand("ablate", "Run an ablation comparison");
    ablate->add_option("--config", config_path, "Base run config (JSON)")->required();
    ablate->add_option("--variants", variants_arg, "Comma-separated variant names");
    std::string seeds_arg = "0,1,2,3,4";
    ablate->add_option("--seeds", seeds_arg, "Comma-separated seeds");
    ablate->add_option("--override", overrides, "key=value config overrides");

    auto* oracle = app.add_subcommand("oracle-check", "Run the oracle verification suite");
    oracle->add_option("--instances", instances, "Number of random instances");

    CLI11_PARSE(app, argc, argv);

    auto split_csv = [](const std::string& s) {
        std::vector<std::string> out;
        std::size_t pos = 0;
        while (pos < s.size()) {
            std::size_t comma = s.find(',', pos);
            if (comma == std::string::npos) comma = s.size();
            if (comma > pos) out.push_back(s.substr(pos, comma - pos));
            pos = comma + 1;
        }
        return out;
    };

    try {
        if (train->parsed()) {
            if (seed_set) overrides.push_back("seed=" + std::to_string(seed));
            auto cfg = imoc::cli::load_run_config(config_path, overrides);
            auto result = imoc::cli::run_training(cfg);
            std::cout << "log: " << result.log_path.string() << "\n"
                      << "checkpoint: " << result.checkpoint_path.string() << "\n"
                      << "final_eval_return: " << result.final_eval_return << "\n";
        } else if (eval->parsed()) {
            double ret = imoc::cli::run_eval(checkpoint_path, config_path, episodes, seed);
            std::cout << "mean_return: " << ret << "\n";
        } else if (viz->parsed()) {
            imoc::cli::export_visualization(checkpoint_path, config_path, out_path);
            std::cout << "wrote " << out_path << "\n";
        } else if (ablate->parsed()) {
            auto cfg = imoc::cli::load_run_config(config_path, overrides);
            std::vector<std::uint64_t> seeds;
            for (const auto& s : split_csv(seeds_arg)) seeds.push_back(std::stoull(s));
            auto table = imoc::cli::run_ablation(cfg, split_csv(variants_arg), seeds);
            std::cout << "wrote " << table.string() << "\n";
        } else if (oracle->parsed()) {
            bool ok = imoc::cli::oracle_check(instances, std::cout);
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
