#pragma once

#include "imoc/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace imoc::cli {

struct RunResult {
    std::filesystem::path log_path;
    std::filesystem::path checkpoint_path;
    std::filesystem::path config_path;
    double final_eval_return = 0.0;
    long long env_steps = 0;
};

/// Full training run: writes config.resolved.json, log.csv (appended and
/// flushed row by row) and checkpoint.bin under the config's out_dir.
/// Byte-identical outputs for identical configs and seeds.
RunResult run_training(const RunConfig& config);

/// Mean return of a saved agent over `episodes` fresh evaluation episodes.
double run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& config_path,
                int episodes, std::uint64_t seed);

/// Per-option, per-free-cell action probabilities, termination probability,
/// option value and empirical terminating-state frequencies (from 100
/// evaluation episodes), as a JSON document.
void export_visualization(const std::filesystem::path& checkpoint,
                          const std::filesystem::path& config_path,
                          const std::filesystem::path& out_path, std::uint64_t seed = 1234);

/// Known ablation variants: eps_greedy_selection, disable_mi_reg,
/// n_step_advantage, truncated_advantage.
RunConfig apply_ablation_variant(const RunConfig& base, const std::string& variant);

/// Runs the base config and each variant over the same seed set; writes
/// ablation.csv (one row per run plus mean/std summary rows) under the base
/// out_dir and returns its path.
std::filesystem::path run_ablation(const RunConfig& base, const std::vector<std::string>& variants,
                                   const std::vector<std::uint64_t>& seeds);

/// Oracle verification report: termination-gradient theorem, exact entropy
/// gradients and a Monte Carlo spot check over `instances` random tabular
/// problems. Prints one table row per check; returns overall pass/fail.
bool oracle_check(int instances, std::ostream& out);

/// Resolves out_dir against the IMOC_OUT_ROOT environment variable.
std::filesystem::path resolve_out_dir(const std::string& out_dir);

}  // namespace imoc::cli
