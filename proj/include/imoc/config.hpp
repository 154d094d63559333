#pragma once

#include "imoc/agent.hpp"
#include "imoc/four_rooms.hpp"

#include <optional>
#include <string>
#include <vector>

namespace imoc::cli {

enum class EnvKind { four_rooms, chain, random };

struct EnvConfig {
    EnvKind kind = EnvKind::four_rooms;
    mdp::FourRoomsConfig four_rooms;     // kind == four_rooms
    long long goal_relocation_period = 0;  // 0 = disabled
    int size = 10;                       // kind == chain / random
};

/// Everything one experiment needs. Parsed from JSON; defaults follow the
/// gridworld hyperparameter table.
struct RunConfig {
    agent::AgentConfig agent;
    EnvConfig env;
    long long total_env_steps = 2'000'000;
    long long eval_interval = 100'000;
    int eval_episodes = 20;
    std::uint64_t seed = 0;
    std::string out_dir = "runs/out";
    bool oracle_attach = false;

    void validate() const;  // throws with every violation listed
};

/// Parse from a JSON string. Unknown keys are an error; `overrides` are
/// dotted key=value pairs applied before parsing.
RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

/// Serializes the fully resolved config; re-running from this output
/// reproduces the run.
std::string dump_run_config(const RunConfig& config);

/// Environment construction. Returns the MDP plus, for gridworlds, the
/// GridWorld wrapper (needed for relocation and visualization).
struct BuiltEnv {
    mdp::TabularMDP mdp;
    std::optional<mdp::GridWorld> grid;
    std::vector<mdp::RelocationEntry> relocation;
};
BuiltEnv build_environment(const RunConfig& config);

}  // namespace imoc::cli
