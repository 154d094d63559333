#pragma once

#include "imoc/mdp.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace imoc::mdp {

struct GoalSpec {
    int row = 0;
    int col = 0;
    double reward = 1.0;
};

/// Goal list swap applied once the global env-step counter passes `env_step`.
struct RelocationEntry {
    long long env_step = 0;
    std::vector<GoalSpec> goals;
};

/// Gridworld configuration. The layout is ASCII art: '#' wall, '.' floor,
/// 'S' start, digits 1..9 mark goal cells (digit k pairs with
/// goal_rewards[k-1]). Explicit `goals`/`start_*` override layout markers.
struct FourRoomsConfig {
    std::vector<std::string> layout;       // empty => classic 13x13 four rooms
    int start_row = -1, start_col = -1;    // -1 => take from layout 'S'
    std::vector<GoalSpec> goals;           // empty => from layout digits
    std::vector<double> goal_rewards;      // rewards for layout digits
    double action_noise = 0.1;
    double step_penalty = -0.002;
    int max_episode_len = 100;
    std::vector<RelocationEntry> relocation;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Canonical 13x13 four-rooms with the start in the upper-left room corner,
/// +1 goals in the two adjacent rooms and the +2 goal in the far room.
FourRoomsConfig default_four_rooms();

/// Spreads the high-value goal across the goal rooms every `period` steps.
std::vector<RelocationEntry> rotating_goal_schedule(const FourRoomsConfig& base,
                                                    long long period, long long total_steps);

/// A gridworld plus the cell <-> compact-state mapping. States cover free
/// cells only; walls have no state id.
class GridWorld {
public:
    explicit GridWorld(const FourRoomsConfig& config);

    const TabularMDP& mdp() const { return mdp_; }
    TabularMDP& mdp() { return mdp_; }
    const FourRoomsConfig& config() const { return config_; }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int n_states() const { return mdp_.n_states; }
    int start_state() const { return start_state_; }
    const std::vector<GoalSpec>& goals() const { return goals_; }

    bool is_wall(int r, int c) const { return cell_state_[index(r, c)] < 0; }
    int state_of(int r, int c) const;                      // throws on wall
    std::pair<int, int> cell_of(int state) const { return state_cell_[static_cast<std::size_t>(state)]; }

    /// Swaps the goal list (used by relocation). Walls, the state space and
    /// movement dynamics are untouched; terminal flags and rewards follow
    /// the new goals.
    void apply_goals(const std::vector<GoalSpec>& goals);

    /// BFS over free cells from (r, c).
    std::vector<bool> reachable_from(int r, int c) const;

private:
    std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }
    void rebuild_dynamics();

    FourRoomsConfig config_;
    int rows_ = 0, cols_ = 0;
    std::vector<int> cell_state_;                 // rows*cols, -1 for walls
    std::vector<std::pair<int, int>> state_cell_;
    std::vector<GoalSpec> goals_;
    int start_state_ = 0;
    TabularMDP mdp_;
};

/// Convenience wrapper returning just the tabular MDP.
TabularMDP build_four_rooms(const FourRoomsConfig& config);

}  // namespace imoc::mdp
