#include "imoc/four_rooms.hpp"

#include <algorithm>
#include <cctype>
#include <deque>

namespace imoc::mdp {

namespace {

const std::vector<std::string> kClassicLayout = {
    "#############",
    "#S....#.....#",
    "#.....#.....#",
    "#.....,.....#",
    "#.....#.....#",
    "#.....#....1#",
    "##,####.....#",
    "#.....###,###",
    "#.....#.....#",
    "#.....#.....#",
    "#.....,.....#",
    "#1....#....2#",
    "#############",
};

// Movement order: up, down, left, right.
constexpr int kDR[4] = {-1, 1, 0, 0};
constexpr int kDC[4] = {0, 0, -1, 1};

std::string cell_name(int r, int c) {
    return "(" + std::to_string(r) + "," + std::to_string(c) + ")";
}

}  // namespace

FourRoomsConfig default_four_rooms() {
    FourRoomsConfig cfg;
    cfg.layout = kClassicLayout;
    // ',' in the stored layout marks hallway floor; normalize to '.'
    for (auto& row : cfg.layout)
        std::replace(row.begin(), row.end(), ',', '.');
    // Two +1 goals in the adjacent rooms, the +2 goal in the far room. The
    // layout digits are both '1'; assign explicitly to keep values distinct.
    cfg.goals = {{5, 11, 1.0}, {11, 1, 1.0}, {11, 11, 2.0}};
    cfg.goal_rewards.clear();
    return cfg;
}

std::vector<RelocationEntry> rotating_goal_schedule(const FourRoomsConfig& base,
                                                    long long period, long long total_steps) {
    if (period <= 0) throw ConfigError("rotating_goal_schedule: period must be positive");
    std::vector<RelocationEntry> schedule;
    std::vector<GoalSpec> goals = base.goals;
    if (goals.empty()) throw ConfigError("rotating_goal_schedule: no goals configured");
    std::vector<double> values;
    for (const auto& g : goals) values.push_back(g.reward);
    for (long long t = period; t < total_steps; t += period) {
        std::rotate(values.begin(), values.begin() + 1, values.end());
        for (std::size_t i = 0; i < goals.size(); ++i) goals[i].reward = values[i];
        schedule.push_back({t, goals});
    }
    return schedule;
}

GridWorld::GridWorld(const FourRoomsConfig& config) : config_(config) {
    if (config_.layout.empty()) config_.layout = default_four_rooms().layout;
    rows_ = static_cast<int>(config_.layout.size());
    cols_ = static_cast<int>(config_.layout[0].size());
    for (const auto& row : config_.layout)
        if (static_cast<int>(row.size()) != cols_)
            throw ConfigError("four rooms: ragged layout rows");
    if (!(config_.action_noise >= 0.0 && config_.action_noise <= 1.0))
        throw ConfigError("four rooms: action_noise outside [0,1]");

    cell_state_.assign(static_cast<std::size_t>(rows_) * cols_, -1);
    int start_r = config_.start_row, start_c = config_.start_col;
    std::vector<GoalSpec> layout_goals;
    for (int r = 0; r < rows_; ++r) {
        for (int c = 0; c < cols_; ++c) {
            char ch = config_.layout[r][static_cast<std::size_t>(c)];
            if (ch == '#') continue;
            cell_state_[index(r, c)] = static_cast<int>(state_cell_.size());
            state_cell_.emplace_back(r, c);
            if (ch == 'S') {
                if (start_r < 0) { start_r = r; start_c = c; }
            } else if (std::isdigit(static_cast<unsigned char>(ch)) && ch != '0') {
                int id = ch - '1';
                double reward = id < static_cast<int>(config_.goal_rewards.size())
                                    ? config_.goal_rewards[static_cast<std::size_t>(id)]
                                    : static_cast<double>(id + 1);
                layout_goals.push_back({r, c, reward});
            } else if (ch != '.' && ch != ' ') {
                throw ConfigError(std::string("four rooms: unknown layout char '") + ch +
                                  "' at " + cell_name(r, c));
            }
        }
    }

    goals_ = config_.goals.empty() ? layout_goals : config_.goals;
    if (goals_.empty()) throw ConfigError("four rooms: no goals configured");
    if (start_r < 0) throw ConfigError("four rooms: no start cell configured");
    if (start_r >= rows_ || start_c >= cols_ || cell_state_[index(start_r, start_c)] < 0)
        throw ConfigError("four rooms: start cell " + cell_name(start_r, start_c) + " is a wall");
    start_state_ = cell_state_[index(start_r, start_c)];

    for (const auto& g : goals_) {
        if (g.row < 0 || g.row >= rows_ || g.col < 0 || g.col >= cols_ ||
            cell_state_[index(g.row, g.col)] < 0)
            throw ConfigError("four rooms: goal cell " + cell_name(g.row, g.col) + " is a wall");
    }

    auto reach = reachable_from(start_r, start_c);
    for (const auto& g : goals_)
        if (!reach[index(g.row, g.col)])
            throw ConfigError("four rooms: goal cell " + cell_name(g.row, g.col) +
                              " unreachable from start");

    mdp_.n_states = static_cast<int>(state_cell_.size());
    mdp_.n_actions = 4;
    mdp_.gamma = 0.99;
    mdp_.max_episode_len = config_.max_episode_len;
    mdp_.initial_dist = Vector::Zero(mdp_.n_states);
    mdp_.initial_dist[start_state_] = 1.0;
    apply_goals(goals_);
}

int GridWorld::state_of(int r, int c) const {
    int s = cell_state_[index(r, c)];
    if (s < 0) throw ConfigError("four rooms: cell " + cell_name(r, c) + " is a wall");
    return s;
}

std::vector<bool> GridWorld::reachable_from(int r, int c) const {
    std::vector<bool> seen(cell_state_.size(), false);
    std::deque<std::pair<int, int>> queue{{r, c}};
    seen[index(r, c)] = true;
    while (!queue.empty()) {
        auto [cr, cc] = queue.front();
        queue.pop_front();
        for (int a = 0; a < 4; ++a) {
            int nr = cr + kDR[a], nc = cc + kDC[a];
            if (nr < 0 || nr >= rows_ || nc < 0 || nc >= cols_) continue;
            if (cell_state_[index(nr, nc)] < 0 || seen[index(nr, nc)]) continue;
            seen[index(nr, nc)] = true;
            queue.emplace_back(nr, nc);
        }
    }
    return seen;
}

void GridWorld::apply_goals(const std::vector<GoalSpec>& goals) {
    goals_ = goals;
    rebuild_dynamics();
}

void GridWorld::rebuild_dynamics() {
    const int n = mdp_.n_states;
    mdp_.terminal.assign(static_cast<std::size_t>(n), false);
    mdp_.arrival_reward = Vector::Constant(n, config_.step_penalty);
    for (const auto& g : goals_) {
        int s = state_of(g.row, g.col);
        mdp_.terminal[static_cast<std::size_t>(s)] = true;
        mdp_.arrival_reward[s] = g.reward;
    }

    mdp_.transition = Matrix::Zero(static_cast<Eigen::Index>(n) * 4, n);
    mdp_.reward = Matrix::Zero(n, 4);
    const double noise = config_.action_noise;
    for (int s = 0; s < n; ++s) {
        auto [r, c] = state_cell_[static_cast<std::size_t>(s)];
        if (mdp_.terminal[static_cast<std::size_t>(s)]) {
            for (int a = 0; a < 4; ++a) mdp_.transition(s * 4 + a, s) = 1.0;
            continue;
        }
        // Deterministic move per executed action; blocked moves stay put.
        int dest[4];
        for (int a = 0; a < 4; ++a) {
            int nr = r + kDR[a], nc = c + kDC[a];
            dest[a] = (nr < 0 || nr >= rows_ || nc < 0 || nc >= cols_ ||
                       cell_state_[index(nr, nc)] < 0)
                          ? s
                          : cell_state_[index(nr, nc)];
        }
        // With probability `noise` the executed action is resampled
        // uniformly over all four moves (the intended one included).
        for (int a = 0; a < 4; ++a) {
            mdp_.transition(s * 4 + a, dest[a]) += 1.0 - noise;
            for (int e = 0; e < 4; ++e) mdp_.transition(s * 4 + a, dest[e]) += noise / 4.0;
            double expected = 0.0;
            for (int t = 0; t < n; ++t)
                expected += mdp_.transition(s * 4 + a, t) * mdp_.arrival_reward[t];
            mdp_.reward(s, a) = expected;
        }
    }
    mdp_.validate();
}

TabularMDP build_four_rooms(const FourRoomsConfig& config) { return GridWorld(config).mdp(); }

}  // namespace imoc::mdp
