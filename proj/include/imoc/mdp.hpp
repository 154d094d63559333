#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace imoc::mdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Finite MDP with explicit transition kernel and (state, action) rewards.
///
/// Transition rows are stored as a (n_states * n_actions) x n_states matrix;
/// the row for (s, a) is `transition.row(s * n_actions + a)`.
///
/// `arrival_reward` is optional: when non-empty (size n_states), a sampled
/// step pays `arrival_reward[next_state]` instead of `reward(s, a)`, and
/// `reward(s, a)` holds the expectation of that quantity. This is how the
/// gridworld attaches goal bonuses to the cell actually reached.
struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    Matrix transition;             // (n_states*n_actions) x n_states
    Matrix reward;                 // n_states x n_actions
    double gamma = 0.99;
    std::vector<bool> terminal;    // per state
    Vector initial_dist;           // over states
    Vector arrival_reward;         // empty, or size n_states
    int max_episode_len = 0;       // 0 = no limit

    Eigen::Block<const Matrix, 1> row(int s, int a) const {
        return transition.block<1, Eigen::Dynamic>(s * n_actions + a, 0, 1, n_states);
    }
    bool is_terminal(int s) const { return terminal[static_cast<std::size_t>(s)]; }

    /// Throws std::invalid_argument on any violated invariant
    /// (rows not summing to 1, non-finite rewards, bad gamma, ...).
    void validate(double tol = 1e-9) const;
};

/// One sampled environment transition.
struct EpisodeStep {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    bool done = false;       // reached a terminal state
    bool truncated = false;  // hit the episode length limit
};

/// Samples an index from a probability row.
int sample_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& probs, std::mt19937_64& rng);

/// Single transition. `steps_taken` is the number of steps already taken in
/// the current episode; the returned step is truncated when the counter
/// reaches `max_episode_len`. Throws if `state` is terminal.
EpisodeStep step(const TabularMDP& m, std::mt19937_64& rng, int state, int action, int steps_taken = 0);

/// Episode-scoped state for one actor: current state plus step counter.
class Episode {
public:
    Episode(const TabularMDP& m, std::mt19937_64& rng) : mdp_(&m) { reset(rng); }

    int state() const { return state_; }
    int steps() const { return steps_; }
    double undiscounted_return() const { return return_; }

    void reset(std::mt19937_64& rng);
    EpisodeStep step(std::mt19937_64& rng, int action);
    /// Restores a mid-episode snapshot (checkpoint resume).
    void restore(int state, int steps, double undiscounted);

private:
    const TabularMDP* mdp_;
    int state_ = 0;
    int steps_ = 0;
    double return_ = 0.0;
};

enum class TestMdpKind { chain, random };

/// Small fixture MDPs for the oracle suite. `chain` is a size-state line
/// with deterministic left/right actions; `random` draws a dense stochastic
/// kernel with normalized rows. Throws for size < 2.
TabularMDP build_test_mdp(TestMdpKind kind, int size, std::mt19937_64& rng, int n_actions = 2);

}  // namespace imoc::mdp
