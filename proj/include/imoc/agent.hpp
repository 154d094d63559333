#pragma once

#include "imoc/infomax.hpp"
#include "imoc/mdp.hpp"
#include "imoc/network.hpp"
#include "imoc/options.hpp"
#include "imoc/oracle.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace imoc::agent {

enum class Algorithm { a2imoc, a2c, aoc, our_aoc };
enum class AdvantageMode { uoae, n_step, truncated };

Algorithm algorithm_from_string(const std::string& s);
std::string to_string(Algorithm a);
AdvantageMode advantage_mode_from_string(const std::string& s);
std::string to_string(AdvantageMode m);

struct AgentConfig {
    Algorithm algorithm = Algorithm::a2imoc;
    double gamma = 0.99;
    int rollout_len = 20;
    int n_actors = 12;
    double c_mu = 0.5;
    double c_h_mu = 0.04;
    double c_h = 0.01;
    double c_h_beta = 0.01;
    double max_grad_norm = 1.0;
    double eps_opt = 0.01;    // evaluation epsilon over options
    double eps_greedy = 0.1;  // AOC training / ablation selection epsilon
    int buffer_capacity = 480;
    int classifier_batch = 240;
    int n_options = 4;
    int hidden = 128;
    double value_loss_coef = 0.5;
    bool eps_greedy_selection = false;   // ablation: eps-greedy instead of the bonus argmax
    bool disable_mi_reg = false;         // ablation: c_h_mu treated as 0
    AdvantageMode advantage_mode = AdvantageMode::uoae;
    bool value_mixture_mu_hat = false;   // V from the mu-hat mixture instead of the greedy pick
    bool termination_beta_factor = true; // keep the stop-gradient beta(x) estimator weight
    bool split_encoder = false;
    nn::OptimizerConfig optimizer;

    void validate() const;

    bool uses_options() const { return algorithm != Algorithm::a2c; }
    bool infomax_termination() const { return algorithm == Algorithm::a2imoc; }
    bool oc_termination() const {
        return algorithm == Algorithm::aoc || algorithm == Algorithm::our_aoc;
    }
    bool trains_inverse() const { return algorithm == Algorithm::a2imoc; }
    bool trains_mu() const {
        return algorithm == Algorithm::a2imoc || algorithm == Algorithm::our_aoc;
    }
    bool uncertainty_selection() const {
        return (algorithm == Algorithm::a2imoc || algorithm == Algorithm::our_aoc) &&
               !eps_greedy_selection;
    }
    int effective_n_options() const { return algorithm == Algorithm::a2c ? 1 : n_options; }
    double effective_c_h_mu() const {
        if (disable_mi_reg || algorithm == Algorithm::a2c || algorithm == Algorithm::aoc)
            return 0.0;
        return c_h_mu;
    }
    AdvantageMode effective_advantage() const {
        if (algorithm == Algorithm::a2c) return AdvantageMode::n_step;
        if (algorithm == Algorithm::aoc) return AdvantageMode::truncated;
        return advantage_mode;
    }
};

// ---------------------------------------------------------------------------
// Pure pieces, unit-testable in isolation

/// New-option choice. With b = 0 the current option continues; otherwise the
/// bonus-adjusted argmax over q(o) - c_mu log mu_hat(o), mu_hat floored at
/// 1e-12, ties broken toward the lowest option id.
int select_option(std::span<const double> q_row, std::span<const double> mu_hat_row, double c_mu,
                  int current, bool b);

/// Epsilon-greedy over the option values.
int aoc_option_selection(std::span<const double> q_row, double epsilon, std::mt19937_64& rng);

/// Upgoing option advantage for one window position.
/// `rewards` holds R_t .. R_{t+h-1} for the in-episode horizon h; `k` is the
/// offset of the option-termination step (termination at x_{t+k}), or -1 if
/// the option outlives the window; `v_k` = V(x_{t+k}) (0 at terminal
/// states); `v_tail`/`u_tail` are V and U at x_{t+h}.
double uoae_advantage(std::span<const double> rewards, int k, double v_k, double v_tail,
                      double u_tail, double q_start, double gamma);

/// AOC-style advantage: bootstrap at the option termination, ignoring later
/// rewards.
double truncated_advantage(std::span<const double> rewards, int k, double v_k, double u_tail,
                           double q_start, double gamma);

/// Plain N-step advantage; `tail_value` is the bootstrap at x_{t+h}.
double n_step_advantage(std::span<const double> rewards, double tail_value, double q_start,
                        double gamma);

/// Per-position N-step advantages for a single-policy window (the A2C path):
/// A_t = sum_i gamma^i R_{t+i} + gamma^{h} V(x_N) - values[t].
std::vector<double> a2c_advantages(std::span<const double> rewards, double v_bootstrap,
                                   std::span<const double> values, double gamma);

/// Loss term realizing the option-critic termination gradient
/// gamma * dbeta(x) * (q - v) for each entry; `coef[i]` = gamma * (q_i - v_i)
/// computed with stop-gradient.
nn::Var aoc_termination_loss(nn::Graph& g, nn::Var beta_logit_col, const nn::Vector& coef,
                             double normalizer);

// ---------------------------------------------------------------------------
// Rollout data

struct StepRecord {
    int state = 0;
    int option = 0;
    int action = 0;
    int next_state = 0;
    double reward = 0.0;
    bool done = false;
    bool truncated = false;
    bool opt_start = false;   // a new option was selected at `state`
    int checked_option = -1;  // option whose termination was sampled at `state`
    bool b = false;           // the sampled termination bit
};

struct Rollout {
    int n_actors = 0;
    int len = 0;
    std::vector<StepRecord> steps;       // actor-major [a * len + t]
    std::vector<int> bootstrap_state;    // per actor: state after the window
    std::vector<int> bootstrap_option;   // per actor: running option, -1 if none
    std::vector<infomax::CompletedSegment> segments;  // completed this window
    std::vector<double> episode_returns;              // episodes finished this window

    const StepRecord& at(int actor, int t) const {
        return steps[static_cast<std::size_t>(actor) * len + t];
    }
};

struct TrainingStats {
    long long env_steps = 0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double termination_loss = 0.0;
    double entropy = 0.0;
    double classifier_loss_p = 0.0;
    double classifier_loss_mu = 0.0;
    double grad_norm = 0.0;          // before clipping
    double clipped_grad_norm = 0.0;  // after clipping, <= max_grad_norm
    double mean_episode_return = std::numeric_limits<double>::quiet_NaN();
    long long episodes = 0;
    std::vector<double> option_usage;
    double mean_option_duration = std::numeric_limits<double>::quiet_NaN();
    double exact_mi = std::numeric_limits<double>::quiet_NaN();  // filled when the oracle is attached
};

// ---------------------------------------------------------------------------
// Trainer

/// Synchronous actors + single learner. One train_iteration collects one
/// window from every actor, applies the gradient update, then fits the
/// option classifiers from the replay buffer.
class Trainer {
public:
    Trainer(const mdp::TabularMDP& env, const AgentConfig& config, std::uint64_t seed);
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    TrainingStats train_iteration();
    long long env_steps() const { return env_steps_; }

    const AgentConfig& config() const { return config_; }
    const nn::OptionNetwork& network() const { return net_; }
    nn::OptionNetwork& network() { return net_; }
    const infomax::TransitionBuffer& buffer() const { return buffer_; }
    const mdp::TabularMDP& env() const { return env_; }

    /// Replaces the environment dynamics in place (goal relocation). The
    /// state space must be unchanged.
    void update_environment(const mdp::TabularMDP& env);

    /// Mean undiscounted return over fresh evaluation episodes; options are
    /// chosen eps-greedily over Q with eps = config.eps_opt and actions are
    /// sampled from the option policy.
    double evaluate(int n_episodes, std::mt19937_64& rng) const;

    /// Tabular snapshot of the current policy/termination/value heads with
    /// the selection rule folded into a one-hot mu table.
    oracle::TabularOptionParams tabular_params() const;

    void save_checkpoint(std::ostream& out) const;
    void load_checkpoint(std::istream& in);

    // exposed for tests
    Rollout collect_rollout();
    struct UpdateReport {
        double policy_loss = 0.0, value_loss = 0.0, termination_loss = 0.0, entropy = 0.0;
        double classifier_loss_p = 0.0, classifier_loss_mu = 0.0, grad_norm = 0.0;
    };
    UpdateReport update(const Rollout& rollout);

private:
    struct ValueCache {
        nn::OptionNetwork::Heads heads;
        nn::Matrix mu_probs;      // softmax of mu logits
        nn::Matrix beta_probs;    // sigmoid of beta logits
        std::vector<double> v;    // per-state V under the selection rule (0 at terminals)
        std::vector<int> greedy;  // selection-rule choice per state
    };
    ValueCache value_cache() const;
    int select_new_option(const ValueCache& cache, int state, std::mt19937_64& rng) const;
    double u_value(const ValueCache& cache, int state, int option) const;
    int sample_action(const ValueCache& cache, int state, int option, std::mt19937_64& rng) const;
    double position_advantage(const Rollout& rollout, const ValueCache& cache, int actor,
                              int t) const;

    AgentConfig config_;
    mdp::TabularMDP env_;
    nn::OptionNetwork net_;
    nn::Optimizer optimizer_;
    infomax::TransitionBuffer buffer_;
    std::vector<mdp::Episode> episodes_;
    std::vector<options::ActiveOption> active_;
    std::vector<std::mt19937_64> actor_rngs_;
    std::mt19937_64 learner_rng_;
    long long env_steps_ = 0;
};

/// Termination events and per-option usage observed during evaluation.
/// `forced` marks terminations caused by the episode ending rather than a
/// sampled b = 1.
struct EvalTrace {
    struct Termination {
        int start_state = -1;
        int final_state = -1;
        int option = -1;
        bool forced = false;
    };
    std::vector<Termination> terminations;
    std::vector<long long> option_steps;
};

/// Standalone evaluation used by the CLI on loaded checkpoints.
double evaluate_policy(const nn::OptionNetwork& net, const mdp::TabularMDP& env,
                       const AgentConfig& config, int n_episodes, std::mt19937_64& rng,
                       EvalTrace* trace = nullptr);

}  // namespace imoc::agent
