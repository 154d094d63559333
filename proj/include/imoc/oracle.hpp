#pragma once

#include "imoc/mdp.hpp"

#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace imoc::oracle {

using mdp::Matrix;
using mdp::Vector;

struct NonTerminatingOption : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Where the termination Bernoulli is sampled.
///  - check_at_start: the recursion as written; the option may terminate in
///    its start state before acting. The termination-gradient theorem is an
///    exact identity under this convention.
///  - check_after_step: the executable flow; the option always takes one
///    action, then termination is checked at each arrival state.
enum class Convention { check_at_start, check_after_step };

/// Tabular option parameters: per-option termination logits, per-option
/// action distributions, and the policy over options.
struct TabularOptionParams {
    Matrix beta_logit;        // n_states x n_options
    std::vector<Matrix> pi;   // per option: n_states x n_actions, rows sum to 1
    Matrix mu;                // n_states x n_options, rows sum to 1

    int n_states() const { return static_cast<int>(beta_logit.rows()); }
    int n_options() const { return static_cast<int>(beta_logit.cols()); }
    Matrix beta() const { return (1.0 / (1.0 + (-beta_logit.array()).exp())).matrix(); }
};

/// Policy-induced state kernel p^pi(x'|x) = sum_a pi(a|x) p(x'|x,a).
/// Terminal states are absorbing.
Matrix policy_kernel(const mdp::TabularMDP& m, const Matrix& pi);

/// Exact option transition matrix P^o(x_f | x_s) by direct linear solve.
/// Throws NonTerminatingOption when the option fails to terminate from some
/// state (singular continue-dynamics). Terminal MDP states force
/// termination.
Matrix exact_option_transition(const mdp::TabularMDP& m, const TabularOptionParams& params,
                               int option, Convention convention);

/// Everything the estimators need, computed exactly: per-option transition
/// matrices, the marginal, the Bayes inverse model, and the (frozen) start
/// distribution.
struct ExactOptionModel {
    Convention convention = Convention::check_at_start;
    std::vector<Matrix> p_option;   // P^o
    Matrix p_marginal;              // sum_o mu(o|x_s) P^o(x_f|x_s)
    std::vector<Matrix> inverse;    // p(o | x_s, x_f); NaN where P(x_f|x_s) = 0
    Matrix d_start;                 // d(x_s, o) joint over option starts
};

/// `d_state` is the start-state distribution; the joint uses mu from params.
ExactOptionModel build_exact_model(const mdp::TabularMDP& m, const TabularOptionParams& params,
                                   const Vector& d_state, Convention convention);

/// Same, with an explicit joint start distribution (rows x_s, cols o).
ExactOptionModel build_exact_model_joint(const mdp::TabularMDP& m,
                                         const TabularOptionParams& params, const Matrix& d_joint,
                                         Convention convention);

/// I(X_f; O | X_s) = H(X_f|X_s) - H(X_f|X_s,O) under the model's start
/// distribution, by exact summation.
double exact_conditional_mi(const ExactOptionModel& model);

/// H(X_f|X_s) and H(X_f|X_s,O) separately (same summation).
std::pair<double, double> exact_conditional_entropies(const ExactOptionModel& model);

/// Bayes inverse p(o|x_s,x_f) = mu(o|x_s) P^o(x_f|x_s) / P(x_f|x_s);
/// entries for unreachable pairs are NaN.
std::vector<Matrix> exact_inverse_model(const std::vector<Matrix>& p_option, const Matrix& mu);

/// Exact gradients of the two conditional entropies with respect to every
/// termination logit, holding the start distribution fixed. Each matrix is
/// n_states x n_options, entry (x, o) = d/d l^o(x).
struct EntropyGradients {
    Matrix h_xf_xs;
    Matrix h_xf_xs_o;
    Matrix mi() const { return h_xf_xs - h_xf_xs_o; }
};
EntropyGradients exact_entropy_gradients(const mdp::TabularMDP& m,
                                         const TabularOptionParams& params, const Matrix& d_joint,
                                         Convention convention);

/// Analytic d P^o(x_f|x_s) / d l^o(y) for all (x_s, x_f), one perturbed
/// logit y. Under check_at_start this is the termination-gradient-theorem
/// expression; check_after_step carries an extra (1 - beta(y)) factor.
Matrix option_transition_gradient(const Matrix& p_option, const Vector& beta, int y,
                                  Convention convention);

/// Max absolute deviation between the termination-gradient-theorem
/// expression and central finite differences of the exact P^o over all
/// logit coordinates of `option`.
double check_termination_gradient_theorem(const mdp::TabularMDP& m,
                                          const TabularOptionParams& params, int option,
                                          Convention convention = Convention::check_at_start,
                                          double h = 1e-5);

/// Central finite differences of the conditional entropies w.r.t. every
/// termination logit (start distribution frozen).
EntropyGradients entropy_gradients_fd(const mdp::TabularMDP& m, const TabularOptionParams& params,
                                      const Matrix& d_joint, Convention convention,
                                      double h = 1e-5);

enum class Estimator { prop1_marginal, prop1_conditional, prop2 };

/// Monte Carlo gradient estimate from simulated option executions started
/// from the model's joint start distribution. The exact model supplies the
/// true P, P^o or p(o|x_s,x_f) inside the estimator, isolating sampling
/// error. Returns per-coordinate mean and standard error of the mean.
struct McEstimate {
    Matrix mean;       // n_states x n_options
    Matrix std_error;  // same shape
    long long n = 0;
};
McEstimate mc_gradient_estimate(const mdp::TabularMDP& m, const TabularOptionParams& params,
                                const ExactOptionModel& model, Estimator estimator,
                                long long n_samples, std::mt19937_64& rng);

/// Option-start distribution estimated by simulating the option process for
/// `n_steps` environment steps (used when attaching the oracle to a trained
/// agent). Returns the joint (x_s, o) frequency table.
Matrix estimate_start_distribution(const mdp::TabularMDP& m, const TabularOptionParams& params,
                                   long long n_steps, std::mt19937_64& rng);

/// Random tabular fixture for the verification suites: `random`-kind MDP
/// plus random option parameters with beta in (beta_lo, beta_hi) and
/// policies sharpened toward distinct modes per option.
struct OracleInstance {
    mdp::TabularMDP mdp;
    TabularOptionParams params;
    Matrix d_joint;
};
OracleInstance random_instance(int n_states, int n_options, std::mt19937_64& rng,
                               double beta_lo = 0.2, double beta_hi = 0.8,
                               double policy_sharpness = 3.0);

}  // namespace imoc::oracle
