#pragma once

#include <stdexcept>
#include <vector>

namespace imoc::ppo {

/// Inputs for the upgoing general option advantage at one position t.
/// `delta_option[i]` = option TD error at t+i, `delta_marginal[i]` = TD
/// error of the marginalized option value at t+i. When the option outlives
/// the window (k >= n) the tail fields supply R_{t+N}, U(x_{t+N+1}, o) and
/// Q(x_{t+N}, o).
struct TdSequences {
    std::vector<double> delta_marginal;
    std::vector<double> delta_option;
    int k = 0;  // option terminates at step t + k
    int n = 0;  // window length
    double gamma = 0.99;
    double lambda = 0.95;
    double tail_reward = 0.0;
    double tail_u = 0.0;
    double tail_q = 0.0;
};

/// Upgoing general option advantage estimate.
///   k < n: sum_{i=0..k} (gl)^i delta_o[t+i] + max(sum_{i=k+1..n} (gl)^i delta[t+i], 0)
///   else : sum_{i=0..n-1} (gl)^i delta_o[t+i]
///          + (gl)^n (R_{t+n} + gamma U(x_{t+n+1}) - Q(x_{t+n}, o))
/// Throws on inconsistent sequence lengths or lambda outside [0,1].
double ugoae(const TdSequences& seq);

/// Value and logit-gradient of one clipped termination-loss term:
/// clip(l - l_old, -eps, eps) * beta_old * coef, with
/// coef = log p(o|x_s,x) - log p(o|x_s,x_f) treated as a constant.
struct ClippedBetaTerm {
    double value = 0.0;
    double grad_logit = 0.0;
};
ClippedBetaTerm clipped_beta_term(double logit, double logit_old, double eps_beta,
                                  double beta_old, double coef);

}  // namespace imoc::ppo
