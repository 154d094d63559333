#include "imoc/ppo_ext.hpp"

#include <algorithm>

namespace imoc::ppo {

double ugoae(const TdSequences& seq) {
    if (seq.n < 1) throw std::invalid_argument("ugoae: window length must be >= 1");
    if (seq.k < 0) throw std::invalid_argument("ugoae: negative termination offset");
    if (seq.lambda < 0.0 || seq.lambda > 1.0)
        throw std::invalid_argument("ugoae: lambda outside [0,1]");
    const double gl = seq.gamma * seq.lambda;

    if (seq.k < seq.n) {
        if (static_cast<int>(seq.delta_option.size()) < seq.k + 1)
            throw std::invalid_argument("ugoae: option TD sequence shorter than k+1");
        if (static_cast<int>(seq.delta_marginal.size()) < seq.n + 1)
            throw std::invalid_argument("ugoae: marginal TD sequence shorter than n+1");
        double head = 0.0, w = 1.0;
        for (int i = 0; i <= seq.k; ++i) {
            head += w * seq.delta_option[static_cast<std::size_t>(i)];
            w *= gl;
        }
        double upgoing = 0.0;  // w == (gl)^{k+1}
        for (int i = seq.k + 1; i <= seq.n; ++i) {
            upgoing += w * seq.delta_marginal[static_cast<std::size_t>(i)];
            w *= gl;
        }
        return head + std::max(upgoing, 0.0);
    }

    if (static_cast<int>(seq.delta_option.size()) < seq.n)
        throw std::invalid_argument("ugoae: option TD sequence shorter than n");
    double head = 0.0, w = 1.0;
    for (int i = 0; i < seq.n; ++i) {
        head += w * seq.delta_option[static_cast<std::size_t>(i)];
        w *= gl;
    }
    return head + w * (seq.tail_reward + seq.gamma * seq.tail_u - seq.tail_q);
}

ClippedBetaTerm clipped_beta_term(double logit, double logit_old, double eps_beta,
                                  double beta_old, double coef) {
    if (eps_beta <= 0.0) throw std::invalid_argument("clipped_beta_term: eps_beta must be > 0");
    const double diff = logit - logit_old;
    const double clipped = std::clamp(diff, -eps_beta, eps_beta);
    ClippedBetaTerm out;
    out.value = clipped * beta_old * coef;
    out.grad_logit = (diff > -eps_beta && diff < eps_beta) ? beta_old * coef : 0.0;
    return out;
}

}  // namespace imoc::ppo
