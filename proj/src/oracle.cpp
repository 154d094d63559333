#include "imoc/oracle.hpp"

#include <cmath>

namespace imoc::oracle {

namespace {

constexpr double kTiny = 1e-300;

double xlogy(double x, double y) { return x > 0.0 ? x * std::log(std::max(y, kTiny)) : 0.0; }

/// Termination probabilities with terminal states forced to 1 (an episode
/// end always ends the running option).
Vector effective_beta(const mdp::TabularMDP& m, const TabularOptionParams& params, int option) {
    Vector beta = (1.0 / (1.0 + (-params.beta_logit.col(option).array()).exp())).matrix();
    for (int s = 0; s < m.n_states; ++s)
        if (m.is_terminal(s)) beta[s] = 1.0;
    return beta;
}

}  // namespace

Matrix policy_kernel(const mdp::TabularMDP& m, const Matrix& pi) {
    Matrix t = Matrix::Zero(m.n_states, m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        if (m.is_terminal(s)) {
            t(s, s) = 1.0;
            continue;
        }
        for (int a = 0; a < m.n_actions; ++a)
            t.row(s) += pi(s, a) * m.transition.row(s * m.n_actions + a);
    }
    return t;
}

Matrix exact_option_transition(const mdp::TabularMDP& m, const TabularOptionParams& params,
                               int option, Convention convention) {
    const int n = m.n_states;
    const Matrix t = policy_kernel(m, params.pi[static_cast<std::size_t>(option)]);
    const Vector beta = effective_beta(m, params, option);

    // literal recursion: P = B + (I - B) T P  =>  (I - (I-B) T) P = B
    Matrix lhs = Matrix::Identity(n, n) - ((1.0 - beta.array()).matrix().asDiagonal() * t);
    Matrix rhs = beta.asDiagonal();
    Eigen::PartialPivLU<Matrix> lu(lhs);
    Matrix p = lu.solve(rhs);

    const double residual = (lhs * p - rhs).cwiseAbs().maxCoeff();
    bool rows_ok = true;
    for (int s = 0; s < n && rows_ok; ++s) {
        double sum = p.row(s).sum();
        if (!std::isfinite(sum) || std::abs(sum - 1.0) > 1e-6 || p.row(s).minCoeff() < -1e-9)
            rows_ok = false;
    }
    if (!rows_ok || !std::isfinite(residual) || residual > 1e-8)
        throw NonTerminatingOption("option " + std::to_string(option) +
                                   " does not terminate from every state");
    p = p.cwiseMax(0.0);

    if (convention == Convention::check_after_step) p = t * p;
    return p;
}

std::vector<Matrix> exact_inverse_model(const std::vector<Matrix>& p_option, const Matrix& mu) {
    const int n = static_cast<int>(p_option[0].rows());
    const int n_opt = static_cast<int>(p_option.size());
    Matrix marginal = Matrix::Zero(n, n);
    for (int o = 0; o < n_opt; ++o)
        marginal += mu.col(o).asDiagonal() * p_option[static_cast<std::size_t>(o)];
    std::vector<Matrix> inv(static_cast<std::size_t>(n_opt));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int o = 0; o < n_opt; ++o) {
        inv[static_cast<std::size_t>(o)] = Matrix::Constant(n, n, nan);
        for (int xs = 0; xs < n; ++xs)
            for (int xf = 0; xf < n; ++xf)
                if (marginal(xs, xf) > 0.0)
                    inv[static_cast<std::size_t>(o)](xs, xf) =
                        mu(xs, o) * p_option[static_cast<std::size_t>(o)](xs, xf) / marginal(xs, xf);
    }
    return inv;
}

ExactOptionModel build_exact_model_joint(const mdp::TabularMDP& m,
                                         const TabularOptionParams& params, const Matrix& d_joint,
                                         Convention convention) {
    const int n = m.n_states;
    const int n_opt = params.n_options();
    ExactOptionModel model;
    model.convention = convention;
    model.d_start = d_joint / d_joint.sum();

    // the conditional over options implied by the joint; params.mu fills
    // rows with no start mass
    Matrix mu(n, n_opt);
    for (int s = 0; s < n; ++s) {
        double mass = model.d_start.row(s).sum();
        mu.row(s) = mass > 0.0 ? (model.d_start.row(s) / mass).eval() : params.mu.row(s);
    }

    for (int o = 0; o < n_opt; ++o)
        model.p_option.push_back(exact_option_transition(m, params, o, convention));
    model.p_marginal = Matrix::Zero(n, n);
    for (int o = 0; o < n_opt; ++o)
        model.p_marginal += mu.col(o).asDiagonal() * model.p_option[static_cast<std::size_t>(o)];
    model.inverse = exact_inverse_model(model.p_option, mu);
    return model;
}

ExactOptionModel build_exact_model(const mdp::TabularMDP& m, const TabularOptionParams& params,
                                   const Vector& d_state, Convention convention) {
    Matrix joint = d_state.asDiagonal() * params.mu;
    return build_exact_model_joint(m, params, joint, convention);
}

std::pair<double, double> exact_conditional_entropies(const ExactOptionModel& model) {
    const int n = static_cast<int>(model.p_marginal.rows());
    const int n_opt = static_cast<int>(model.p_option.size());
    double h_marginal = 0.0, h_conditional = 0.0;
    for (int xs = 0; xs < n; ++xs) {
        const double d_xs = model.d_start.row(xs).sum();
        if (d_xs <= 0.0) continue;
        for (int xf = 0; xf < n; ++xf)
            h_marginal -= d_xs * xlogy(model.p_marginal(xs, xf), model.p_marginal(xs, xf));
        for (int o = 0; o < n_opt; ++o) {
            const double d_xo = model.d_start(xs, o);
            if (d_xo <= 0.0) continue;
            const Matrix& p = model.p_option[static_cast<std::size_t>(o)];
            for (int xf = 0; xf < n; ++xf) h_conditional -= d_xo * xlogy(p(xs, xf), p(xs, xf));
        }
    }
    return {h_marginal, h_conditional};
}

double exact_conditional_mi(const ExactOptionModel& model) {
    auto [h1, h2] = exact_conditional_entropies(model);
    return h1 - h2;
}

Matrix option_transition_gradient(const Matrix& p_option, const Vector& beta, int y,
                                  Convention convention) {
    const int n = static_cast<int>(p_option.rows());
    const double factor = convention == Convention::check_at_start ? 1.0 : 1.0 - beta[y];
    Matrix g(n, n);
    for (int xs = 0; xs < n; ++xs) {
        const double w = factor * p_option(xs, y);
        for (int xf = 0; xf < n; ++xf)
            g(xs, xf) = w * ((xf == y ? 1.0 : 0.0) - p_option(y, xf));
    }
    return g;
}

EntropyGradients exact_entropy_gradients(const mdp::TabularMDP& m,
                                         const TabularOptionParams& params, const Matrix& d_joint,
                                         Convention convention) {
    ExactOptionModel model = build_exact_model_joint(m, params, d_joint, convention);
    const int n = m.n_states;
    const int n_opt = params.n_options();
    EntropyGradients out;
    out.h_xf_xs = Matrix::Zero(n, n_opt);
    out.h_xf_xs_o = Matrix::Zero(n, n_opt);

    for (int o = 0; o < n_opt; ++o) {
        const Matrix& p = model.p_option[static_cast<std::size_t>(o)];
        const Vector beta = effective_beta(m, params, o);
        for (int y = 0; y < n; ++y) {
            if (m.is_terminal(y)) continue;  // logit has no effect, beta forced to 1
            const double factor =
                convention == Convention::check_at_start ? 1.0 : 1.0 - beta[y];
            double g_marginal = 0.0, g_conditional = 0.0;
            for (int xs = 0; xs < n; ++xs) {
                const double w = model.d_start(xs, o) * factor * p(xs, y);
                if (w == 0.0) continue;
                // bracket of the exact-gradient identity: value at the
                // perturbed state minus its expectation over the next
                // terminating state (the +1 terms cancel)
                double bm = std::log(std::max(model.p_marginal(xs, y), kTiny)) + 1.0;
                double bc = std::log(std::max(p(xs, y), kTiny)) + 1.0;
                for (int z = 0; z < n; ++z) {
                    if (p(y, z) == 0.0) continue;
                    bm -= p(y, z) * (std::log(std::max(model.p_marginal(xs, z), kTiny)) + 1.0);
                    bc -= p(y, z) * (std::log(std::max(p(xs, z), kTiny)) + 1.0);
                }
                g_marginal -= w * bm;
                g_conditional -= w * bc;
            }
            out.h_xf_xs(y, o) = g_marginal;
            out.h_xf_xs_o(y, o) = g_conditional;
        }
    }
    return out;
}

double check_termination_gradient_theorem(const mdp::TabularMDP& m,
                                          const TabularOptionParams& params, int option,
                                          Convention convention, double h) {
    const Matrix p = exact_option_transition(m, params, option, convention);
    const Vector beta = effective_beta(m, params, option);
    double max_dev = 0.0;
    TabularOptionParams perturbed = params;
    for (int y = 0; y < m.n_states; ++y) {
        Matrix analytic;
        if (m.is_terminal(y)) {
            analytic = Matrix::Zero(m.n_states, m.n_states);
        } else {
            analytic = option_transition_gradient(p, beta, y, convention);
        }
        perturbed.beta_logit(y, option) = params.beta_logit(y, option) + h;
        Matrix p_hi = exact_option_transition(m, perturbed, option, convention);
        perturbed.beta_logit(y, option) = params.beta_logit(y, option) - h;
        Matrix p_lo = exact_option_transition(m, perturbed, option, convention);
        perturbed.beta_logit(y, option) = params.beta_logit(y, option);
        Matrix fd = (p_hi - p_lo) / (2.0 * h);
        max_dev = std::max(max_dev, (analytic - fd).cwiseAbs().maxCoeff());
    }
    return max_dev;
}

EntropyGradients entropy_gradients_fd(const mdp::TabularMDP& m, const TabularOptionParams& params,
                                      const Matrix& d_joint, Convention convention, double h) {
    const int n = m.n_states;
    const int n_opt = params.n_options();
    EntropyGradients out;
    out.h_xf_xs = Matrix::Zero(n, n_opt);
    out.h_xf_xs_o = Matrix::Zero(n, n_opt);
    TabularOptionParams perturbed = params;
    for (int o = 0; o < n_opt; ++o) {
        for (int y = 0; y < n; ++y) {
            perturbed.beta_logit(y, o) = params.beta_logit(y, o) + h;
            auto hi = exact_conditional_entropies(build_exact_model_joint(m, perturbed, d_joint, convention));
            perturbed.beta_logit(y, o) = params.beta_logit(y, o) - h;
            auto lo = exact_conditional_entropies(build_exact_model_joint(m, perturbed, d_joint, convention));
            perturbed.beta_logit(y, o) = params.beta_logit(y, o);
            out.h_xf_xs(y, o) = (hi.first - lo.first) / (2.0 * h);
            out.h_xf_xs_o(y, o) = (hi.second - lo.second) / (2.0 * h);
        }
    }
    return out;
}

McEstimate mc_gradient_estimate(const mdp::TabularMDP& m, const TabularOptionParams& params,
                                const ExactOptionModel& model, Estimator estimator,
                                long long n_samples, std::mt19937_64& rng) {
    const int n = m.n_states;
    const int n_opt = params.n_options();
    std::vector<Matrix> kernels;
    std::vector<Vector> betas;
    for (int o = 0; o < n_opt; ++o) {
        kernels.push_back(policy_kernel(m, params.pi[static_cast<std::size_t>(o)]));
        betas.push_back(effective_beta(m, params, o));
    }

    // flattened start distribution over (x_s, o)
    std::vector<double> start_prob;
    start_prob.reserve(static_cast<std::size_t>(n) * n_opt);
    for (int s = 0; s < n; ++s)
        for (int o = 0; o < n_opt; ++o) start_prob.push_back(model.d_start(s, o));
    std::discrete_distribution<int> start_dist(start_prob.begin(), start_prob.end());
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Matrix mean = Matrix::Zero(n, n_opt);
    Matrix m2 = Matrix::Zero(n, n_opt);
    Matrix contrib = Matrix::Zero(n, n_opt);
    std::vector<int> checked;
    constexpr int kMaxSteps = 1000000;

    for (long long it = 0; it < n_samples; ++it) {
        const int flat = start_dist(rng);
        const int xs = flat / n_opt;
        const int o = flat % n_opt;
        const Vector& beta = betas[static_cast<std::size_t>(o)];
        const Matrix& kernel = kernels[static_cast<std::size_t>(o)];

        checked.clear();
        int y = xs;
        if (model.convention == Convention::check_after_step)
            y = mdp::sample_categorical(kernel.row(xs), rng);
        int guard = 0;
        while (true) {
            checked.push_back(y);
            if (unif(rng) < beta[y]) break;
            y = mdp::sample_categorical(kernel.row(y), rng);
            if (++guard > kMaxSteps)
                throw NonTerminatingOption("mc_gradient_estimate: trajectory did not terminate");
        }
        const int xf = y;

        contrib.setZero();
        const Matrix& p_o = model.p_option[static_cast<std::size_t>(o)];
        const Matrix& inv_o = model.inverse[static_cast<std::size_t>(o)];
        for (int x : checked) {
            double coef = 0.0;
            switch (estimator) {
                case Estimator::prop1_marginal:
                    coef = -(std::log(std::max(model.p_marginal(xs, x), kTiny)) -
                             std::log(std::max(model.p_marginal(xs, xf), kTiny)));
                    break;
                case Estimator::prop1_conditional:
                    coef = -(std::log(std::max(p_o(xs, x), kTiny)) -
                             std::log(std::max(p_o(xs, xf), kTiny)));
                    break;
                case Estimator::prop2:
                    coef = std::log(std::max(inv_o(xs, x), kTiny)) -
                           std::log(std::max(inv_o(xs, xf), kTiny));
                    break;
            }
            contrib(x, o) += beta[x] * coef;
        }

        // Welford update over the whole coordinate grid
        const double k = static_cast<double>(it + 1);
        Matrix delta = contrib - mean;
        mean += delta / k;
        m2.array() += delta.array() * (contrib - mean).array();
    }

    McEstimate out;
    out.mean = mean;
    out.n = n_samples;
    out.std_error = (m2.array() / std::max<double>(1.0, static_cast<double>(n_samples - 1)) /
                     static_cast<double>(n_samples))
                        .sqrt()
                        .matrix();
    return out;
}

Matrix estimate_start_distribution(const mdp::TabularMDP& m, const TabularOptionParams& params,
                                   long long n_steps, std::mt19937_64& rng) {
    const int n = m.n_states;
    const int n_opt = params.n_options();
    std::vector<Matrix> kernels;
    std::vector<Vector> betas;
    for (int o = 0; o < n_opt; ++o) {
        kernels.push_back(policy_kernel(m, params.pi[static_cast<std::size_t>(o)]));
        betas.push_back(effective_beta(m, params, o));
    }
    Matrix counts = Matrix::Zero(n, n_opt);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    int state = mdp::sample_categorical(m.initial_dist.transpose(), rng);
    int option = -1;
    for (long long t = 0; t < n_steps; ++t) {
        if (m.is_terminal(state)) {
            state = mdp::sample_categorical(m.initial_dist.transpose(), rng);
            option = -1;
        }
        if (option < 0) {
            option = mdp::sample_categorical(params.mu.row(state), rng);
            counts(state, option) += 1.0;
        }
        state = mdp::sample_categorical(kernels[static_cast<std::size_t>(option)].row(state), rng);
        if (unif(rng) < betas[static_cast<std::size_t>(option)][state]) option = -1;
    }
    double total = counts.sum();
    return total > 0.0 ? Matrix(counts / total) : counts;
}

OracleInstance random_instance(int n_states, int n_options, std::mt19937_64& rng, double beta_lo,
                               double beta_hi, double policy_sharpness) {
    OracleInstance inst;
    inst.mdp = mdp::build_test_mdp(mdp::TestMdpKind::random, n_states, rng);
    const int n_actions = inst.mdp.n_actions;
    auto logit = [](double p) { return std::log(p / (1.0 - p)); };
    std::uniform_real_distribution<double> beta_unif(logit(beta_lo), logit(beta_hi));
    std::normal_distribution<double> gauss(0.0, 1.0);

    inst.params.beta_logit = Matrix(n_states, n_options);
    for (Eigen::Index i = 0; i < inst.params.beta_logit.size(); ++i)
        inst.params.beta_logit(i) = beta_unif(rng);
    for (int o = 0; o < n_options; ++o) {
        Matrix pi(n_states, n_actions);
        for (int s = 0; s < n_states; ++s) {
            Eigen::RowVectorXd row(n_actions);
            for (int a = 0; a < n_actions; ++a) row[a] = policy_sharpness * gauss(rng);
            row.array() -= row.maxCoeff();
            Eigen::RowVectorXd p = row.array().exp();
            pi.row(s) = p / p.sum();
        }
        inst.params.pi.push_back(pi);
    }
    inst.params.mu = Matrix::Constant(n_states, n_options, 1.0 / n_options);
    inst.d_joint = Matrix::Constant(n_states, n_options, 1.0 / (n_states * n_options));
    return inst;
}

}  // namespace imoc::oracle
