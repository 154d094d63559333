#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "imoc/oracle.hpp"
#include "imoc/rng.hpp"

#include <cmath>

using namespace imoc;
using oracle::Convention;
using oracle::Matrix;
using oracle::Vector;

namespace {

/// Two options on a 3-state fork: both policies are deterministic
/// (option 0 -> state 1, option 1 -> state 2) and both terminate surely at
/// the arrival state. Starting from state 0 the terminating states are
/// disjoint.
oracle::OracleInstance fork_instance() {
    oracle::OracleInstance inst;
    auto& m = inst.mdp;
    m.n_states = 3;
    m.n_actions = 2;
    m.transition = Matrix::Zero(6, 3);
    m.transition(0 * 2 + 0, 1) = 1.0;
    m.transition(0 * 2 + 1, 2) = 1.0;
    m.transition(1 * 2 + 0, 1) = 1.0;
    m.transition(1 * 2 + 1, 1) = 1.0;
    m.transition(2 * 2 + 0, 2) = 1.0;
    m.transition(2 * 2 + 1, 2) = 1.0;
    m.reward = Matrix::Zero(3, 2);
    m.terminal.assign(3, false);
    m.initial_dist = Vector::Zero(3);
    m.initial_dist[0] = 1.0;

    inst.params.beta_logit = Matrix::Constant(3, 2, 40.0);  // beta ~ 1 everywhere
    Matrix pi0(3, 2), pi1(3, 2);
    pi0 << 1, 0, 1, 0, 1, 0;
    pi1 << 0, 1, 0, 1, 0, 1;
    inst.params.pi = {pi0, pi1};
    inst.params.mu = Matrix::Constant(3, 2, 0.5);
    inst.d_joint = Matrix::Zero(3, 2);
    inst.d_joint(0, 0) = 0.5;
    inst.d_joint(0, 1) = 0.5;
    return inst;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("option transition rows are distributions; degenerate beta cases") {
    auto rng = make_rng(31);
    auto inst = oracle::random_instance(5, 2, rng);

    for (auto conv : {Convention::check_at_start, Convention::check_after_step}) {
        for (int o = 0; o < 2; ++o) {
            Matrix p = oracle::exact_option_transition(inst.mdp, inst.params, o, conv);
            for (int s = 0; s < 5; ++s) CHECK(p.row(s).sum() == doctest::Approx(1.0).epsilon(1e-8));
        }
    }

    // beta = 1: immediate self-termination under the literal recursion, one
    // mandatory policy step under the executable convention
    auto sure = inst;
    sure.params.beta_logit.setConstant(50.0);
    Matrix lit =
        oracle::exact_option_transition(sure.mdp, sure.params, 0, Convention::check_at_start);
    CHECK(max_abs(lit - Matrix::Identity(5, 5)) <= 1e-12);
    Matrix agent_p =
        oracle::exact_option_transition(sure.mdp, sure.params, 0, Convention::check_after_step);
    Matrix kernel = oracle::policy_kernel(sure.mdp, sure.params.pi[0]);
    CHECK(max_abs(agent_p - kernel) <= 1e-12);

    // beta = 0: the option never terminates
    auto never = inst;
    never.params.beta_logit.setConstant(-200.0);
    CHECK_THROWS_AS(
        oracle::exact_option_transition(never.mdp, never.params, 0, Convention::check_at_start),
        oracle::NonTerminatingOption);
}

TEST_CASE("exact option transition matches Monte Carlo rollout frequencies") {
    auto rng = make_rng(32);
    auto inst = oracle::random_instance(4, 2, rng);
    for (auto conv : {Convention::check_at_start, Convention::check_after_step}) {
        Matrix p = oracle::exact_option_transition(inst.mdp, inst.params, 0, conv);
        Matrix kernel = oracle::policy_kernel(inst.mdp, inst.params.pi[0]);
        Vector beta = (1.0 / (1.0 + (-inst.params.beta_logit.col(0).array()).exp())).matrix();
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const int n_rollouts = 100000;
        for (int xs = 0; xs < 4; ++xs) {
            Vector freq = Vector::Zero(4);
            for (int it = 0; it < n_rollouts; ++it) {
                int y = xs;
                if (conv == Convention::check_after_step)
                    y = mdp::sample_categorical(kernel.row(y), rng);
                while (unif(rng) >= beta[y]) y = mdp::sample_categorical(kernel.row(y), rng);
                freq[y] += 1.0;
            }
            freq /= n_rollouts;
            double tv = 0.5 * (freq.transpose() - p.row(xs)).cwiseAbs().sum();
            CHECK(tv <= 1e-2);
        }
    }
}

TEST_CASE("termination gradient theorem is exact under the literal recursion") {
    auto rng = make_rng(33);
    for (int trial = 0; trial < 5; ++trial) {
        std::uniform_int_distribution<int> sz(4, 6), no(2, 3);
        auto inst = oracle::random_instance(sz(rng), no(rng), rng);
        for (int o = 0; o < inst.params.n_options(); ++o) {
            double dev = oracle::check_termination_gradient_theorem(inst.mdp, inst.params, o,
                                                                    Convention::check_at_start);
            CHECK(dev <= 1e-5);
            // the executable-flow analogue carries the extra (1 - beta) factor
            double dev_agent = oracle::check_termination_gradient_theorem(
                inst.mdp, inst.params, o, Convention::check_after_step);
            CHECK(dev_agent <= 1e-5);
        }
    }
}

TEST_CASE("termination gradient: unreachable perturbations and single-state MDPs are zero") {
    // two disconnected 2-cycles; states 2,3 unreachable from 0,1
    mdp::TabularMDP m;
    m.n_states = 4;
    m.n_actions = 1;
    m.transition = Matrix::Zero(4, 4);
    m.transition(0, 1) = 1.0;
    m.transition(1, 0) = 1.0;
    m.transition(2, 3) = 1.0;
    m.transition(3, 2) = 1.0;
    m.reward = Matrix::Zero(4, 1);
    m.terminal.assign(4, false);
    m.initial_dist = Vector::Constant(4, 0.25);

    oracle::TabularOptionParams params;
    params.beta_logit = Matrix::Constant(4, 1, 0.3);
    params.pi = {Matrix::Constant(4, 1, 1.0)};
    params.mu = Matrix::Constant(4, 1, 1.0);

    Matrix p = oracle::exact_option_transition(m, params, 0, Convention::check_at_start);
    Vector beta = params.beta().col(0);
    Matrix g = oracle::option_transition_gradient(p, beta, 2, Convention::check_at_start);
    CHECK(g(0, 0) == 0.0);
    CHECK(g(0, 2) == 0.0);
    CHECK(g(1, 3) == 0.0);

    mdp::TabularMDP single;
    single.n_states = 1;
    single.n_actions = 1;
    single.transition = Matrix::Ones(1, 1);
    single.reward = Matrix::Zero(1, 1);
    single.terminal.assign(1, false);
    single.initial_dist = Vector::Ones(1);
    oracle::TabularOptionParams sp;
    sp.beta_logit = Matrix::Constant(1, 1, 0.7);
    sp.pi = {Matrix::Ones(1, 1)};
    sp.mu = Matrix::Ones(1, 1);
    CHECK(oracle::check_termination_gradient_theorem(single, sp, 0) <= 1e-9);
}

TEST_CASE("conditional MI: degenerate and symmetric cases") {
    // single option: conditioning on O changes nothing
    auto rng = make_rng(34);
    auto solo = oracle::random_instance(5, 1, rng);
    auto model = oracle::build_exact_model_joint(solo.mdp, solo.params, solo.d_joint,
                                                 Convention::check_after_step);
    CHECK(oracle::exact_conditional_mi(model) == doctest::Approx(0.0).epsilon(1e-12));

    // disjoint deterministic terminals from one start: exactly ln 2
    auto fork = fork_instance();
    auto fork_model = oracle::build_exact_model_joint(fork.mdp, fork.params, fork.d_joint,
                                                      Convention::check_after_step);
    CHECK(oracle::exact_conditional_mi(fork_model) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("conditional MI matches a plug-in estimate from sampled triples") {
    auto rng = make_rng(35);
    auto inst = oracle::random_instance(5, 2, rng);
    auto model = oracle::build_exact_model_joint(inst.mdp, inst.params, inst.d_joint,
                                                 Convention::check_at_start);
    double exact = oracle::exact_conditional_mi(model);

    Matrix kernel0 = oracle::policy_kernel(inst.mdp, inst.params.pi[0]);
    Matrix kernel1 = oracle::policy_kernel(inst.mdp, inst.params.pi[1]);
    Matrix beta = inst.params.beta();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> start(0, 9);

    std::vector<Matrix> counts(2, Matrix::Zero(5, 5));
    const long long n = 1000000;
    for (long long it = 0; it < n; ++it) {
        int flat = start(rng);
        int xs = flat / 2, o = flat % 2;
        const Matrix& kernel = o == 0 ? kernel0 : kernel1;
        int y = xs;
        while (unif(rng) >= beta(y, o)) y = mdp::sample_categorical(kernel.row(y), rng);
        counts[static_cast<std::size_t>(o)](xs, y) += 1.0;
    }
    // plug-in conditional MI from the empirical joint
    double plug_in = 0.0;
    for (int xs = 0; xs < 5; ++xs) {
        Eigen::RowVectorXd marginal = counts[0].row(xs) + counts[1].row(xs);
        double n_xs = marginal.sum();
        if (n_xs == 0) continue;
        for (int o = 0; o < 2; ++o) {
            double n_xo = counts[static_cast<std::size_t>(o)].row(xs).sum();
            for (int xf = 0; xf < 5; ++xf) {
                double c = counts[static_cast<std::size_t>(o)](xs, xf);
                if (c > 0)
                    plug_in += c / n * std::log((c / n_xo) / (marginal[xf] / n_xs));
            }
        }
    }
    CHECK(std::abs(plug_in - exact) <= 1e-2);
}

TEST_CASE("Bayes inverse model: normalization, degenerate cases, consistency") {
    auto rng = make_rng(36);
    auto inst = oracle::random_instance(5, 3, rng);
    auto model = oracle::build_exact_model_joint(inst.mdp, inst.params, inst.d_joint,
                                                 Convention::check_at_start);

    for (int xs = 0; xs < 5; ++xs) {
        for (int xf = 0; xf < 5; ++xf) {
            if (!(model.p_marginal(xs, xf) > 0.0)) continue;
            double total = 0.0;
            for (int o = 0; o < 3; ++o)
                total += model.inverse[static_cast<std::size_t>(o)](xs, xf);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
            for (int o = 0; o < 3; ++o) {
                double recomposed = model.inverse[static_cast<std::size_t>(o)](xs, xf) *
                                    model.p_marginal(xs, xf) / inst.params.mu(xs, o);
                CHECK(recomposed ==
                      doctest::Approx(model.p_option[static_cast<std::size_t>(o)](xs, xf))
                          .epsilon(1e-9));
            }
        }
    }

    auto solo = oracle::random_instance(4, 1, rng);
    auto solo_model = oracle::build_exact_model_joint(solo.mdp, solo.params, solo.d_joint,
                                                      Convention::check_at_start);
    for (int xs = 0; xs < 4; ++xs)
        for (int xf = 0; xf < 4; ++xf)
            if (solo_model.p_marginal(xs, xf) > 0.0)
                CHECK(solo_model.inverse[0](xs, xf) == doctest::Approx(1.0));

    // identical option transitions: posterior equals the prior 1/2
    auto twin = oracle::random_instance(4, 2, rng);
    twin.params.pi[1] = twin.params.pi[0];
    twin.params.beta_logit.col(1) = twin.params.beta_logit.col(0);
    auto twin_model = oracle::build_exact_model_joint(twin.mdp, twin.params, twin.d_joint,
                                                      Convention::check_at_start);
    for (int xs = 0; xs < 4; ++xs)
        for (int xf = 0; xf < 4; ++xf)
            if (twin_model.p_marginal(xs, xf) > 0.0)
                CHECK(twin_model.inverse[0](xs, xf) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("exact entropy gradients match finite differences in both conventions") {
    auto rng = make_rng(37);
    for (auto conv : {Convention::check_at_start, Convention::check_after_step}) {
        auto inst = oracle::random_instance(4, 2, rng);
        auto exact = oracle::exact_entropy_gradients(inst.mdp, inst.params, inst.d_joint, conv);
        auto fd = oracle::entropy_gradients_fd(inst.mdp, inst.params, inst.d_joint, conv);
        CHECK(max_abs(exact.h_xf_xs - fd.h_xf_xs) <= 1e-5);
        CHECK(max_abs(exact.h_xf_xs_o - fd.h_xf_xs_o) <= 1e-5);
    }
}

TEST_CASE("entropy gradients: single option cancels, saturated beta vanishes") {
    auto rng = make_rng(38);
    auto solo = oracle::random_instance(4, 1, rng);
    auto grads = oracle::exact_entropy_gradients(solo.mdp, solo.params, solo.d_joint,
                                                 Convention::check_at_start);
    CHECK(max_abs(grads.mi()) <= 1e-12);
    CHECK(max_abs(grads.h_xf_xs - grads.h_xf_xs_o) <= 1e-12);

    auto saturated = oracle::random_instance(4, 2, rng);
    saturated.params.beta_logit.setConstant(9.0);  // beta ~ 0.9999
    auto sg = oracle::exact_entropy_gradients(saturated.mdp, saturated.params, saturated.d_joint,
                                              Convention::check_after_step);
    CHECK(max_abs(sg.h_xf_xs) <= 1e-2);
    CHECK(max_abs(sg.h_xf_xs_o) <= 1e-2);
}

TEST_CASE("prop2 Monte Carlo estimate matches the exact MI gradient") {
    auto rng = make_rng(39);
    auto inst = oracle::random_instance(4, 2, rng);
    for (auto conv : {Convention::check_at_start, Convention::check_after_step}) {
        auto model = oracle::build_exact_model_joint(inst.mdp, inst.params, inst.d_joint, conv);
        auto exact = oracle::exact_entropy_gradients(inst.mdp, inst.params, inst.d_joint, conv);
        Matrix target = exact.mi();
        auto est = oracle::mc_gradient_estimate(inst.mdp, inst.params, model,
                                                oracle::Estimator::prop2, 100000, rng);
        for (Eigen::Index i = 0; i < target.size(); ++i) {
            if (std::abs(target(i)) < 1e-6) continue;
            INFO("conv ", static_cast<int>(conv), " coord ", i, " exact ", target(i), " est ",
                 est.mean(i), " se ", est.std_error(i));
            CHECK(std::abs(est.mean(i) - target(i)) / std::abs(target(i)) <= 0.05);
        }
    }
}

TEST_CASE("prop1 difference estimator agrees with prop2 within pooled errors") {
    auto rng = make_rng(40);
    auto inst = oracle::random_instance(4, 2, rng);
    auto model = oracle::build_exact_model_joint(inst.mdp, inst.params, inst.d_joint,
                                                 Convention::check_at_start);
    auto marg = oracle::mc_gradient_estimate(inst.mdp, inst.params, model,
                                             oracle::Estimator::prop1_marginal, 100000, rng);
    auto cond = oracle::mc_gradient_estimate(inst.mdp, inst.params, model,
                                             oracle::Estimator::prop1_conditional, 100000, rng);
    auto p2 = oracle::mc_gradient_estimate(inst.mdp, inst.params, model, oracle::Estimator::prop2,
                                           100000, rng);
    for (Eigen::Index i = 0; i < p2.mean.size(); ++i) {
        double diff = (marg.mean(i) - cond.mean(i)) - p2.mean(i);
        double pooled = std::sqrt(marg.std_error(i) * marg.std_error(i) +
                                  cond.std_error(i) * cond.std_error(i) +
                                  p2.std_error(i) * p2.std_error(i));
        CHECK(std::abs(diff) <= 2.0 * pooled + 1e-12);
    }

    // prop1 estimators are unbiased for the entropy gradients themselves
    auto exact = oracle::exact_entropy_gradients(inst.mdp, inst.params, inst.d_joint,
                                                 Convention::check_at_start);
    for (Eigen::Index i = 0; i < exact.h_xf_xs.size(); ++i) {
        CHECK(std::abs(marg.mean(i) - exact.h_xf_xs(i)) <= 4.0 * marg.std_error(i) + 1e-9);
        CHECK(std::abs(cond.mean(i) - exact.h_xf_xs_o(i)) <= 4.0 * cond.std_error(i) + 1e-9);
    }
}

TEST_CASE("single option: prop2 estimate statistically indistinguishable from zero") {
    auto rng = make_rng(41);
    auto solo = oracle::random_instance(5, 1, rng);
    auto model = oracle::build_exact_model_joint(solo.mdp, solo.params, solo.d_joint,
                                                 Convention::check_at_start);
    auto est = oracle::mc_gradient_estimate(solo.mdp, solo.params, model,
                                            oracle::Estimator::prop2, 20000, rng);
    for (Eigen::Index i = 0; i < est.mean.size(); ++i)
        CHECK(std::abs(est.mean(i)) <= 3.0 * est.std_error(i) + 1e-12);
}

TEST_CASE("estimated start distribution is a distribution") {
    auto fork = fork_instance();
    auto rng = make_rng(42);
    Matrix d = oracle::estimate_start_distribution(fork.mdp, fork.params, 20000, rng);
    CHECK(d.sum() == doctest::Approx(1.0));
    CHECK(d.minCoeff() >= 0.0);
}
