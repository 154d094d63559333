#include "imoc/mdp.hpp"

#include <cmath>

namespace imoc::mdp {

void TabularMDP::validate(double tol) const {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("mdp: empty state or action space");
    if (transition.rows() != static_cast<Eigen::Index>(n_states) * n_actions ||
        transition.cols() != n_states)
        throw std::invalid_argument("mdp: transition shape mismatch");
    if (reward.rows() != n_states || reward.cols() != n_actions)
        throw std::invalid_argument("mdp: reward shape mismatch");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("mdp: gamma outside [0,1]");
    if (!reward.allFinite()) throw std::invalid_argument("mdp: non-finite reward");
    if (terminal.size() != static_cast<std::size_t>(n_states))
        throw std::invalid_argument("mdp: terminal flag size mismatch");
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const auto r = transition.row(s * n_actions + a);
            if (r.minCoeff() < -tol)
                throw std::invalid_argument("mdp: negative transition probability at state " +
                                            std::to_string(s));
            if (std::abs(r.sum() - 1.0) > tol)
                throw std::invalid_argument("mdp: transition row (" + std::to_string(s) + "," +
                                            std::to_string(a) + ") does not sum to 1");
        }
    }
    if (initial_dist.size() != n_states || std::abs(initial_dist.sum() - 1.0) > tol ||
        initial_dist.minCoeff() < -tol)
        throw std::invalid_argument("mdp: initial state distribution invalid");
    if (arrival_reward.size() != 0 && arrival_reward.size() != n_states)
        throw std::invalid_argument("mdp: arrival_reward size mismatch");
}

int sample_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    double acc = 0.0;
    const Eigen::Index n = probs.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    // round-off fallthrough: return the last index with positive mass
    for (Eigen::Index i = n - 1; i >= 0; --i)
        if (probs[i] > 0.0) return static_cast<int>(i);
    return static_cast<int>(n - 1);
}

EpisodeStep step(const TabularMDP& m, std::mt19937_64& rng, int state, int action, int steps_taken) {
    if (state < 0 || state >= m.n_states) throw std::invalid_argument("step: state out of range");
    if (action < 0 || action >= m.n_actions) throw std::invalid_argument("step: action out of range");
    if (m.is_terminal(state)) throw std::invalid_argument("step: called on terminal state");

    EpisodeStep out;
    out.state = state;
    out.action = action;
    out.next_state = sample_categorical(m.transition.row(state * m.n_actions + action), rng);
    out.reward = m.arrival_reward.size() > 0 ? m.arrival_reward[out.next_state]
                                             : m.reward(state, action);
    out.done = m.is_terminal(out.next_state);
    out.truncated = !out.done && m.max_episode_len > 0 && steps_taken + 1 >= m.max_episode_len;
    return out;
}

void Episode::reset(std::mt19937_64& rng) {
    state_ = sample_categorical(mdp_->initial_dist.transpose(), rng);
    steps_ = 0;
    return_ = 0.0;
}

void Episode::restore(int state, int steps, double undiscounted) {
    if (state < 0 || state >= mdp_->n_states) throw std::invalid_argument("restore: bad state");
    state_ = state;
    steps_ = steps;
    return_ = undiscounted;
}

EpisodeStep Episode::step(std::mt19937_64& rng, int action) {
    EpisodeStep s = mdp::step(*mdp_, rng, state_, action, steps_);
    state_ = s.next_state;
    ++steps_;
    return_ += s.reward;
    return s;
}

TabularMDP build_test_mdp(TestMdpKind kind, int size, std::mt19937_64& rng, int n_actions) {
    if (size < 2) throw std::invalid_argument("build_test_mdp: size must be >= 2");
    TabularMDP m;
    m.n_states = size;
    m.n_actions = kind == TestMdpKind::chain ? 2 : n_actions;
    m.transition = Matrix::Zero(static_cast<Eigen::Index>(size) * m.n_actions, size);
    m.reward = Matrix::Zero(size, m.n_actions);
    m.terminal.assign(static_cast<std::size_t>(size), false);
    m.initial_dist = Vector::Constant(size, 1.0 / size);

    if (kind == TestMdpKind::chain) {
        for (int s = 0; s < size; ++s) {
            int left = std::max(0, s - 1);
            int right = std::min(size - 1, s + 1);
            m.transition(s * 2 + 0, left) = 1.0;
            m.transition(s * 2 + 1, right) = 1.0;
        }
    } else {
        std::uniform_real_distribution<double> unif(0.05, 1.0);
        for (int s = 0; s < size; ++s) {
            for (int a = 0; a < m.n_actions; ++a) {
                Eigen::RowVectorXd row(size);
                for (int t = 0; t < size; ++t) row[t] = unif(rng);
                m.transition.row(s * m.n_actions + a) = row / row.sum();
            }
        }
    }
    return m;
}

}  // namespace imoc::mdp
