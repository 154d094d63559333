#include "imoc/agent.hpp"

#include "imoc/rng.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace imoc::agent {

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "a2imoc") return Algorithm::a2imoc;
    if (s == "a2c") return Algorithm::a2c;
    if (s == "aoc") return Algorithm::aoc;
    if (s == "our_aoc") return Algorithm::our_aoc;
    throw std::invalid_argument("unknown algorithm: " + s);
}

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::a2imoc: return "a2imoc";
        case Algorithm::a2c: return "a2c";
        case Algorithm::aoc: return "aoc";
        case Algorithm::our_aoc: return "our_aoc";
    }
    return "?";
}

AdvantageMode advantage_mode_from_string(const std::string& s) {
    if (s == "uoae") return AdvantageMode::uoae;
    if (s == "n_step") return AdvantageMode::n_step;
    if (s == "truncated") return AdvantageMode::truncated;
    throw std::invalid_argument("unknown advantage mode: " + s);
}

std::string to_string(AdvantageMode m) {
    switch (m) {
        case AdvantageMode::uoae: return "uoae";
        case AdvantageMode::n_step: return "n_step";
        case AdvantageMode::truncated: return "truncated";
    }
    return "?";
}

void AgentConfig::validate() const {
    if (rollout_len < 1) throw std::invalid_argument("config: rollout_len must be >= 1");
    if (n_actors < 1) throw std::invalid_argument("config: n_actors must be >= 1");
    if (n_options < 1) throw std::invalid_argument("config: n_options must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("config: gamma outside [0,1]");
    if (c_mu < 0 || c_h_mu < 0 || c_h < 0 || c_h_beta < 0)
        throw std::invalid_argument("config: regularizer weights must be >= 0");
    if (!(eps_opt >= 0.0 && eps_opt <= 1.0))
        throw std::invalid_argument("config: eps_opt outside [0,1]");
    if (buffer_capacity < 1) throw std::invalid_argument("config: buffer_capacity must be >= 1");
    if (classifier_batch < 1) throw std::invalid_argument("config: classifier_batch must be >= 1");
}

// ---------------------------------------------------------------------------
// Pure pieces

int select_option(std::span<const double> q_row, std::span<const double> mu_hat_row, double c_mu,
                  int current, bool b) {
    if (q_row.size() != mu_hat_row.size())
        throw std::invalid_argument("select_option: row length mismatch");
    if (!b) return current;
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < q_row.size(); ++o) {
        double score = q_row[o] - c_mu * std::log(std::max(mu_hat_row[o], 1e-12));
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(o);
        }
    }
    return best;
}

int aoc_option_selection(std::span<const double> q_row, double epsilon, std::mt19937_64& rng) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("aoc_option_selection: epsilon outside [0,1]");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < epsilon) {
        std::uniform_int_distribution<int> pick(0, static_cast<int>(q_row.size()) - 1);
        return pick(rng);
    }
    int best = 0;
    for (std::size_t o = 1; o < q_row.size(); ++o)
        if (q_row[o] > q_row[static_cast<std::size_t>(best)]) best = static_cast<int>(o);
    return best;
}

double uoae_advantage(std::span<const double> rewards, int k, double v_k, double v_tail,
                      double u_tail, double q_start, double gamma) {
    const int h = static_cast<int>(rewards.size());
    if (h < 1) throw std::invalid_argument("uoae_advantage: empty reward window");
    if (k > h) throw std::invalid_argument("uoae_advantage: termination offset past window");
    double disc = 1.0;
    if (k >= 1) {
        double head = 0.0;
        for (int i = 0; i < k; ++i) {
            head += disc * rewards[static_cast<std::size_t>(i)];
            disc *= gamma;
        }
        // disc == gamma^k here
        double realized = 0.0;
        double d = disc;
        for (int j = k; j < h; ++j) {
            realized += d * rewards[static_cast<std::size_t>(j)];
            d *= gamma;
        }
        realized += d * v_tail;  // d == gamma^h
        double bootstrapped = disc * v_k;
        return head + std::max(realized, bootstrapped) - q_start;
    }
    double total = 0.0;
    for (int i = 0; i < h; ++i) {
        total += disc * rewards[static_cast<std::size_t>(i)];
        disc *= gamma;
    }
    return total + disc * u_tail - q_start;
}

double truncated_advantage(std::span<const double> rewards, int k, double v_k, double u_tail,
                           double q_start, double gamma) {
    const int h = static_cast<int>(rewards.size());
    double disc = 1.0;
    if (k >= 1) {
        double head = 0.0;
        for (int i = 0; i < k; ++i) {
            head += disc * rewards[static_cast<std::size_t>(i)];
            disc *= gamma;
        }
        return head + disc * v_k - q_start;
    }
    double total = 0.0;
    for (int i = 0; i < h; ++i) {
        total += disc * rewards[static_cast<std::size_t>(i)];
        disc *= gamma;
    }
    return total + disc * u_tail - q_start;
}

double n_step_advantage(std::span<const double> rewards, double tail_value, double q_start,
                        double gamma) {
    double total = 0.0, disc = 1.0;
    for (double r : rewards) {
        total += disc * r;
        disc *= gamma;
    }
    return total + disc * tail_value - q_start;
}

std::vector<double> a2c_advantages(std::span<const double> rewards, double v_bootstrap,
                                   std::span<const double> values, double gamma) {
    if (rewards.size() != values.size())
        throw std::invalid_argument("a2c_advantages: length mismatch");
    const int n = static_cast<int>(rewards.size());
    std::vector<double> adv(static_cast<std::size_t>(n));
    double ret = v_bootstrap;
    for (int t = n - 1; t >= 0; --t) {
        ret = rewards[static_cast<std::size_t>(t)] + gamma * ret;
        adv[static_cast<std::size_t>(t)] = ret - values[static_cast<std::size_t>(t)];
    }
    return adv;
}

nn::Var aoc_termination_loss(nn::Graph& g, nn::Var beta_logit_col, const nn::Vector& coef,
                             double normalizer) {
    nn::Var beta = g.sigmoid(beta_logit_col);
    return g.scale(g.weighted_sum(beta, coef), 1.0 / normalizer);
}

namespace {

int sample_from_logits(const Eigen::RowVectorXd& logits, std::mt19937_64& rng) {
    Eigen::RowVectorXd p = (logits.array() - logits.maxCoeff()).exp();
    p /= p.sum();
    return mdp::sample_categorical(p, rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(const mdp::TabularMDP& env, const AgentConfig& config, std::uint64_t seed)
    : config_(config),
      env_(env),
      net_(nn::NetworkSpec{env.n_states, env.n_actions, config.effective_n_options(),
                           config.hidden, nn::EncoderKind::onehot_dense, config.split_encoder}),
      optimizer_(config.optimizer, net_.params()),
      buffer_(static_cast<std::size_t>(config.buffer_capacity)),
      learner_rng_(make_rng(seed, 1)) {
    config_.validate();
    env_.validate();
    std::mt19937_64 init_rng = make_rng(seed, 0);
    net_.init(init_rng);
    episodes_.reserve(static_cast<std::size_t>(config_.n_actors));
    for (int a = 0; a < config_.n_actors; ++a) {
        actor_rngs_.push_back(make_rng(seed, 100 + static_cast<std::uint64_t>(a)));
        episodes_.emplace_back(env_, actor_rngs_.back());
        active_.emplace_back();
    }
}

void Trainer::update_environment(const mdp::TabularMDP& env) {
    if (env.n_states != env_.n_states || env.n_actions != env_.n_actions)
        throw std::invalid_argument("update_environment: state space changed");
    env.validate();
    env_ = env;
    // an actor can be left standing on a cell that just became terminal
    for (int a = 0; a < config_.n_actors; ++a) {
        if (env_.is_terminal(episodes_[static_cast<std::size_t>(a)].state())) {
            episodes_[static_cast<std::size_t>(a)].reset(actor_rngs_[static_cast<std::size_t>(a)]);
            active_[static_cast<std::size_t>(a)].clear();
        }
    }
}

Trainer::ValueCache Trainer::value_cache() const {
    ValueCache cache;
    cache.heads = net_.forward_all();
    cache.mu_probs = cache.heads.mu_logits;
    for (Eigen::Index i = 0; i < cache.mu_probs.rows(); ++i) {
        Eigen::RowVectorXd row =
            (cache.heads.mu_logits.row(i).array() - cache.heads.mu_logits.row(i).maxCoeff()).exp();
        cache.mu_probs.row(i) = row / row.sum();
    }
    cache.beta_probs = (1.0 / (1.0 + (-cache.heads.beta_logits.array()).exp())).matrix();

    const int n_opt = config_.effective_n_options();
    cache.v.resize(static_cast<std::size_t>(env_.n_states));
    cache.greedy.resize(static_cast<std::size_t>(env_.n_states));
    for (int s = 0; s < env_.n_states; ++s) {
        const auto q = cache.heads.q.row(s);
        int greedy = 0;
        if (config_.uncertainty_selection()) {
            double best = -std::numeric_limits<double>::infinity();
            for (int o = 0; o < n_opt; ++o) {
                double score =
                    q[o] - config_.c_mu * std::log(std::max(cache.mu_probs(s, o), 1e-12));
                if (score > best) {
                    best = score;
                    greedy = o;
                }
            }
        } else {
            for (int o = 1; o < n_opt; ++o)
                if (q[o] > q[greedy]) greedy = o;
        }
        cache.greedy[static_cast<std::size_t>(s)] = greedy;

        double v;
        if (env_.is_terminal(s)) {
            v = 0.0;
        } else if (config_.algorithm == Algorithm::a2c) {
            v = q[0];
        } else if (config_.value_mixture_mu_hat) {
            v = 0.0;
            for (int o = 0; o < n_opt; ++o) v += cache.mu_probs(s, o) * q[o];
        } else if (config_.uncertainty_selection()) {
            v = q[greedy];
        } else {
            // eps-greedy behavior: eps * mean + (1 - eps) * max
            double eps = config_.eps_greedy;
            v = eps * q.mean() + (1.0 - eps) * q[greedy];
        }
        cache.v[static_cast<std::size_t>(s)] = v;
    }
    return cache;
}

int Trainer::select_new_option(const ValueCache& cache, int state, std::mt19937_64& rng) const {
    const int n_opt = config_.effective_n_options();
    if (config_.algorithm == Algorithm::a2c) return 0;
    std::vector<double> q(static_cast<std::size_t>(n_opt));
    for (int o = 0; o < n_opt; ++o) q[static_cast<std::size_t>(o)] = cache.heads.q(state, o);
    if (config_.uncertainty_selection()) {
        std::vector<double> mu(static_cast<std::size_t>(n_opt));
        for (int o = 0; o < n_opt; ++o) mu[static_cast<std::size_t>(o)] = cache.mu_probs(state, o);
        return select_option(q, mu, config_.c_mu, -1, true);
    }
    return aoc_option_selection(q, config_.eps_greedy, rng);
}

double Trainer::u_value(const ValueCache& cache, int state, int option) const {
    if (env_.is_terminal(state)) return 0.0;
    double beta = cache.beta_probs(state, option);
    return options::u_omega(cache.heads.q(state, option), cache.v[static_cast<std::size_t>(state)],
                            beta);
}

int Trainer::sample_action(const ValueCache& cache, int state, int option,
                           std::mt19937_64& rng) const {
    return sample_from_logits(
        cache.heads.pi_logits.row(state).segment(option * env_.n_actions, env_.n_actions), rng);
}

Rollout Trainer::collect_rollout() {
    const ValueCache cache = value_cache();
    const int len = config_.rollout_len;
    Rollout out;
    out.n_actors = config_.n_actors;
    out.len = len;
    out.steps.resize(static_cast<std::size_t>(config_.n_actors) * len);
    out.bootstrap_state.resize(static_cast<std::size_t>(config_.n_actors));
    out.bootstrap_option.resize(static_cast<std::size_t>(config_.n_actors));

    const bool use_options = config_.uses_options();
    const bool keep_transitions = config_.trains_mu() || config_.trains_inverse();

    for (int a = 0; a < config_.n_actors; ++a) {
        auto& rng = actor_rngs_[static_cast<std::size_t>(a)];
        auto& ep = episodes_[static_cast<std::size_t>(a)];
        auto& ao = active_[static_cast<std::size_t>(a)];
        for (int t = 0; t < len; ++t) {
            StepRecord rec;
            const int x = ep.state();
            rec.state = x;

            if (use_options) {
                if (ao.active()) {
                    rec.checked_option = ao.option;
                    rec.b = options::sample_termination(cache.beta_probs(x, ao.option), rng);
                    if (rec.b) {
                        infomax::CompletedSegment seg{ao.option, ao.start_state, ao.checked, x};
                        out.segments.push_back(seg);
                        if (keep_transitions)
                            buffer_.push({ao.start_state, x, ao.option});
                        ao.clear();
                    } else {
                        ao.checked.push_back(x);
                        ++ao.steps;
                    }
                }
                if (!ao.active()) {
                    ao.option = select_new_option(cache, x, rng);
                    ao.start_state = x;
                    rec.opt_start = true;
                }
                rec.option = ao.option;
            } else {
                rec.option = 0;
                rec.opt_start = ep.steps() == 0;
            }

            rec.action = sample_action(cache, x, rec.option, rng);
            mdp::EpisodeStep es = ep.step(rng, rec.action);
            rec.reward = es.reward;
            rec.next_state = es.next_state;
            rec.done = es.done;
            rec.truncated = es.truncated;
            ++env_steps_;

            if (es.done || es.truncated) {
                if (use_options && ao.active()) {
                    // the episode end forces option termination at the final state
                    infomax::CompletedSegment seg{ao.option, ao.start_state, ao.checked,
                                                  es.next_state};
                    out.segments.push_back(seg);
                    if (keep_transitions) buffer_.push({ao.start_state, es.next_state, ao.option});
                    ao.clear();
                }
                out.episode_returns.push_back(ep.undiscounted_return());
                ep.reset(rng);
            }
            out.steps[static_cast<std::size_t>(a) * len + t] = rec;
        }
        out.bootstrap_state[static_cast<std::size_t>(a)] = ep.state();
        out.bootstrap_option[static_cast<std::size_t>(a)] = ao.active() ? ao.option : -1;
    }
    return out;
}

double Trainer::position_advantage(const Rollout& rollout, const ValueCache& cache, int actor,
                                   int t) const {
    const int len = rollout.len;
    const StepRecord* row = &rollout.steps[static_cast<std::size_t>(actor) * len];
    const int o = row[t].option;
    const double q_start = cache.heads.q(row[t].state, o);

    int m = len - 1;
    bool ended = false;
    for (int j = t; j < len; ++j) {
        if (row[j].done || row[j].truncated) {
            m = j;
            ended = true;
            break;
        }
    }
    const int h = m - t + 1;
    const int tail_state = row[m].next_state;
    const bool tail_terminal = env_.is_terminal(tail_state);
    const double v_tail = tail_terminal ? 0.0 : cache.v[static_cast<std::size_t>(tail_state)];
    const double u_tail = tail_terminal ? 0.0 : u_value(cache, tail_state, o);

    int k = -1;
    for (int j = t; j <= m; ++j) {
        bool term = row[j].done || row[j].truncated;
        if (!term && j + 1 <= m && row[j + 1].checked_option == o && row[j + 1].b) term = true;
        if (term) {
            k = j - t + 1;
            break;
        }
    }

    std::vector<double> rewards(static_cast<std::size_t>(h));
    for (int i = 0; i < h; ++i) rewards[static_cast<std::size_t>(i)] = row[t + i].reward;

    double v_k = 0.0;
    if (k >= 1) {
        int xk = row[t + k - 1].next_state;
        v_k = env_.is_terminal(xk) ? 0.0 : cache.v[static_cast<std::size_t>(xk)];
    }

    switch (config_.effective_advantage()) {
        case AdvantageMode::uoae:
            return uoae_advantage(rewards, k, v_k, v_tail, u_tail, q_start, config_.gamma);
        case AdvantageMode::truncated:
            return truncated_advantage(rewards, k, v_k, u_tail, q_start, config_.gamma);
        case AdvantageMode::n_step: {
            double tail = (!ended && k < 0) ? u_tail : v_tail;
            return n_step_advantage(rewards, tail, q_start, config_.gamma);
        }
    }
    return 0.0;
}

Trainer::UpdateReport Trainer::update(const Rollout& rollout) {
    const ValueCache cache = value_cache();
    const int n_positions = rollout.n_actors * rollout.len;

    std::vector<int> states, opts, acts, greedy_opts;
    states.reserve(static_cast<std::size_t>(n_positions));
    nn::Vector adv(n_positions);
    nn::Matrix targets(n_positions, 1);
    for (int a = 0; a < rollout.n_actors; ++a) {
        for (int t = 0; t < rollout.len; ++t) {
            const StepRecord& rec = rollout.at(a, t);
            const int i = static_cast<int>(states.size());
            states.push_back(rec.state);
            opts.push_back(rec.option);
            acts.push_back(rec.action);
            greedy_opts.push_back(cache.greedy[static_cast<std::size_t>(rec.state)]);
            adv[i] = position_advantage(rollout, cache, a, t);
            targets(i, 0) = adv[i] + cache.heads.q(rec.state, rec.option);
        }
    }

    nn::Graph g;
    nn::Var feats = net_.features(g, states, false);
    nn::Var pol = net_.policy_logits(g, feats);
    nn::Var opt_logits = g.pick_block(pol, opts, env_.n_actions);
    nn::Var logp_chosen = g.pick_cols(g.log_softmax_rows(opt_logits), acts);
    nn::Var pg = g.scale(g.weighted_sum(logp_chosen, adv), -1.0 / n_positions);

    nn::Var entropy = g.mean(g.entropy_rows(opt_logits));
    nn::Var policy_loss = g.sub(pg, g.scale(entropy, config_.c_h));
    const double c_h_mu = config_.effective_c_h_mu();
    if (c_h_mu > 0.0) {
        nn::Var mu_block = g.pick_block(pol, greedy_opts, env_.n_actions);
        policy_loss = g.sub(policy_loss, g.scale(g.mean(g.entropy_rows(mu_block)), c_h_mu));
    }

    nn::Var q_all = net_.q_values(g, feats);
    nn::Var q_sel = g.pick_cols(q_all, opts);
    nn::Var value_loss =
        g.scale(g.mean(g.square(g.sub(q_sel, g.constant(targets)))), config_.value_loss_coef);

    nn::Var total = g.add(policy_loss, value_loss);

    UpdateReport report;
    nn::Var term_loss;
    if (config_.infomax_termination() && !rollout.segments.empty()) {
        term_loss = infomax::termination_loss(g, net_, rollout.segments,
                                              infomax::network_log_inverse(net_),
                                              config_.c_h_beta, config_.termination_beta_factor,
                                              static_cast<double>(n_positions));
        total = g.add(total, term_loss);
    } else if (config_.oc_termination()) {
        std::vector<int> oc_states, oc_opts;
        std::vector<double> coef;
        for (int a = 0; a < rollout.n_actors; ++a) {
            for (int t = 0; t < rollout.len; ++t) {
                const StepRecord& rec = rollout.at(a, t);
                if (rec.checked_option < 0) continue;
                oc_states.push_back(rec.state);
                oc_opts.push_back(rec.checked_option);
                coef.push_back(config_.gamma *
                               (cache.heads.q(rec.state, rec.checked_option) -
                                cache.v[static_cast<std::size_t>(rec.state)]));
            }
        }
        if (!oc_states.empty()) {
            nn::Var oc_feats = net_.features(g, oc_states, true);
            nn::Var blogits = g.pick_cols(net_.beta_logits(g, oc_feats), oc_opts);
            nn::Vector w = Eigen::Map<nn::Vector>(coef.data(), static_cast<Eigen::Index>(coef.size()));
            term_loss = aoc_termination_loss(g, blogits, w, static_cast<double>(n_positions));
            total = g.add(total, term_loss);
        }
    }

    g.backward(total);
    report.policy_loss = pg.value()(0, 0);
    report.value_loss = value_loss.value()(0, 0);
    report.entropy = entropy.value()(0, 0);
    report.termination_loss = term_loss.valid() ? term_loss.value()(0, 0) : 0.0;
    report.grad_norm = optimizer_.step(net_.params(), config_.max_grad_norm);

    if ((config_.trains_inverse() || config_.trains_mu()) && !buffer_.empty()) {
        auto batch = buffer_.sample(static_cast<std::size_t>(config_.classifier_batch), learner_rng_);
        auto [lp, lmu] = infomax::fit_models(net_, optimizer_, batch, config_.max_grad_norm,
                                             config_.trains_inverse(), config_.trains_mu());
        report.classifier_loss_p = lp;
        report.classifier_loss_mu = lmu;
    }
    return report;
}

TrainingStats Trainer::train_iteration() {
    Rollout rollout = collect_rollout();
    UpdateReport report = update(rollout);

    TrainingStats stats;
    stats.env_steps = env_steps_;
    stats.policy_loss = report.policy_loss;
    stats.value_loss = report.value_loss;
    stats.termination_loss = report.termination_loss;
    stats.entropy = report.entropy;
    stats.classifier_loss_p = report.classifier_loss_p;
    stats.classifier_loss_mu = report.classifier_loss_mu;
    stats.grad_norm = report.grad_norm;
    stats.clipped_grad_norm = std::min(report.grad_norm, config_.max_grad_norm);

    stats.option_usage.assign(static_cast<std::size_t>(config_.effective_n_options()), 0.0);
    for (const auto& rec : rollout.steps)
        stats.option_usage[static_cast<std::size_t>(rec.option)] += 1.0;
    for (auto& f : stats.option_usage) f /= static_cast<double>(rollout.steps.size());

    if (!rollout.segments.empty()) {
        double total = 0.0;
        for (const auto& seg : rollout.segments)
            total += static_cast<double>(seg.checked.size()) + 1.0;
        stats.mean_option_duration = total / static_cast<double>(rollout.segments.size());
    }
    stats.episodes = static_cast<long long>(rollout.episode_returns.size());
    if (!rollout.episode_returns.empty())
        stats.mean_episode_return =
            std::accumulate(rollout.episode_returns.begin(), rollout.episode_returns.end(), 0.0) /
            static_cast<double>(rollout.episode_returns.size());
    return stats;
}

double Trainer::evaluate(int n_episodes, std::mt19937_64& rng) const {
    return evaluate_policy(net_, env_, config_, n_episodes, rng);
}

oracle::TabularOptionParams Trainer::tabular_params() const {
    const ValueCache cache = value_cache();
    const int n_opt = config_.effective_n_options();
    oracle::TabularOptionParams params;
    params.beta_logit = cache.heads.beta_logits;
    for (int o = 0; o < n_opt; ++o) {
        nn::Matrix pi(env_.n_states, env_.n_actions);
        for (int s = 0; s < env_.n_states; ++s) {
            Eigen::RowVectorXd block =
                cache.heads.pi_logits.row(s).segment(o * env_.n_actions, env_.n_actions);
            Eigen::RowVectorXd p = (block.array() - block.maxCoeff()).exp();
            pi.row(s) = p / p.sum();
        }
        params.pi.push_back(pi);
    }
    params.mu = nn::Matrix::Zero(env_.n_states, n_opt);
    for (int s = 0; s < env_.n_states; ++s)
        params.mu(s, cache.greedy[static_cast<std::size_t>(s)]) = 1.0;
    return params;
}

namespace {
constexpr std::uint64_t kCkptMagic = 0x544b43434f4d49ULL;
constexpr std::uint64_t kCkptVersion = 1;

void write_rng(std::ostream& out, const std::mt19937_64& rng) {
    std::ostringstream ss;
    ss << rng;
    nn::write_string(out, ss.str());
}

void read_rng(std::istream& in, std::mt19937_64& rng) {
    std::istringstream ss(nn::read_string(in));
    ss >> rng;
}
}  // namespace

void Trainer::save_checkpoint(std::ostream& out) const {
    nn::write_u64(out, kCkptMagic);
    nn::write_u64(out, kCkptVersion);
    nn::save_params(out, net_.params());
    optimizer_.save(out);
    buffer_.save(out);
    nn::write_u64(out, static_cast<std::uint64_t>(env_steps_));
    nn::write_u64(out, static_cast<std::uint64_t>(config_.n_actors));
    for (int a = 0; a < config_.n_actors; ++a) {
        write_rng(out, actor_rngs_[static_cast<std::size_t>(a)]);
        const auto& ep = episodes_[static_cast<std::size_t>(a)];
        nn::write_u64(out, static_cast<std::uint64_t>(ep.state()));
        nn::write_u64(out, static_cast<std::uint64_t>(ep.steps()));
        nn::write_matrix(out, nn::Matrix::Constant(1, 1, ep.undiscounted_return()));
        const auto& ao = active_[static_cast<std::size_t>(a)];
        nn::write_u64(out, static_cast<std::uint64_t>(ao.option + 1));
        nn::write_u64(out, static_cast<std::uint64_t>(ao.start_state + 1));
        nn::write_u64(out, ao.checked.size());
        for (int x : ao.checked) nn::write_u64(out, static_cast<std::uint64_t>(x));
    }
    write_rng(out, learner_rng_);
}

void Trainer::load_checkpoint(std::istream& in) {
    if (nn::read_u64(in) != kCkptMagic) throw std::runtime_error("checkpoint: bad magic");
    if (nn::read_u64(in) != kCkptVersion)
        throw std::runtime_error("checkpoint: unsupported version");
    nn::load_params(in, net_.params());
    optimizer_.load(in, net_.params());
    buffer_.load(in);
    env_steps_ = static_cast<long long>(nn::read_u64(in));
    std::uint64_t n_actors = nn::read_u64(in);
    if (n_actors != static_cast<std::uint64_t>(config_.n_actors))
        throw std::runtime_error("checkpoint: actor count mismatch");
    for (int a = 0; a < config_.n_actors; ++a) {
        read_rng(in, actor_rngs_[static_cast<std::size_t>(a)]);
        int state = static_cast<int>(nn::read_u64(in));
        int steps = static_cast<int>(nn::read_u64(in));
        double ret = nn::read_matrix(in)(0, 0);
        episodes_[static_cast<std::size_t>(a)].restore(state, steps, ret);
        auto& ao = active_[static_cast<std::size_t>(a)];
        ao.option = static_cast<int>(nn::read_u64(in)) - 1;
        ao.start_state = static_cast<int>(nn::read_u64(in)) - 1;
        std::uint64_t n = nn::read_u64(in);
        ao.checked.clear();
        for (std::uint64_t i = 0; i < n; ++i)
            ao.checked.push_back(static_cast<int>(nn::read_u64(in)));
    }
    read_rng(in, learner_rng_);
}

double evaluate_policy(const nn::OptionNetwork& net, const mdp::TabularMDP& env,
                       const AgentConfig& config, int n_episodes, std::mt19937_64& rng,
                       EvalTrace* trace) {
    const auto heads = net.forward_all();
    const nn::Matrix beta = (1.0 / (1.0 + (-heads.beta_logits.array()).exp())).matrix();
    const int n_opt = config.effective_n_options();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (trace) trace->option_steps.assign(static_cast<std::size_t>(n_opt), 0);

    double total = 0.0;
    for (int e = 0; e < n_episodes; ++e) {
        mdp::Episode ep(env, rng);
        int option = -1, start = -1;
        while (true) {
            const int x = ep.state();
            if (option < 0) {
                std::vector<double> q(static_cast<std::size_t>(n_opt));
                for (int o = 0; o < n_opt; ++o) q[static_cast<std::size_t>(o)] = heads.q(x, o);
                option = aoc_option_selection(q, config.eps_opt, rng);
                start = x;
            }
            const int action = sample_from_logits(
                heads.pi_logits.row(x).segment(option * env.n_actions, env.n_actions), rng);
            mdp::EpisodeStep es = ep.step(rng, action);
            if (trace) ++trace->option_steps[static_cast<std::size_t>(option)];
            if (es.done || es.truncated) {
                if (trace) trace->terminations.push_back({start, es.next_state, option, true});
                break;
            }
            if (config.uses_options() && unif(rng) < beta(es.next_state, option)) {
                if (trace) trace->terminations.push_back({start, es.next_state, option, false});
                option = -1;
            }
        }
        total += ep.undiscounted_return();
    }
    return total / static_cast<double>(n_episodes);
}

}  // namespace imoc::agent
