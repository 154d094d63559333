#include "imoc/infomax.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace imoc::infomax {

TransitionBuffer::TransitionBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("TransitionBuffer: zero capacity");
}

void TransitionBuffer::push(const options::OptionTransition& t) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(t);
}

std::vector<options::OptionTransition> TransitionBuffer::sample(std::size_t batch_size,
                                                                std::mt19937_64& rng) const {
    const std::size_t n = items_.size();
    const std::size_t k = std::min(batch_size, n);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<options::OptionTransition> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(items_[idx[i]]);
    return out;
}

void TransitionBuffer::save(std::ostream& out) const {
    nn::write_u64(out, capacity_);
    nn::write_u64(out, items_.size());
    for (const auto& t : items_) {
        nn::write_u64(out, static_cast<std::uint64_t>(t.start_state));
        nn::write_u64(out, static_cast<std::uint64_t>(t.final_state));
        nn::write_u64(out, static_cast<std::uint64_t>(t.option));
    }
}

void TransitionBuffer::load(std::istream& in) {
    capacity_ = nn::read_u64(in);
    std::uint64_t n = nn::read_u64(in);
    items_.clear();
    for (std::uint64_t i = 0; i < n; ++i) {
        options::OptionTransition t;
        t.start_state = static_cast<int>(nn::read_u64(in));
        t.final_state = static_cast<int>(nn::read_u64(in));
        t.option = static_cast<int>(nn::read_u64(in));
        items_.push_back(t);
    }
}

LogInverseFn network_log_inverse(const nn::OptionNetwork& net, double floor) {
    return [&net, floor](int option, int start_state, int state) {
        const int xs[1] = {start_state};
        const int xf[1] = {state};
        nn::Matrix logits = net.inverse_logits(std::span<const int>(xs), std::span<const int>(xf));
        double mx = logits.row(0).maxCoeff();
        double lse = std::log((logits.row(0).array() - mx).exp().sum()) + mx;
        double p = std::exp(logits(0, option) - lse);
        return std::log(std::max(p, floor));
    };
}

nn::Var termination_loss(nn::Graph& g, const nn::OptionNetwork& net,
                         const std::vector<CompletedSegment>& segments,
                         const LogInverseFn& log_inverse, double c_entropy,
                         bool include_beta_factor, double normalizer) {
    std::vector<int> states;
    std::vector<int> opts;
    std::vector<double> logp_diff;
    for (const auto& seg : segments) {
        if (seg.final_state < 0)
            throw std::invalid_argument("termination_loss: segment without a terminal state");
        const double logp_final = log_inverse(seg.option, seg.start_state, seg.final_state);
        for (int x : seg.checked) {
            states.push_back(x);
            opts.push_back(seg.option);
            logp_diff.push_back(log_inverse(seg.option, seg.start_state, x) - logp_final);
        }
        // the terminating state itself: the log-prob difference vanishes but
        // the entropy bonus still applies there
        states.push_back(seg.final_state);
        opts.push_back(seg.option);
        logp_diff.push_back(0.0);
    }
    const double norm = normalizer > 0.0 ? normalizer : static_cast<double>(segments.size());
    if (states.empty()) return g.constant(nn::Matrix::Zero(1, 1));

    nn::Var feats = net.features(g, states, true);
    nn::Var logits = net.beta_logits(g, feats);
    nn::Var lsel = g.pick_cols(logits, opts);

    nn::Vector w(static_cast<Eigen::Index>(states.size()));
    if (include_beta_factor) {
        const nn::Matrix beta = (1.0 / (1.0 + (-lsel.value().array()).exp())).matrix();
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w[i] = beta(i, 0) * logp_diff[static_cast<std::size_t>(i)];
    } else {
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = logp_diff[static_cast<std::size_t>(i)];
    }

    nn::Var objective = g.weighted_sum(lsel, std::move(w));
    if (c_entropy != 0.0)
        objective = g.add(objective, g.scale(g.sum(g.bernoulli_entropy(lsel)), c_entropy));
    return g.scale(objective, -1.0 / norm);
}

std::pair<double, double> fit_models(nn::OptionNetwork& net, nn::Optimizer& opt,
                                     const std::vector<options::OptionTransition>& batch,
                                     double max_grad_norm, bool train_inverse, bool train_mu) {
    if (batch.empty() || (!train_inverse && !train_mu)) return {0.0, 0.0};
    std::vector<int> xs, xf, labels;
    xs.reserve(batch.size());
    xf.reserve(batch.size());
    labels.reserve(batch.size());
    for (const auto& t : batch) {
        xs.push_back(t.start_state);
        xf.push_back(t.final_state);
        labels.push_back(t.option);
    }
    nn::Graph g;
    nn::Var fs = net.features(g, xs, true);
    nn::Var loss;
    double loss_p = 0.0, loss_mu = 0.0;
    if (train_inverse) {
        nn::Var ff = net.features(g, xf, true);
        nn::Var lp = g.cross_entropy_mean(net.inverse_logits(g, fs, ff), labels);
        loss_p = lp.value()(0, 0);
        loss = lp;
    }
    if (train_mu) {
        nn::Var lmu = g.cross_entropy_mean(net.mu_logits(g, fs), labels);
        loss_mu = lmu.value()(0, 0);
        loss = loss.valid() ? g.add(loss, lmu) : lmu;
    }
    g.backward(loss);
    opt.step(net.params(), max_grad_norm);
    return {loss_p, loss_mu};
}

}  // namespace imoc::infomax
