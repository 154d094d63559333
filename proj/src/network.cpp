#include "imoc/network.hpp"

namespace imoc::nn {

OptionNetwork::OptionNetwork(const NetworkSpec& spec) : spec_(spec) {
    if (spec_.n_states < 1 || spec_.n_actions < 1 || spec_.n_options < 1)
        throw std::invalid_argument("network: empty state, action or option space");
    const int f = spec_.feature_dim();
    if (spec_.encoder == EncoderKind::onehot_dense) {
        enc_w_ = &params_.create("encoder.w", spec_.n_states, spec_.hidden);
        enc_b_ = &params_.create("encoder.b", 1, spec_.hidden);
        if (spec_.split_encoder) {
            enc2_w_ = &params_.create("encoder2.w", spec_.n_states, spec_.hidden);
            enc2_b_ = &params_.create("encoder2.b", 1, spec_.hidden);
        }
    }
    pi_w_ = &params_.create("pi.w", f, spec_.n_options * spec_.n_actions);
    pi_b_ = &params_.create("pi.b", 1, spec_.n_options * spec_.n_actions);
    q_w_ = &params_.create("q.w", f, spec_.n_options);
    q_b_ = &params_.create("q.b", 1, spec_.n_options);
    beta_w_ = &params_.create("beta.w", f, spec_.n_options);
    beta_b_ = &params_.create("beta.b", 1, spec_.n_options);
    mu_w_ = &params_.create("mu.w", f, spec_.n_options);
    mu_b_ = &params_.create("mu.b", 1, spec_.n_options);
    inv_w_ = &params_.create("inverse.w", 2 * f, spec_.n_options);
    inv_b_ = &params_.create("inverse.b", 1, spec_.n_options);
}

void OptionNetwork::init(std::mt19937_64& rng) { init_orthogonal(params_, rng); }

Matrix OptionNetwork::encode_nograd(std::span<const int> states, bool head_side) const {
    const Eigen::Index n = static_cast<Eigen::Index>(states.size());
    if (spec_.encoder == EncoderKind::tabular) {
        Matrix feats = Matrix::Zero(n, spec_.n_states);
        for (Eigen::Index i = 0; i < n; ++i) feats(i, states[static_cast<std::size_t>(i)]) = 1.0;
        return feats;
    }
    const Param* w = head_side && enc2_w_ ? enc2_w_ : enc_w_;
    const Param* b = head_side && enc2_b_ ? enc2_b_ : enc_b_;
    Matrix feats(n, spec_.hidden);
    for (Eigen::Index i = 0; i < n; ++i)
        feats.row(i) = w->value.row(states[static_cast<std::size_t>(i)]);
    feats.rowwise() += b->value.row(0);
    return feats.cwiseMax(0.0);
}

OptionNetwork::Heads OptionNetwork::forward(std::span<const int> states) const {
    for (int s : states)
        if (s < 0 || s >= spec_.n_states) throw std::invalid_argument("forward: state out of range");
    Matrix feats = encode_nograd(states, false);
    Matrix hfeats = spec_.split_encoder ? encode_nograd(states, true) : feats;
    Heads h;
    h.pi_logits = feats * pi_w_->value;
    h.pi_logits.rowwise() += pi_b_->value.row(0);
    h.q = feats * q_w_->value;
    h.q.rowwise() += q_b_->value.row(0);
    h.beta_logits = hfeats * beta_w_->value;
    h.beta_logits.rowwise() += beta_b_->value.row(0);
    h.mu_logits = hfeats * mu_w_->value;
    h.mu_logits.rowwise() += mu_b_->value.row(0);
    return h;
}

OptionNetwork::Heads OptionNetwork::forward_all() const {
    std::vector<int> states(static_cast<std::size_t>(spec_.n_states));
    for (int s = 0; s < spec_.n_states; ++s) states[static_cast<std::size_t>(s)] = s;
    return forward(states);
}

Matrix OptionNetwork::inverse_logits(std::span<const int> start_states,
                                     std::span<const int> final_states) const {
    if (start_states.size() != final_states.size())
        throw std::invalid_argument("inverse_logits: batch size mismatch");
    Matrix fs = encode_nograd(start_states, true);
    Matrix ff = encode_nograd(final_states, true);
    Matrix cat(fs.rows(), fs.cols() + ff.cols());
    cat << fs, ff;
    Matrix out = cat * inv_w_->value;
    out.rowwise() += inv_b_->value.row(0);
    return out;
}

Var OptionNetwork::features(Graph& g, const std::vector<int>& states, bool head_side) const {
    if (spec_.encoder == EncoderKind::tabular) return g.onehot(spec_.n_states, states);
    Param* w = head_side && enc2_w_ ? enc2_w_ : enc_w_;
    Param* b = head_side && enc2_b_ ? enc2_b_ : enc_b_;
    Var pre = g.embed(*w, states);
    return g.relu(g.add_rowvec(pre, g.leaf(*b)));
}

Var OptionNetwork::policy_logits(Graph& g, Var feats) const {
    return g.affine(feats, g.leaf(*pi_w_), g.leaf(*pi_b_));
}

Var OptionNetwork::q_values(Graph& g, Var feats) const {
    return g.affine(feats, g.leaf(*q_w_), g.leaf(*q_b_));
}

Var OptionNetwork::beta_logits(Graph& g, Var feats) const {
    return g.affine(feats, g.leaf(*beta_w_), g.leaf(*beta_b_));
}

Var OptionNetwork::mu_logits(Graph& g, Var feats) const {
    return g.affine(feats, g.leaf(*mu_w_), g.leaf(*mu_b_));
}

Var OptionNetwork::inverse_logits(Graph& g, Var feats_start, Var feats_final) const {
    Var cat = g.concat_cols(feats_start, feats_final);
    return g.affine(cat, g.leaf(*inv_w_), g.leaf(*inv_b_));
}

std::vector<std::string> OptionNetwork::head_param_names(const std::string& head) const {
    return {head + ".w", head + ".b"};
}

}  // namespace imoc::nn
