#pragma once

#include "imoc/nn.hpp"

#include <random>
#include <span>
#include <vector>

namespace imoc::nn {

enum class EncoderKind {
    onehot_dense,  // one-hot state -> dense `hidden` -> ReLU
    tabular,       // heads act directly on one-hot features (oracle fixtures)
};

/// Head and encoder layout for the option networks. All heads share one
/// encoder by default; `split_encoder` gives the termination / classifier
/// heads their own copy.
struct NetworkSpec {
    int n_states = 0;
    int n_actions = 0;
    int n_options = 1;
    int hidden = 128;
    EncoderKind encoder = EncoderKind::onehot_dense;
    bool split_encoder = false;

    int feature_dim() const { return encoder == EncoderKind::tabular ? n_states : hidden; }
};

/// All learnable functions of the agent behind one parameter store:
/// per-option policy logits, option values, termination logits, the
/// option-selection estimate (mu head) and the option classifier over
/// (start, final) state pairs (inverse head).
class OptionNetwork {
public:
    explicit OptionNetwork(const NetworkSpec& spec);

    const NetworkSpec& spec() const { return spec_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    void init(std::mt19937_64& rng);

    /// Per-state head outputs for a batch of states (no gradients recorded).
    struct Heads {
        Matrix pi_logits;    // n x (n_options * n_actions)
        Matrix q;            // n x n_options
        Matrix beta_logits;  // n x n_options
        Matrix mu_logits;    // n x n_options
    };
    Heads forward(std::span<const int> states) const;
    /// Heads for every state id in order; the per-iteration cache the agent
    /// samples rollouts from.
    Heads forward_all() const;

    /// Option-classifier logits for (start, final) pairs (no gradients).
    Matrix inverse_logits(std::span<const int> start_states,
                          std::span<const int> final_states) const;

    // Graph builders for loss construction. `head_side` selects the second
    // encoder when split_encoder is on.
    Var features(Graph& g, const std::vector<int>& states, bool head_side = false) const;
    Var policy_logits(Graph& g, Var feats) const;
    Var q_values(Graph& g, Var feats) const;
    Var beta_logits(Graph& g, Var feats) const;
    Var mu_logits(Graph& g, Var feats) const;
    Var inverse_logits(Graph& g, Var feats_start, Var feats_final) const;

    /// Names of the parameters owned by one head; used by gradient-leak checks.
    std::vector<std::string> head_param_names(const std::string& head) const;

private:
    NetworkSpec spec_;
    ParamStore params_;
    Param* enc_w_ = nullptr;
    Param* enc_b_ = nullptr;
    Param* enc2_w_ = nullptr;
    Param* enc2_b_ = nullptr;
    Param* pi_w_ = nullptr;
    Param* pi_b_ = nullptr;
    Param* q_w_ = nullptr;
    Param* q_b_ = nullptr;
    Param* beta_w_ = nullptr;
    Param* beta_b_ = nullptr;
    Param* mu_w_ = nullptr;
    Param* mu_b_ = nullptr;
    Param* inv_w_ = nullptr;
    Param* inv_b_ = nullptr;

    Matrix encode_nograd(std::span<const int> states, bool head_side) const;
};

}  // namespace imoc::nn
