#pragma once

#include "imoc/network.hpp"
#include "imoc/options.hpp"

#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace imoc::infomax {

/// Bounded buffer of option transitions. Keeps the most recent `capacity`
/// records; pushing into a full buffer evicts the oldest.
class TransitionBuffer {
public:
    explicit TransitionBuffer(std::size_t capacity);

    void push(const options::OptionTransition& t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    const std::deque<options::OptionTransition>& all() const { return items_; }
    void clear() { items_.clear(); }

    /// Uniform sample without replacement of min(batch_size, size) records.
    /// Empty result signals "skip training" for an empty buffer.
    std::vector<options::OptionTransition> sample(std::size_t batch_size,
                                                  std::mt19937_64& rng) const;

    void save(std::ostream& out) const;
    void load(std::istream& in);

private:
    std::size_t capacity_;
    std::deque<options::OptionTransition> items_;
};

/// One trajectory slice under a single option that actually finished:
/// started at `start_state`, termination was sampled (and declined) at each
/// state of `checked`, and fired at `final_state`.
struct CompletedSegment {
    int option = -1;
    int start_state = -1;
    std::vector<int> checked;  // arrival states with b = 0, in order
    int final_state = -1;
};

/// log p-hat(o | x_s, x) with the classifier output floored at `floor`
/// before the log.
using LogInverseFn = std::function<double(int option, int start_state, int state)>;

/// Floored log-softmax lookup backed by the network's inverse head.
LogInverseFn network_log_inverse(const nn::OptionNetwork& net, double floor = 1e-12);

/// Termination objective for a batch of completed segments: a loss whose
/// gradient is the negative of the sampled mutual-information ascent
/// direction plus the termination-entropy bonus. For each segment the
/// checked states and the final state each contribute one term
///
///   stopgrad(beta(x)) * (log p(o|x_s, x) - log p(o|x_s, x_f)) * l_beta(x)
///   + c_entropy * H(beta(x)),
///
/// negated and averaged over segments. `include_beta_factor` keeps the
/// stop-gradient beta(x) weight (drop it to use the proof-form estimator).
/// Throws if any segment lacks a final state.
nn::Var termination_loss(nn::Graph& g, const nn::OptionNetwork& net,
                         const std::vector<CompletedSegment>& segments,
                         const LogInverseFn& log_inverse, double c_entropy,
                         bool include_beta_factor = true,
                         double normalizer = 0.0);

/// One cross-entropy gradient step for the option classifier p-hat and the
/// selection estimate mu-hat on a batch of transitions. Returns
/// (loss_p, loss_mu). An empty batch is a no-op returning zeros. The flags
/// drop either model from the step (the tuned AOC baseline only learns
/// mu-hat).
std::pair<double, double> fit_models(nn::OptionNetwork& net, nn::Optimizer& opt,
                                     const std::vector<options::OptionTransition>& batch,
                                     double max_grad_norm, bool train_inverse = true,
                                     bool train_mu = true);

}  // namespace imoc::infomax
