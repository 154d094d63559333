#pragma once

#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace imoc::options {

/// One completed option execution: option o started at `start_state` and
/// terminated at `final_state`. The unit stored in the replay buffer.
struct OptionTransition {
    int start_state = -1;
    int final_state = -1;
    int option = -1;
};

/// Per-actor bookkeeping for the currently running option. `checked` lists
/// the arrival states where termination was sampled (b = 0) so far; the
/// terminating state is appended when the option ends.
struct ActiveOption {
    int option = -1;
    int start_state = -1;
    int steps = 0;
    std::vector<int> checked;

    bool active() const { return option >= 0; }
    void clear() {
        option = -1;
        start_state = -1;
        steps = 0;
        checked.clear();
    }
};

/// Marginalized option value: sum_o mu(o) q(o).
double v_omega(std::span<const double> q, std::span<const double> mu);

/// Option value upon arrival: (1 - beta) q + beta v.
double u_omega(double q, double v, double beta);

/// Bernoulli termination sample.
bool sample_termination(double beta, std::mt19937_64& rng);

}  // namespace imoc::options
