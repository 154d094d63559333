#include "imoc/options.hpp"

#include <cmath>

namespace imoc::options {

double v_omega(std::span<const double> q, std::span<const double> mu) {
    if (q.size() != mu.size()) throw std::invalid_argument("v_omega: length mismatch");
    double sum = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        sum += mu[i] * q[i];
        mass += mu[i];
    }
    if (std::abs(mass - 1.0) > 1e-6) throw std::invalid_argument("v_omega: mu does not sum to 1");
    return sum;
}

double u_omega(double q, double v, double beta) {
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("u_omega: beta outside [0,1]");
    return (1.0 - beta) * q + beta * v;
}

bool sample_termination(double beta, std::mt19937_64& rng) {
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("sample_termination: beta outside [0,1]");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return unif(rng) < beta;
}

}  // namespace imoc::options
