#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace imoc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One named parameter block. `grad` is the accumulation buffer; it is
/// zeroed by the optimizer step.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    Param(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
};

class ParamStore {
public:
    Param& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    Param* find(const std::string& name) const;
    const std::vector<std::unique_ptr<Param>>& all() const { return items_; }
    void zero_grads();
    double grad_norm() const;
    std::size_t scalar_count() const;

private:
    std::vector<std::unique_ptr<Param>> items_;
};

class Graph;

/// Handle to a node in a Graph. Values are computed eagerly as the graph is
/// built, so `value()` is always available.
class Var {
public:
    Var() = default;
    const Matrix& value() const;
    bool valid() const { return graph_ != nullptr; }

private:
    friend class Graph;
    Var(Graph* g, int idx) : graph_(g), idx_(idx) {}
    Graph* graph_ = nullptr;
    int idx_ = -1;
};

/// Reverse-mode tape over matrix-valued nodes. The primitive set is closed:
/// affine maps, embeddings (one-hot times weight), ReLU, logistic,
/// row softmax / log-softmax / cross-entropy, categorical and Bernoulli
/// entropy, elementwise arithmetic, gathers, sums, and stop-gradient
/// (constants). Every loss in the project composes from these.
class Graph {
public:
    Var leaf(Param& p);
    Var constant(Matrix value);
    Var stop_gradient(Var x) { return constant(value(x)); }

    /// Row gather from a parameter table: equivalent to one-hot(rows) * table.
    Var embed(Param& table, std::vector<int> rows);
    /// One-hot rows as a constant (tabular feature mode).
    Var onehot(int n_classes, const std::vector<int>& rows);

    Var affine(Var x, Var w, Var b);  // x*w + b (b is 1 x m, broadcast)
    Var add_rowvec(Var x, Var b);     // x + b (b is 1 x m, broadcast)
    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double c);
    Var square(Var a);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var concat_cols(Var a, Var b);

    Var log_softmax_rows(Var logits);
    Var softmax_rows(Var logits);
    /// Per-row entropy of softmax(logits); n x 1.
    Var entropy_rows(Var logits);
    /// Elementwise Bernoulli entropy of logistic(logit).
    Var bernoulli_entropy(Var logits);
    /// -mean_i log softmax(logits)_i[label_i]
    Var cross_entropy_mean(Var logits, const std::vector<int>& labels);

    /// out(i, 0) = x(i, idx[i])
    Var pick_cols(Var x, std::vector<int> idx);
    /// out(i, j) = x(i, block[i] * block_size + j)
    Var pick_block(Var x, std::vector<int> block, int block_size);

    Var sum(Var a);
    Var mean(Var a);
    /// sum_i w[i] * x(i, 0) for a column node; weights are constants.
    Var weighted_sum(Var x, Vector w);

    const Matrix& value(Var v) const;

    /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, adding
    /// gradients into the bound Params. `loss` must be 1x1. Returns the loss
    /// value; throws std::runtime_error on a non-finite loss.
    double backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix storage;                 // empty for parameter leaves
        Param* param = nullptr;
        Matrix grad;
        bool needs_grad = false;
        std::function<void(Graph&, const Matrix&)> back;
    };

    Var make(Matrix value, bool needs_grad, std::function<void(Graph&, const Matrix&)> back);
    void accumulate(int idx, const Matrix& g);
    const Matrix& node_value(int idx) const;
    bool node_needs_grad(int idx) const;
    Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.idx_)]; }
    const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.idx_)]; }

    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { rmsprop, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::rmsprop;
    double learning_rate = 2e-3;
    // RmsProp (PyTorch defaults): squared-gradient smoothing and denominator eps.
    double rms_smoothing = 0.99;
    double eps = 1e-8;
    // Adam moments.
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
};

/// Rescales all gradients so the global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm. Throws on non-finite gradients.
double clip_global_norm(ParamStore& params, double max_norm);

class Optimizer {
public:
    Optimizer(OptimizerConfig config, const ParamStore& params);

    /// Clip to `max_global_norm`, apply one update, zero the gradient
    /// buffers. Returns the pre-clip gradient norm.
    double step(ParamStore& params, double max_global_norm);

    const OptimizerConfig& config() const { return config_; }
    long long steps_taken() const { return t_; }

    void save(std::ostream& out) const;
    void load(std::istream& in, const ParamStore& params);

private:
    OptimizerConfig config_;
    std::vector<Matrix> sq_avg_;  // rmsprop
    std::vector<Matrix> m1_, m2_;  // adam
    long long t_ = 0;
};

// ---------------------------------------------------------------------------
// Initialization

/// Orthogonal init (gain 1) for every matrix with both dimensions > 1;
/// rows orthonormal when rows <= cols, columns orthonormal otherwise.
/// Bias rows (1 x m) are left at zero.
void init_orthogonal(ParamStore& params, std::mt19937_64& rng);

/// Orthogonal matrix sample used by init_orthogonal; exposed for tests.
Matrix random_orthogonal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Checkpoint I/O (versioned binary; bit-exact round trip)

void save_params(std::ostream& out, const ParamStore& params);
void load_params(std::istream& in, ParamStore& params);

void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
void write_u64(std::ostream& out, std::uint64_t v);
std::uint64_t read_u64(std::istream& in);
void write_string(std::ostream& out, const std::string& s);
std::string read_string(std::istream& in);

}  // namespace imoc::nn
