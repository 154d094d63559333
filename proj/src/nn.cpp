#include "imoc/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace imoc::nn {

// ---------------------------------------------------------------------------
// ParamStore

Param& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    items_.push_back(std::make_unique<Param>(name, rows, cols));
    return *items_.back();
}

Param* ParamStore::find(const std::string& name) const {
    for (const auto& p : items_)
        if (p->name == name) return p.get();
    return nullptr;
}

void ParamStore::zero_grads() {
    for (auto& p : items_) p->grad.setZero();
}

double ParamStore::grad_norm() const {
    double sq = 0.0;
    for (const auto& p : items_) sq += p->grad.squaredNorm();
    return std::sqrt(sq);
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += static_cast<std::size_t>(p->value.size());
    return n;
}

// ---------------------------------------------------------------------------
// Graph

const Matrix& Var::value() const {
    if (!graph_) throw std::logic_error("Var: empty handle");
    return graph_->value(*this);
}

const Matrix& Graph::value(Var v) const {
    const Node& n = node(v);
    return n.param ? n.param->value : n.storage;
}

const Matrix& Graph::node_value(int idx) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    return n.param ? n.param->value : n.storage;
}

bool Graph::node_needs_grad(int idx) const {
    return nodes_[static_cast<std::size_t>(idx)].needs_grad;
}

Var Graph::make(Matrix value, bool needs_grad, std::function<void(Graph&, const Matrix&)> back) {
    Node n;
    n.storage = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::accumulate(int idx, const Matrix& g) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.param) {
        n.param->grad += g;
        return;
    }
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.storage.rows(), n.storage.cols());
    n.grad += g;
}

Var Graph::leaf(Param& p) {
    Node n;
    n.param = &p;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::constant(Matrix value) { return make(std::move(value), false, nullptr); }

Var Graph::embed(Param& table, std::vector<int> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), table.value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = table.value.row(rows[i]);
    Param* t = &table;
    auto idx = std::make_shared<std::vector<int>>(std::move(rows));
    return make(std::move(out), true, [t, idx](Graph&, const Matrix& g) {
        for (std::size_t i = 0; i < idx->size(); ++i)
            t->grad.row((*idx)[i]) += g.row(static_cast<Eigen::Index>(i));
    });
}

Var Graph::onehot(int n_classes, const std::vector<int>& rows) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), n_classes);
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i), rows[i]) = 1.0;
    return constant(std::move(out));
}

Var Graph::affine(Var x, Var w, Var b) {
    const Matrix& xv = value(x);
    const Matrix& wv = value(w);
    const Matrix& bv = value(b);
    Matrix out = xv * wv;
    out.rowwise() += bv.row(0);
    bool ng = node(x).needs_grad || node(w).needs_grad || node(b).needs_grad;
    int xi = x.idx_, wi = w.idx_, bi = b.idx_;
    return make(std::move(out), ng, [xi, wi, bi](Graph& g, const Matrix& up) {
        if (g.node_needs_grad(xi)) g.accumulate(xi, up * g.node_value(wi).transpose());
        if (g.node_needs_grad(wi)) g.accumulate(wi, g.node_value(xi).transpose() * up);
        if (g.node_needs_grad(bi)) g.accumulate(bi, up.colwise().sum());
    });
}

Var Graph::add_rowvec(Var x, Var b) {
    Matrix out = value(x);
    out.rowwise() += value(b).row(0);
    bool ng = node(x).needs_grad || node(b).needs_grad;
    int xi = x.idx_, bi = b.idx_;
    return make(std::move(out), ng, [xi, bi](Graph& g, const Matrix& up) {
        if (g.node_needs_grad(xi)) g.accumulate(xi, up);
        if (g.node_needs_grad(bi)) g.accumulate(bi, up.colwise().sum());
    });
}

Var Graph::matmul(Var a, Var b) {
    Matrix out = value(a) * value(b);
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ai = a.idx_, bi = b.idx_;
    return make(std::move(out), ng, [ai, bi](Graph& g, const Matrix& up) {
        if (g.node_needs_grad(ai)) g.accumulate(ai, up * g.node_value(bi).transpose());
        if (g.node_needs_grad(bi)) g.accumulate(bi, g.node_value(ai).transpose() * up);
    });
}

Var Graph::add(Var a, Var b) {
    Matrix out = value(a) + value(b);
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ai = a.idx_, bi = b.idx_;
    return make(std::move(out), ng, [ai, bi](Graph& g, const Matrix& up) {
        if (g.node_needs_grad(ai)) g.accumulate(ai, up);
        if (g.node_needs_grad(bi)) g.accumulate(bi, up);
    });
}

Var Graph::sub(Var a, Var b) {
    Matrix out = value(a) - value(b);
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ai = a.idx_, bi = b.idx_;
    return make(std::move(out), ng, [ai, bi](Graph& g, const Matrix& up) {
        if (g.node_needs_grad(ai)) g.accumulate(ai, up);
        if (g.node_needs_grad(bi)) g.accumulate(bi, -up);
    });
}

Var Graph::mul(Var a, Var b) {
    Matrix out = value(a).cwiseProduct(value(b));
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ai = a.idx_, bi = b.idx_;
    return make(std::move(out), ng, [ai, bi](Graph& g, const Matrix& up) {
        if (g.node_needs_grad(ai)) g.accumulate(ai, up.cwiseProduct(g.node_value(bi)));
        if (g.node_needs_grad(bi)) g.accumulate(bi, up.cwiseProduct(g.node_value(ai)));
    });
}

Var Graph::scale(Var a, double c) {
    Matrix out = value(a) * c;
    int ai = a.idx_;
    return make(std::move(out), node(a).needs_grad, [ai, c](Graph& g, const Matrix& up) {
        g.accumulate(ai, up * c);
    });
}

Var Graph::square(Var a) {
    Matrix out = value(a).array().square().matrix();
    int ai = a.idx_;
    return make(std::move(out), node(a).needs_grad, [ai](Graph& g, const Matrix& up) {
        g.accumulate(ai, (2.0 * up.array() * g.node_value(ai).array()).matrix());
    });
}

Var Graph::relu(Var a) {
    Matrix out = value(a).cwiseMax(0.0);
    int ai = a.idx_;
    return make(std::move(out), node(a).needs_grad, [ai](Graph& g, const Matrix& up) {
        g.accumulate(ai, (up.array() * (g.node_value(ai).array() > 0.0).cast<double>()).matrix());
    });
}

Var Graph::sigmoid(Var a) {
    Matrix out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
    int ai = a.idx_;
    auto s = std::make_shared<Matrix>(out);
    return make(std::move(out), node(a).needs_grad, [ai, s](Graph& g, const Matrix& up) {
        g.accumulate(ai, (up.array() * s->array() * (1.0 - s->array())).matrix());
    });
}

Var Graph::concat_cols(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row mismatch");
    Matrix out(av.rows(), av.cols() + bv.cols());
    out << av, bv;
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ai = a.idx_, bi = b.idx_;
    Eigen::Index ac = av.cols(), bc = bv.cols();
    return make(std::move(out), ng, [ai, bi, ac, bc](Graph& g, const Matrix& up) {
        if (g.node_needs_grad(ai)) g.accumulate(ai, up.leftCols(ac));
        if (g.node_needs_grad(bi)) g.accumulate(bi, up.rightCols(bc));
    });
}

namespace {
Matrix log_softmax_value(const Matrix& logits) {
    Matrix out = logits;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double mx = out.row(i).maxCoeff();
        double lse = std::log((out.row(i).array() - mx).exp().sum()) + mx;
        out.row(i).array() -= lse;
    }
    return out;
}
}  // namespace

Var Graph::log_softmax_rows(Var logits) {
    Matrix lp = log_softmax_value(value(logits));
    int li = logits.idx_;
    auto keep = std::make_shared<Matrix>(lp);
    return make(std::move(lp), node(logits).needs_grad, [li, keep](Graph& g, const Matrix& up) {
        Matrix p = keep->array().exp().matrix();
        Vector rowsum = up.rowwise().sum();
        g.accumulate(li, up - (p.array().colwise() * rowsum.array()).matrix());
    });
}

Var Graph::softmax_rows(Var logits) {
    Matrix p = log_softmax_value(value(logits)).array().exp().matrix();
    int li = logits.idx_;
    auto keep = std::make_shared<Matrix>(p);
    return make(std::move(p), node(logits).needs_grad, [li, keep](Graph& g, const Matrix& up) {
        Matrix prod = up.cwiseProduct(*keep);
        Vector rowsum = prod.rowwise().sum();
        g.accumulate(li, prod - (keep->array().colwise() * rowsum.array()).matrix());
    });
}

Var Graph::entropy_rows(Var logits) {
    Matrix lp = log_softmax_value(value(logits));
    Matrix p = lp.array().exp().matrix();
    Matrix h = (-(p.array() * lp.array()).rowwise().sum()).matrix();
    int li = logits.idx_;
    auto lp_keep = std::make_shared<Matrix>(std::move(lp));
    auto p_keep = std::make_shared<Matrix>(std::move(p));
    auto h_keep = std::make_shared<Matrix>(h);
    return make(std::move(h), node(logits).needs_grad,
                [li, lp_keep, p_keep, h_keep](Graph& g, const Matrix& up) {
                    // dH/dlogit_k = -p_k (log p_k + H)
                    Matrix grad =
                        (-(p_keep->array() *
                           (lp_keep->array().colwise() + h_keep->col(0).array()))).matrix();
                    g.accumulate(li, (grad.array().colwise() * up.col(0).array()).matrix());
                });
}

Var Graph::bernoulli_entropy(Var logits) {
    const Matrix& lv = value(logits);
    Matrix s = (1.0 / (1.0 + (-lv.array()).exp())).matrix();
    Matrix h(lv.rows(), lv.cols());
    for (Eigen::Index i = 0; i < lv.size(); ++i) {
        double p = s(i);
        double a = p > 0.0 ? -p * std::log(p) : 0.0;
        double b = p < 1.0 ? -(1.0 - p) * std::log(1.0 - p) : 0.0;
        h(i) = a + b;
    }
    int li = logits.idx_;
    auto s_keep = std::make_shared<Matrix>(std::move(s));
    return make(std::move(h), node(logits).needs_grad,
                [li, s_keep](Graph& g, const Matrix& up) {
                    // dH/dl = -l s (1 - s)
                    Matrix grad = (-g.node_value(li).array() * s_keep->array() *
                                   (1.0 - s_keep->array())).matrix();
                    g.accumulate(li, up.cwiseProduct(grad));
                });
}

Var Graph::cross_entropy_mean(Var logits, const std::vector<int>& labels) {
    const Matrix& lv = value(logits);
    if (static_cast<Eigen::Index>(labels.size()) != lv.rows())
        throw std::invalid_argument("cross_entropy_mean: label count mismatch");
    Matrix lp = log_softmax_value(lv);
    double loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        loss -= lp(static_cast<Eigen::Index>(i), labels[i]);
    loss /= static_cast<double>(labels.size());
    int li = logits.idx_;
    auto lp_keep = std::make_shared<Matrix>(std::move(lp));
    auto lab = std::make_shared<std::vector<int>>(labels);
    Matrix out(1, 1);
    out(0, 0) = loss;
    return make(std::move(out), node(logits).needs_grad,
                [li, lp_keep, lab](Graph& g, const Matrix& up) {
                    Matrix grad = lp_keep->array().exp().matrix();
                    for (std::size_t i = 0; i < lab->size(); ++i)
                        grad(static_cast<Eigen::Index>(i), (*lab)[i]) -= 1.0;
                    grad *= up(0, 0) / static_cast<double>(lab->size());
                    g.accumulate(li, grad);
                });
}

Var Graph::pick_cols(Var x, std::vector<int> idx) {
    const Matrix& xv = value(x);
    if (static_cast<Eigen::Index>(idx.size()) != xv.rows())
        throw std::invalid_argument("pick_cols: index count mismatch");
    Matrix out(xv.rows(), 1);
    for (std::size_t i = 0; i < idx.size(); ++i)
        out(static_cast<Eigen::Index>(i), 0) = xv(static_cast<Eigen::Index>(i), idx[i]);
    int xi = x.idx_;
    Eigen::Index rows = xv.rows(), cols = xv.cols();
    auto keep = std::make_shared<std::vector<int>>(std::move(idx));
    return make(std::move(out), node(x).needs_grad,
                [xi, keep, rows, cols](Graph& g, const Matrix& up) {
                    Matrix grad = Matrix::Zero(rows, cols);
                    for (std::size_t i = 0; i < keep->size(); ++i)
                        grad(static_cast<Eigen::Index>(i), (*keep)[i]) = up(static_cast<Eigen::Index>(i), 0);
                    g.accumulate(xi, grad);
                });
}

Var Graph::pick_block(Var x, std::vector<int> block, int block_size) {
    const Matrix& xv = value(x);
    if (static_cast<Eigen::Index>(block.size()) != xv.rows())
        throw std::invalid_argument("pick_block: index count mismatch");
    Matrix out(xv.rows(), block_size);
    for (std::size_t i = 0; i < block.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) =
            xv.block(static_cast<Eigen::Index>(i), block[i] * block_size, 1, block_size);
    int xi = x.idx_;
    Eigen::Index rows = xv.rows(), cols = xv.cols();
    auto keep = std::make_shared<std::vector<int>>(std::move(block));
    return make(std::move(out), node(x).needs_grad,
                [xi, keep, rows, cols, block_size](Graph& g, const Matrix& up) {
                    Matrix grad = Matrix::Zero(rows, cols);
                    for (std::size_t i = 0; i < keep->size(); ++i)
                        grad.block(static_cast<Eigen::Index>(i), (*keep)[i] * block_size, 1,
                                   block_size) = up.row(static_cast<Eigen::Index>(i));
                    g.accumulate(xi, grad);
                });
}

Var Graph::sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = value(a).sum();
    int ai = a.idx_;
    Eigen::Index rows = value(a).rows(), cols = value(a).cols();
    return make(std::move(out), node(a).needs_grad, [ai, rows, cols](Graph& g, const Matrix& up) {
        g.accumulate(ai, Matrix::Constant(rows, cols, up(0, 0)));
    });
}

Var Graph::mean(Var a) {
    double n = static_cast<double>(value(a).size());
    return scale(sum(a), 1.0 / n);
}

Var Graph::weighted_sum(Var x, Vector w) {
    const Matrix& xv = value(x);
    if (xv.cols() != 1 || xv.rows() != w.size())
        throw std::invalid_argument("weighted_sum: expects a column matching the weights");
    Matrix out(1, 1);
    out(0, 0) = (xv.col(0).array() * w.array()).sum();
    int xi = x.idx_;
    auto keep = std::make_shared<Vector>(std::move(w));
    return make(std::move(out), node(x).needs_grad, [xi, keep](Graph& g, const Matrix& up) {
        g.accumulate(xi, Matrix(*keep * up(0, 0)));
    });
}

double Graph::backward(Var loss) {
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) throw std::invalid_argument("backward: loss must be 1x1");
    if (!std::isfinite(lv(0, 0))) throw std::runtime_error("backward: non-finite loss value");
    Node& ln = node(loss);
    if (!ln.needs_grad) return lv(0, 0);
    ln.grad = Matrix::Ones(1, 1);
    for (int i = loss.idx_; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.needs_grad || !n.back || n.grad.size() == 0) continue;
        Matrix g = std::move(n.grad);
        n.grad.resize(0, 0);
        n.back(*this, g);
    }
    return lv(0, 0);
}

// ---------------------------------------------------------------------------
// Optimizers

double clip_global_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params.all()) {
        if (!p->grad.allFinite())
            throw std::runtime_error("clip_global_norm: non-finite gradient in " + p->name);
        sq += p->grad.squaredNorm();
    }
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        double factor = max_norm / norm;
        for (const auto& p : params.all()) p->grad *= factor;
    }
    return norm;
}

Optimizer::Optimizer(OptimizerConfig config, const ParamStore& params) : config_(config) {
    for (const auto& p : params.all()) {
        if (config_.kind == OptimizerKind::rmsprop) {
            sq_avg_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        } else {
            m1_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            m2_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
}

double Optimizer::step(ParamStore& params, double max_global_norm) {
    double norm = clip_global_norm(params, max_global_norm);
    ++t_;
    const auto& items = params.all();
    for (std::size_t i = 0; i < items.size(); ++i) {
        Param& p = *items[i];
        if (config_.kind == OptimizerKind::rmsprop) {
            sq_avg_[i].array() = config_.rms_smoothing * sq_avg_[i].array() +
                                 (1.0 - config_.rms_smoothing) * p.grad.array().square();
            p.value.array() -=
                config_.learning_rate * p.grad.array() / (sq_avg_[i].array().sqrt() + config_.eps);
        } else {
            m1_[i] = config_.adam_beta1 * m1_[i] + (1.0 - config_.adam_beta1) * p.grad;
            m2_[i].array() = config_.adam_beta2 * m2_[i].array() +
                             (1.0 - config_.adam_beta2) * p.grad.array().square();
            double c1 = 1.0 - std::pow(config_.adam_beta1, static_cast<double>(t_));
            double c2 = 1.0 - std::pow(config_.adam_beta2, static_cast<double>(t_));
            p.value.array() -= config_.learning_rate * (m1_[i].array() / c1) /
                               ((m2_[i].array() / c2).sqrt() + config_.eps);
        }
        p.grad.setZero();
    }
    return norm;
}

void Optimizer::save(std::ostream& out) const {
    write_u64(out, config_.kind == OptimizerKind::rmsprop ? 0 : 1);
    write_u64(out, static_cast<std::uint64_t>(t_));
    auto dump = [&out](const std::vector<Matrix>& ms) {
        write_u64(out, ms.size());
        for (const auto& m : ms) write_matrix(out, m);
    };
    if (config_.kind == OptimizerKind::rmsprop) {
        dump(sq_avg_);
    } else {
        dump(m1_);
        dump(m2_);
    }
}

void Optimizer::load(std::istream& in, const ParamStore& params) {
    std::uint64_t kind = read_u64(in);
    if ((kind == 0) != (config_.kind == OptimizerKind::rmsprop))
        throw std::runtime_error("optimizer load: kind mismatch");
    t_ = static_cast<long long>(read_u64(in));
    auto slurp = [&in, &params](std::vector<Matrix>& ms) {
        std::uint64_t n = read_u64(in);
        if (n != params.all().size())
            throw std::runtime_error("optimizer load: moment count mismatch");
        ms.clear();
        for (std::uint64_t i = 0; i < n; ++i) ms.push_back(read_matrix(in));
    };
    if (config_.kind == OptimizerKind::rmsprop) {
        slurp(sq_avg_);
    } else {
        slurp(m1_);
        slurp(m2_);
    }
}

// ---------------------------------------------------------------------------
// Initialization

Matrix random_orthogonal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const Eigen::Index big = std::max(rows, cols), small = std::min(rows, cols);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix a(big, small);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = gauss(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(big, small);
    Matrix r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
    // Sign-fix against the R diagonal so the sample is Haar distributed.
    for (Eigen::Index j = 0; j < small; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return rows <= cols ? Matrix(q.transpose()) : q;
}

void init_orthogonal(ParamStore& params, std::mt19937_64& rng) {
    for (const auto& p : params.all()) {
        if (p->value.rows() > 1 && p->value.cols() > 1)
            p->value = random_orthogonal(p->value.rows(), p->value.cols(), rng);
        else
            p->value.setZero();
        p->grad.setZero();
    }
}

// ---------------------------------------------------------------------------
// Binary I/O

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("checkpoint read: truncated stream");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    std::uint64_t n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("checkpoint read: truncated string");
    return s;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    write_u64(out, static_cast<std::uint64_t>(m.rows()));
    write_u64(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

Matrix read_matrix(std::istream& in) {
    std::uint64_t rows = read_u64(in), cols = read_u64(in);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw std::runtime_error("checkpoint read: truncated matrix");
    return m;
}

namespace {
constexpr std::uint64_t kParamsMagic = 0x434b50434f4d49ULL;
constexpr std::uint64_t kParamsVersion = 1;
}  // namespace

void save_params(std::ostream& out, const ParamStore& params) {
    write_u64(out, kParamsMagic);
    write_u64(out, kParamsVersion);
    write_u64(out, params.all().size());
    for (const auto& p : params.all()) {
        write_string(out, p->name);
        write_matrix(out, p->value);
    }
}

void load_params(std::istream& in, ParamStore& params) {
    if (read_u64(in) != kParamsMagic) throw std::runtime_error("checkpoint: bad magic");
    if (read_u64(in) != kParamsVersion) throw std::runtime_error("checkpoint: unsupported version");
    std::uint64_t n = read_u64(in);
    if (n != params.all().size()) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name = read_string(in);
        Param* p = params.find(name);
        if (!p) throw std::runtime_error("checkpoint: unknown parameter " + name);
        Matrix m = read_matrix(in);
        if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        p->value = std::move(m);
    }
}

}  // namespace imoc::nn
