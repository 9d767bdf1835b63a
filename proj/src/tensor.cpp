#include "afgn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "afgn/errors.hpp"

namespace afgn {
namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw NumericError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                       "x" + std::to_string(a.cols()) + ") vs (" + std::to_string(b.rows()) +
                       "x" + std::to_string(b.cols()) + ")");
}

std::shared_ptr<TensorNode> make_node(std::size_t rows, std::size_t cols) {
    auto node = std::make_shared<TensorNode>();
    node->rows = rows;
    node->cols = cols;
    node->values.assign(rows * cols, 0.0);
    return node;
}

// Elementwise unary op with pointwise derivative dy/dx expressed from y.
template <typename Fwd, typename Dy>
Tensor unary_op(const Tensor& x, Fwd fwd, Dy dy_from_y) {
    auto out = make_node(x.rows(), x.cols());
    for (std::size_t i = 0; i < out->size(); ++i) out->values[i] = fwd(x.values()[i]);
    out->parents = {x.node()};
    auto xn = x.node();
    auto on = out.get();
    out->backprop = [xn, on, dy_from_y] {
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->size(); ++i) {
            xn->grad[i] += on->grad[i] * dy_from_y(on->values[i], xn->values[i]);
        }
    };
    return Tensor(out);
}

}  // namespace

void TensorNode::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    auto node = make_node(rows, cols);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from_values(std::size_t rows, std::size_t cols, std::vector<double> values,
                           bool requires_grad) {
    if (values.size() != rows * cols) {
        throw NumericError("tensor: value count " + std::to_string(values.size()) +
                           " does not match shape " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
    auto node = std::make_shared<TensorNode>();
    node->rows = rows;
    node->cols = cols;
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_values(1, 1, {value}); }

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
    const std::size_t n = values.size();
    return from_values(1, n, std::move(values), requires_grad);
}

double Tensor::item() const {
    if (size() != 1) {
        throw NumericError("tensor: item() on non-scalar " + std::to_string(rows()) + "x" +
                           std::to_string(cols()));
    }
    return node_->values[0];
}

void Tensor::zero_grad() {
    node_->grad.assign(node_->values.size(), 0.0);
    node_->backward_done = false;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    auto out = make_node(a.rows(), b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double x = av[i * k + p];
            if (x == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out->values[i * n + j] += x * bv[p * n + j];
        }
    }
    out->parents = {a.node(), b.node()};
    auto an = a.node();
    auto bn = b.node();
    auto on = out.get();
    out->backprop = [an, bn, on, m, k, n] {
        an->ensure_grad();
        bn->ensure_grad();
        // dA = dY * B^T, dB = A^T * dY
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double g = on->grad[i * n + j];
                if (g == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) {
                    an->grad[i * k + p] += g * bn->values[p * n + j];
                    bn->grad[p * n + j] += g * an->values[i * k + p];
                }
            }
        }
    };
    return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
    auto out = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < out->size(); ++i) out->values[i] = a.values()[i] + b.values()[i];
    out->parents = {a.node(), b.node()};
    auto an = a.node();
    auto bn = b.node();
    auto on = out.get();
    out->backprop = [an, bn, on] {
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->size(); ++i) {
            an->grad[i] += on->grad[i];
            bn->grad[i] += on->grad[i];
        }
    };
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("hadamard", a, b);
    auto out = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < out->size(); ++i) out->values[i] = a.values()[i] * b.values()[i];
    out->parents = {a.node(), b.node()};
    auto an = a.node();
    auto bn = b.node();
    auto on = out.get();
    out->backprop = [an, bn, on] {
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->size(); ++i) {
            an->grad[i] += on->grad[i] * bn->values[i];
            bn->grad[i] += on->grad[i] * an->values[i];
        }
    };
    return Tensor(out);
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) shape_error("concat_cols", a, b);
    const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols();
    auto out = make_node(rows, ca + cb);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < ca; ++c) out->values[r * (ca + cb) + c] = a.at(r, c);
        for (std::size_t c = 0; c < cb; ++c) out->values[r * (ca + cb) + ca + c] = b.at(r, c);
    }
    out->parents = {a.node(), b.node()};
    auto an = a.node();
    auto bn = b.node();
    auto on = out.get();
    out->backprop = [an, bn, on, rows, ca, cb] {
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < ca; ++c) {
                an->grad[r * ca + c] += on->grad[r * (ca + cb) + c];
            }
            for (std::size_t c = 0; c < cb; ++c) {
                bn->grad[r * cb + c] += on->grad[r * (ca + cb) + ca + c];
            }
        }
    };
    return Tensor(out);
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double y, double) { return y * (1.0 - y); });
}

Tensor tanh_op(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::tanh(v); },
        [](double y, double) { return 1.0 - y * y; });
}

Tensor exp_op(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::exp(v); }, [](double y, double) { return y; });
}

Tensor log_op(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::log(v); }, [](double, double v) { return 1.0 / v; });
}

Tensor softmax_row(const Tensor& x) {
    auto out = make_node(x.rows(), x.cols());
    const std::size_t rows = x.rows(), cols = x.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        double max_v = x.at(r, 0);
        for (std::size_t c = 1; c < cols; ++c) max_v = std::max(max_v, x.at(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            out->values[r * cols + c] = std::exp(x.at(r, c) - max_v);
            denom += out->values[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) out->values[r * cols + c] /= denom;
    }
    out->parents = {x.node()};
    auto xn = x.node();
    auto on = out.get();
    out->backprop = [xn, on, rows, cols] {
        xn->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                dot += on->grad[r * cols + c] * on->values[r * cols + c];
            }
            for (std::size_t c = 0; c < cols; ++c) {
                xn->grad[r * cols + c] +=
                    on->values[r * cols + c] * (on->grad[r * cols + c] - dot);
            }
        }
    };
    return Tensor(out);
}

Tensor log_softmax_row(const Tensor& x) {
    auto out = make_node(x.rows(), x.cols());
    const std::size_t rows = x.rows(), cols = x.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        double max_v = x.at(r, 0);
        for (std::size_t c = 1; c < cols; ++c) max_v = std::max(max_v, x.at(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < cols; ++c) denom += std::exp(x.at(r, c) - max_v);
        const double log_denom = max_v + std::log(denom);
        for (std::size_t c = 0; c < cols; ++c) {
            out->values[r * cols + c] = x.at(r, c) - log_denom;
        }
    }
    out->parents = {x.node()};
    auto xn = x.node();
    auto on = out.get();
    out->backprop = [xn, on, rows, cols] {
        xn->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            double gsum = 0.0;
            for (std::size_t c = 0; c < cols; ++c) gsum += on->grad[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c) {
                xn->grad[r * cols + c] +=
                    on->grad[r * cols + c] - std::exp(on->values[r * cols + c]) * gsum;
            }
        }
    };
    return Tensor(out);
}

Tensor gather_row(const Tensor& x, const std::vector<std::size_t>& indices) {
    if (indices.size() != x.rows()) {
        throw NumericError("gather_row: need one index per row, got " +
                           std::to_string(indices.size()) + " for " +
                           std::to_string(x.rows()) + " rows");
    }
    for (std::size_t idx : indices) {
        if (idx >= x.cols()) {
            throw NumericError("gather_row: index " + std::to_string(idx) +
                               " out of range for " + std::to_string(x.cols()) + " cols");
        }
    }
    auto out = make_node(x.rows(), 1);
    for (std::size_t r = 0; r < x.rows(); ++r) out->values[r] = x.at(r, indices[r]);
    out->parents = {x.node()};
    auto xn = x.node();
    auto on = out.get();
    const std::size_t cols = x.cols();
    out->backprop = [xn, on, indices, cols] {
        xn->ensure_grad();
        for (std::size_t r = 0; r < on->rows; ++r) {
            xn->grad[r * cols + indices[r]] += on->grad[r];
        }
    };
    return Tensor(out);
}

Tensor select_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
    for (std::size_t r : rows) {
        if (r >= x.rows()) {
            throw NumericError("select_rows: row " + std::to_string(r) +
                               " out of range for " + std::to_string(x.rows()) + " rows");
        }
    }
    const std::size_t cols = x.cols();
    auto out = make_node(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < cols; ++c) out->values[i * cols + c] = x.at(rows[i], c);
    }
    out->parents = {x.node()};
    auto xn = x.node();
    auto on = out.get();
    out->backprop = [xn, on, rows, cols] {
        xn->ensure_grad();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t c = 0; c < cols; ++c) {
                xn->grad[rows[i] * cols + c] += on->grad[i * cols + c];
            }
        }
    };
    return Tensor(out);
}

Tensor sum(const Tensor& x) {
    auto out = make_node(1, 1);
    for (double v : x.values()) out->values[0] += v;
    out->parents = {x.node()};
    auto xn = x.node();
    auto on = out.get();
    out->backprop = [xn, on] {
        xn->ensure_grad();
        for (double& g : xn->grad) g += on->grad[0];
    };
    return Tensor(out);
}

Tensor scale(const Tensor& x, double s) {
    return unary_op(
        x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw NumericError("backward: loss must be a defined scalar tensor");
    }
    auto root = loss.node();
    if (root->backward_done) {
        throw NumericError("backward: repeated call without rebuilding the graph");
    }
    root->backward_done = true;

    // Reverse topological order by iterative DFS.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop();
    }
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, Config config)
    : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
        first_moment_.emplace_back(p.size(), 0.0);
        second_moment_.emplace_back(p.size(), 0.0);
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void AdamOptimizer::step() {
    if (config_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& p : params_) {
            for (double g : p.grad()) sq += g * g;
        }
        const double norm = std::sqrt(sq);
        if (norm > config_.clip_norm) {
            const double factor = config_.clip_norm / norm;
            for (auto& p : params_) {
                auto& grad = p.node()->grad;
                for (double& g : grad) g *= factor;
            }
        }
    }

    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        p.node()->ensure_grad();
        const auto& g = p.grad();
        auto& m = first_moment_[i];
        auto& v = second_moment_[i];
        auto& w = p.values();
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            w[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                         double eps, std::size_t max_coords_per_param) {
    for (auto& p : params) p.zero_grad();
    backward(f());
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) {
        p.node()->ensure_grad();
        analytic.push_back(p.grad());
    }

    std::mt19937_64 rng(12345);
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i].values();
        std::vector<std::size_t> coords(w.size());
        for (std::size_t j = 0; j < w.size(); ++j) coords[j] = j;
        if (max_coords_per_param > 0 && coords.size() > max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(max_coords_per_param);
        }
        for (std::size_t j : coords) {
            const double saved = w[j];
            w[j] = saved + eps;
            const double plus = f().item();
            w[j] = saved - eps;
            const double minus = f().item();
            w[j] = saved;
            const double fd = (plus - minus) / (2.0 * eps);
            const double g = analytic[i][j];
            const double err = std::abs(fd - g) / std::max(1e-6, std::abs(fd) + std::abs(g));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace afgn
