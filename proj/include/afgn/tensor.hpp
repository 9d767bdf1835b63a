#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace afgn {

// One node of the computation tape. Values and gradients are dense
// row-major 2-D arrays; scalars are 1x1.
struct TensorNode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    bool backward_done = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backprop;  // pushes this node's grad into parents

    std::size_t size() const { return rows * cols; }
    void ensure_grad();
};

// Value-semantic handle to a tape node. Graphs are built by the free-op
// functions below and freed when the last handle drops.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor from_values(std::size_t rows, std::size_t cols,
                              std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value);
    static Tensor row(std::vector<double> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t size() const { return node_->size(); }

    double& at(std::size_t r, std::size_t c) { return node_->values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return node_->values[r * cols() + c]; }
    double item() const;  // scalar tensors only

    std::vector<double>& values() { return node_->values; }
    const std::vector<double>& values() const { return node_->values; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }

    void zero_grad();

    std::shared_ptr<TensorNode> node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<TensorNode> node_;
};

// Graph ops. Shape mismatches throw NumericError naming the op.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);
Tensor softmax_row(const Tensor& x);      // row-wise softmax
Tensor log_softmax_row(const Tensor& x);  // numerically stable log-softmax
// Picks values[r, index[r]] for each row; result is rows x 1.
Tensor gather_row(const Tensor& x, const std::vector<std::size_t>& indices);
// Stacks the chosen rows of x (embedding lookup); gradient scatters back.
Tensor select_rows(const Tensor& x, const std::vector<std::size_t>& rows);
Tensor sum(const Tensor& x);  // scalar
Tensor scale(const Tensor& x, double s);

// Reverse pass from a scalar loss. A second call on the same node without
// rebuilding the graph throws NumericError.
void backward(const Tensor& loss);

// Bias-corrected Adam over a fixed parameter list, updating in place.
class AdamOptimizer {
  public:
    struct Config {
        double learning_rate = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        double clip_norm = 5.0;  // global-norm gradient clip; <= 0 disables
    };

    AdamOptimizer(std::vector<Tensor> params, Config config);

    void step();
    void zero_grad();
    std::int64_t step_count() const { return step_count_; }

  private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
    Config config_;
    std::int64_t step_count_ = 0;
};

// Central finite differences against backward() gradients; returns the
// worst relative error over all parameter coordinates (or a capped random
// sample when max_coords_per_param > 0).
double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                         double eps = 1e-5, std::size_t max_coords_per_param = 0);

}  // namespace afgn
