#pragma once

// Reverse-mode autodiff over dense row-major double matrices. A Tape records
// one forward pass; backward() accumulates into Parameter::grad.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gridlearn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Rotates every (2i, 2i+1) pair of each head of width `head_dim` in row r by
/// sign * positions[r] * base^(-2i / head_dim).
Mat rope_rotate(const Mat& x, const std::vector<int>& positions, int head_dim, double base, double sign);

/// Handle to a tape node.
struct Var {
  int id = -1;
  Tape* tape = nullptr;

  const Mat& value() const;
  Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

/// Index list whose -1 entries select an all-zero row.
using RowIndex = std::vector<int>;

class Tape {
 public:
  Var constant(Mat value);
  Var param(Parameter& p);

  /// Runs the recorded backward closures from `root` (1 x 1).
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  /// Hash of every ReLU gate (input > 0) evaluated so far; two passes with
  /// equal signatures lie on the same linear piece of all ReLUs.
  std::uint64_t gate_signature() const { return gates_; }

  // -- ops ---------------------------------------------------------------
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1 x n row over every row of a
  Var mul(Var a, Var b);        // elementwise
  Var scale(Var a, double s);
  Var relu(Var a);
  Var gelu(Var a);  // exact (erf) form
  Var sigmoid(Var a);
  Var silu(Var a);
  Var softplus(Var a);
  /// Row-wise RMS normalisation times a 1 x n gain.
  Var rmsnorm(Var x, Var gain, double eps = 1e-6);
  /// Output row r concatenates rows idx[r * k + j] of `a` for j < k.
  Var gather(Var a, const RowIndex& idx, int k);
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  /// Rotary embedding on each head of width `head_dim`, position per row.
  Var rope(Var x, const std::vector<int>& positions, int head_dim, double base = 10000.0);
  /// Causal grouped-query attention. Rows are tokens of consecutive
  /// sequences given by `segments` (lengths); attention never crosses them.
  Var attention(Var q, Var k, Var v, const std::vector<int>& segments, int n_heads, int n_kv_heads);

  /// Σ_r w_r · CE(logits_r, target_r).
  Var cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<double>& weights);
  /// Σ_r w_r · mean_j (pred_rj - target_rj)^2.
  Var mse(Var pred, const Mat& target, const std::vector<double>& weights);
  /// Σ_r w_r · (1 - cos(pred_r, target_r)); norms clamped below at `eps`.
  Var cosine_loss(Var pred, const Mat& target, const std::vector<double>& weights, double eps = 1e-8);
  /// Σ_i w_i L_i / Σ_i w_i over 1 x 1 inputs.
  Var weighted_average(const std::vector<Var>& losses, const std::vector<Var>& weights);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> backward;
  };
  Var push(Mat value, std::function<void()> backward = {});
  Mat& g(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  const Mat& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

  std::vector<Node> nodes_;
  std::uint64_t gates_ = 1469598103934665603ull;
  friend struct Var;
};

}  // namespace gridlearn
