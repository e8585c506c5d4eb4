#pragma once

// Reverse-mode differentiation over small dense vectors and matrices.
//
// A Tape records every operation in creation order, which is also a valid
// topological order, so backward() is a single reverse sweep. Values are
// stored row-major; a vector of length n has shape (n, 1) and a scalar has
// shape (1, 1).

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace citl::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  std::size_t size() const;
  int rows() const;
  int cols() const;
  const std::vector<double>& value() const;
  double scalar() const;
  const std::vector<double>& grad() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input; its gradient is available after backward().
  Var leaf(std::vector<double> values, int rows, int cols = 1);
  Var leaf(std::span<const double> values, int rows, int cols = 1);
  /// Input that never receives gradient.
  Var constant(std::vector<double> values, int rows, int cols = 1);
  Var constant(std::span<const double> values, int rows, int cols = 1);
  Var scalar_constant(double v) { return constant(std::vector<double>{v}, 1, 1); }

  /// Seeds d(root)/d(root) = 1 and propagates. root must be a scalar.
  void backward(Var root);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  friend struct Var;
  friend class OpBuilder;

  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    int rows = 1;
    int cols = 1;
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  Var push(Node node);
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
  std::vector<double>& grad_buffer(Var v);

  std::vector<Node> nodes_;
};

// Elementwise; shapes must match.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator-(Var a);
Var operator*(double s, Var a);
Var operator+(Var a, double s);

/// a * s where s is a scalar Var.
Var scale(Var a, Var s);

Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
/// max(a, 0); the subgradient at 0 is taken as 0.
Var relu(Var a);
/// log(1 + exp(a)), stable for large |a|.
Var softplus(Var a);

Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);
Var logsumexp(Var a);
Var log_softmax(Var a);
Var pick(Var a, std::size_t index);

/// W (r x c) times x (c) -> r.
Var matvec(Var w, Var x);
/// W^T (c x r) times x (r) -> c.
Var matvec_t(Var w, Var x);
/// Rows of a table, stacked into an (n x cols) matrix.
Var gather_rows(Var table, std::span<const int> rows);
/// Column-wise mean of an (n x c) matrix -> c.
Var mean_rows(Var m);
/// Stacks scalars or vectors end to end into one vector.
Var concat(std::span<const Var> parts);

/// x / ||x||_2. When ||x||_2 < min_norm the result is the constant basis
/// vector e1 and no gradient flows back.
Var normalize(Var x, double min_norm = 1e-8);

}  // namespace citl::ad
