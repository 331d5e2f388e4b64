#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "sparta/params.hpp"
#include "sparta/rng.hpp"
#include "sparta/tensor.hpp"

/// Tape-based reverse-mode differentiation over sparta::Tensor.
namespace sparta::ad {

class Graph;

/// Handle to a node in a Graph. Cheap to copy; only valid while its Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
};

/// A single forward pass. Nodes are appended in evaluation order, so the
/// tape is already topologically sorted. Confined to one thread.
class Graph {
 public:
  using Backward = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(const ParameterStore* params = nullptr);

  Var constant(Tensor value);
  /// Leaf that receives a gradient (used by tests and the gradient checker).
  Var variable(Tensor value);
  /// Leaf bound to a stored parameter; created once per graph and cached.
  /// Carries a gradient iff the parameter is trainable.
  Var param(ParamId id);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient after backward(); a zero tensor for nodes that received none.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  const ParameterStore* params() const { return params_; }

  /// Seeds d(root)/d(root) = 1 and propagates. `root` must hold one value.
  void backward(Var root);
  /// Adds scale * gradient of every trainable parameter leaf into `grads`.
  void accumulate_gradients(GradientStore& grads, double scale = 1.0) const;

  // Building blocks for primitives.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, std::span<const Var> parents, Backward backward);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of node `id`, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    bool requires_grad = false;
  };

  const ParameterStore* params_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> param_nodes_;  // parameter index -> node id + 1 (0 = none)
};

inline const Tensor& Var::value() const { return graph->value(*this); }

// ---------------------------------------------------------------------------
// Primitives. Every one registers its reverse-mode rule.

/// [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]; [k]x[k,n] -> [n]; [k]x[k] -> [1].
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Adds a length-n vector to every row of an [m,n] matrix (or to a length-n vector).
Var add_bias(Var x, Var bias);
Var scale(Var x, double factor);
Var tanh(Var x);
Var sigmoid(Var x);
Var leaky_relu(Var x, double slope);
/// Rank 1: axis must be 0. Rank 2: axis 0 (columns) or 1 (rows).
Var softmax(Var x, std::size_t axis);
/// Rank-1 operands concatenate along axis 0; rank-2 along 0 (rows) or 1 (cols).
Var concat(std::span<const Var> parts, std::size_t axis);
/// Stacks equal-length vectors as the rows of a matrix.
Var stack_rows(std::span<const Var> rows);
/// Row r of a matrix as a vector.
Var row_select(Var x, std::size_t r);
/// Rows `idx` of a matrix, in order, as an [idx.size(), cols] matrix.
Var row_select(Var x, std::span<const std::size_t> idx);
/// Elements [start, start+len) of a vector, or columns of a matrix.
Var slice(Var x, std::size_t start, std::size_t len);
Var transpose(Var x);
/// Sum of all entries, shape [1].
Var sum(Var x);
/// Column means of an [m,n] matrix, shape [n].
Var mean_rows(Var x);
/// Inverted dropout. Identity when !train or rate == 0.
Var dropout(Var x, double rate, Rng& rng, bool train);
/// -log softmax(logits)[gold], shape [1].
Var cross_entropy(Var logits, std::size_t gold);

// Forward-only helpers on plain tensors.
Tensor softmax_values(const Tensor& logits);

}  // namespace sparta::ad
