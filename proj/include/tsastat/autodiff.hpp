#pragma once

#include <map>
#include <string>
#include <vector>

#include "tsastat/tensor.hpp"

namespace tsastat {

/// Reverse-mode automatic differentiation over a small fixed operation set:
/// elementwise arithmetic, integer powers, valid-mode 1D convolution,
/// non-overlapping max pooling, dense layers, ReLU, softmax cross-entropy,
/// reductions and the max/abs pieces needed for infinity norms.
///
/// A Graph is an append-only tape. Nodes are created through the builder
/// methods below; parents always precede children, so a single in-order
/// sweep evaluates the graph and a reverse sweep accumulates gradients.
/// Leaves are named and rebindable, which lets one graph be reused across
/// optimization iterations without reallocation.
///
/// Tensors bound to leaves are immutable values; a Graph instance is
/// single-writer during forward/backward. Independent Graph instances may
/// run concurrently.
class Graph {
public:
  using NodeId = int;

  enum class Op {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,        // darg * x
    AddScalar,    // x + darg
    PowInt,       // x^k elementwise, k = iarg0 >= 0
    Abs,
    Sqrt,
    Max2,         // elementwise max, tie -> left parent
    Relu,
    RowSum,       // n x m -> n x 1
    BcastSub,     // (n x m) - (n x 1) replicated across columns
    Flatten,      // n x m -> (n*m) x 1, row-major
    MatMul,       // (p x q) * (q x r)
    Conv1d,       // x: C x T, w: F x (C*K), b: F x 1 -> F x (T-K+1)
    MaxPool1d,    // C x T -> C x floor(T/width), stride = width
    SoftmaxCE,    // logits k x 1, label iarg0 -> 1 x 1
    Sum,          // -> 1 x 1
    MaxAll,       // -> 1 x 1, tie -> lowest row-major index
    Pick,         // v[iarg0] of a column vector -> 1 x 1
    MaxExcluding  // max over entries of a column vector skipping iarg0
  };

  // ---- construction -------------------------------------------------------

  /// Differentiable (or frozen, if differentiable=false) named input.
  NodeId leaf(const std::string& name, Eigen::Index rows, Eigen::Index cols,
              bool differentiable = true);
  NodeId constant(Tensor value, const std::string& name = "");

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId divide(NodeId a, NodeId b);
  NodeId neg(NodeId a);
  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);
  NodeId pow_int(NodeId a, int k);
  NodeId abs(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId max2(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  NodeId row_sum(NodeId a);
  NodeId bcast_sub(NodeId x, NodeId colvec);
  NodeId flatten(NodeId a);
  NodeId matmul(NodeId a, NodeId b);
  NodeId conv1d(NodeId x, NodeId w, NodeId b, int kernel);
  NodeId maxpool1d(NodeId x, int width);
  NodeId softmax_cross_entropy(NodeId logits, int label);
  NodeId sum(NodeId a);
  NodeId max_all(NodeId a);
  NodeId pick(NodeId v, int index);
  NodeId max_excluding(NodeId v, int excluded);

  /// Mutable per-example metadata (rebindable without rebuilding the tape).
  void set_label(NodeId softmax_node, int label);
  void set_excluded(NodeId max_excluding_node, int excluded);

  void mark_output(const std::string& name, NodeId node);

  // ---- execution ----------------------------------------------------------

  void bind(const std::string& leaf_name, const Tensor& value);
  bool has_leaf(const std::string& leaf_name) const;
  /// Direct mutable access to a leaf's storage (used by optimizers that
  /// update parameters in place between forward passes).
  Tensor& leaf_value(const std::string& leaf_name);
  const Tensor& leaf_value(const std::string& leaf_name) const;

  /// Evaluate every node. Throws NumericalError naming the node if any
  /// intermediate is non-finite; throws ConfigError if a leaf is unbound.
  void forward();

  /// Accumulate d(output)/d(node) for every node, output must be 1x1.
  /// With accumulate=true existing gradients are kept (for batch sums).
  void backward(NodeId output, bool accumulate = false);
  void zero_gradients();

  const Tensor& value(NodeId id) const;
  const Tensor& gradient(NodeId id) const;
  /// Gradient of the last backward() target with respect to a named leaf.
  /// Throws if the leaf was created with differentiable=false.
  const Tensor& leaf_gradient(const std::string& leaf_name) const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const std::map<std::string, NodeId>& outputs() const { return outputs_; }

private:
  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    NodeId c = -1;
    int iarg0 = 0;
    double darg = 0.0;
    Tensor value;
    Tensor grad;
    Tensor scratch;            // im2col buffer for Conv1d, softmax for SoftmaxCE
    std::vector<int> indices;  // winners for MaxPool1d / MaxAll / MaxExcluding
    std::string name;
    bool differentiable = false;  // leaves only
    bool bound = false;           // leaves only
  };

  NodeId push(Node n);
  const Node& at(NodeId id) const;
  [[noreturn]] void fail(NodeId id, const std::string& message) const;
  std::string describe(NodeId id) const;
  void eval(Node& n);
  void propagate(Node& n);

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> leaves_;
  std::map<std::string, NodeId> outputs_;
};

const char* op_name(Graph::Op op);

/// Bind the given inputs, evaluate, and return every marked output by name.
std::map<std::string, Tensor> forward(Graph& graph, const std::map<std::string, Tensor>& inputs);

/// Run backward from a named scalar output and return gradients for the
/// requested leaves, each shaped like its leaf.
std::map<std::string, Tensor> gradient(Graph& graph, const std::string& output_name,
                                       const std::vector<std::string>& wrt);

}  // namespace tsastat
