#include "tsastat/autodiff.hpp"

#include <cmath>
#include <sstream>

#include "tsastat/errors.hpp"

namespace tsastat {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

Tensor int_power(const Tensor& base, int k) {
  // Exact repeated multiplication; k >= 0.
  Tensor out = Tensor::Ones(base.rows(), base.cols());
  for (int i = 0; i < k; ++i) out *= base;
  return out;
}

}  // namespace

const char* op_name(Graph::Op op) {
  switch (op) {
    case Graph::Op::Leaf: return "leaf";
    case Graph::Op::Constant: return "constant";
    case Graph::Op::Add: return "add";
    case Graph::Op::Sub: return "sub";
    case Graph::Op::Mul: return "mul";
    case Graph::Op::Div: return "div";
    case Graph::Op::Neg: return "neg";
    case Graph::Op::Scale: return "scale";
    case Graph::Op::AddScalar: return "add_scalar";
    case Graph::Op::PowInt: return "pow_int";
    case Graph::Op::Abs: return "abs";
    case Graph::Op::Sqrt: return "sqrt";
    case Graph::Op::Max2: return "max2";
    case Graph::Op::Relu: return "relu";
    case Graph::Op::RowSum: return "row_sum";
    case Graph::Op::BcastSub: return "bcast_sub";
    case Graph::Op::Flatten: return "flatten";
    case Graph::Op::MatMul: return "matmul";
    case Graph::Op::Conv1d: return "conv1d";
    case Graph::Op::MaxPool1d: return "maxpool1d";
    case Graph::Op::SoftmaxCE: return "softmax_cross_entropy";
    case Graph::Op::Sum: return "sum";
    case Graph::Op::MaxAll: return "max_all";
    case Graph::Op::Pick: return "pick";
    case Graph::Op::MaxExcluding: return "max_excluding";
  }
  return "?";
}

Graph::NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Graph::Node& Graph::at(NodeId id) const {
  require(id >= 0 && id < static_cast<NodeId>(nodes_.size()),
          "graph: node id out of range");
  return nodes_[id];
}

std::string Graph::describe(NodeId id) const {
  std::ostringstream os;
  const Node& n = nodes_[id];
  os << "node " << id << " [" << op_name(n.op);
  if (!n.name.empty()) os << " '" << n.name << "'";
  os << "]";
  return os.str();
}

void Graph::fail(NodeId id, const std::string& message) const {
  throw NumericalError(describe(id) + ": " + message);
}

Graph::NodeId Graph::leaf(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                          bool differentiable) {
  require(!name.empty(), "graph: leaf needs a name");
  require(leaves_.find(name) == leaves_.end(), "graph: duplicate leaf '" + name + "'");
  require(rows > 0 && cols > 0, "graph: leaf '" + name + "' needs positive shape");
  Node n;
  n.op = Op::Leaf;
  n.name = name;
  n.differentiable = differentiable;
  n.value = Tensor::Zero(rows, cols);
  NodeId id = push(std::move(n));
  leaves_[name] = id;
  return id;
}

Graph::NodeId Graph::constant(Tensor value, const std::string& name) {
  require(value.size() > 0, "graph: constant needs a value");
  Node n;
  n.op = Op::Constant;
  n.name = name;
  n.value = std::move(value);
  n.bound = true;
  return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  require(same_shape(at(a).value, at(b).value), "graph: add shape mismatch");
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
  require(same_shape(at(a).value, at(b).value), "graph: sub shape mismatch");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
  require(same_shape(at(a).value, at(b).value), "graph: mul shape mismatch");
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::divide(NodeId a, NodeId b) {
  require(same_shape(at(a).value, at(b).value), "graph: divide shape mismatch");
  Node n;
  n.op = Op::Div;
  n.a = a;
  n.b = b;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::neg(NodeId a) {
  Node n;
  n.op = Op::Neg;
  n.a = a;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::scale(NodeId a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.darg = c;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::add_scalar(NodeId a, double c) {
  Node n;
  n.op = Op::AddScalar;
  n.a = a;
  n.darg = c;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::pow_int(NodeId a, int k) {
  require(k >= 0, "graph: pow_int needs k >= 0");
  Node n;
  n.op = Op::PowInt;
  n.a = a;
  n.iarg0 = k;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::abs(NodeId a) {
  Node n;
  n.op = Op::Abs;
  n.a = a;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::sqrt(NodeId a) {
  Node n;
  n.op = Op::Sqrt;
  n.a = a;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::max2(NodeId a, NodeId b) {
  require(same_shape(at(a).value, at(b).value), "graph: max2 shape mismatch");
  Node n;
  n.op = Op::Max2;
  n.a = a;
  n.b = b;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::relu(NodeId a) {
  Node n;
  n.op = Op::Relu;
  n.a = a;
  n.value = Tensor::Zero(at(a).value.rows(), at(a).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::row_sum(NodeId a) {
  Node n;
  n.op = Op::RowSum;
  n.a = a;
  n.value = Tensor::Zero(at(a).value.rows(), 1);
  return push(std::move(n));
}

Graph::NodeId Graph::bcast_sub(NodeId x, NodeId colvec) {
  require(at(colvec).value.cols() == 1, "graph: bcast_sub needs a column vector");
  require(at(x).value.rows() == at(colvec).value.rows(), "graph: bcast_sub row mismatch");
  Node n;
  n.op = Op::BcastSub;
  n.a = x;
  n.b = colvec;
  n.value = Tensor::Zero(at(x).value.rows(), at(x).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::flatten(NodeId a) {
  Node n;
  n.op = Op::Flatten;
  n.a = a;
  n.value = Tensor::Zero(at(a).value.size(), 1);
  return push(std::move(n));
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  require(at(a).value.cols() == at(b).value.rows(), "graph: matmul inner dim mismatch");
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.value = Tensor::Zero(at(a).value.rows(), at(b).value.cols());
  return push(std::move(n));
}

Graph::NodeId Graph::conv1d(NodeId x, NodeId w, NodeId b, int kernel) {
  const Eigen::Index channels = at(x).value.rows();
  const Eigen::Index steps = at(x).value.cols();
  const Eigen::Index filters = at(w).value.rows();
  require(kernel >= 1, "graph: conv1d kernel must be positive");
  require(steps >= kernel, "graph: conv1d input shorter than kernel");
  require(at(w).value.cols() == channels * kernel, "graph: conv1d weight shape mismatch");
  require(at(b).value.rows() == filters && at(b).value.cols() == 1,
          "graph: conv1d bias shape mismatch");
  Node n;
  n.op = Op::Conv1d;
  n.a = x;
  n.b = w;
  n.c = b;
  n.iarg0 = kernel;
  n.value = Tensor::Zero(filters, steps - kernel + 1);
  n.scratch = Tensor::Zero(channels * kernel, steps - kernel + 1);
  return push(std::move(n));
}

Graph::NodeId Graph::maxpool1d(NodeId x, int width) {
  const Eigen::Index channels = at(x).value.rows();
  const Eigen::Index steps = at(x).value.cols();
  require(width >= 1, "graph: maxpool1d width must be positive");
  const Eigen::Index pooled = steps / width;  // remainder dropped
  require(pooled >= 1, "graph: maxpool1d input shorter than pool width");
  Node n;
  n.op = Op::MaxPool1d;
  n.a = x;
  n.iarg0 = width;
  n.value = Tensor::Zero(channels, pooled);
  n.indices.assign(static_cast<size_t>(channels * pooled), 0);
  return push(std::move(n));
}

Graph::NodeId Graph::softmax_cross_entropy(NodeId logits, int label) {
  require(at(logits).value.cols() == 1, "graph: softmax_cross_entropy needs a column vector");
  Node n;
  n.op = Op::SoftmaxCE;
  n.a = logits;
  n.iarg0 = label;
  n.value = Tensor::Zero(1, 1);
  n.scratch = Tensor::Zero(at(logits).value.rows(), 1);
  return push(std::move(n));
}

Graph::NodeId Graph::sum(NodeId a) {
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.value = Tensor::Zero(1, 1);
  return push(std::move(n));
}

Graph::NodeId Graph::max_all(NodeId a) {
  Node n;
  n.op = Op::MaxAll;
  n.a = a;
  n.value = Tensor::Zero(1, 1);
  n.indices.assign(1, 0);
  return push(std::move(n));
}

Graph::NodeId Graph::pick(NodeId v, int index) {
  require(at(v).value.cols() == 1, "graph: pick needs a column vector");
  require(index >= 0 && index < at(v).value.rows(), "graph: pick index out of range");
  Node n;
  n.op = Op::Pick;
  n.a = v;
  n.iarg0 = index;
  n.value = Tensor::Zero(1, 1);
  return push(std::move(n));
}

Graph::NodeId Graph::max_excluding(NodeId v, int excluded) {
  require(at(v).value.cols() == 1, "graph: max_excluding needs a column vector");
  require(at(v).value.rows() >= 2, "graph: max_excluding needs at least two entries");
  Node n;
  n.op = Op::MaxExcluding;
  n.a = v;
  n.iarg0 = excluded;
  n.value = Tensor::Zero(1, 1);
  n.indices.assign(1, 0);
  return push(std::move(n));
}

void Graph::set_label(NodeId softmax_node, int label) {
  require(softmax_node >= 0 && softmax_node < node_count(), "graph: set_label bad node");
  Node& n = nodes_[softmax_node];
  require(n.op == Op::SoftmaxCE, "graph: set_label on a non softmax_cross_entropy node");
  require(label >= 0 && label < nodes_[n.a].value.rows(), "graph: label out of range");
  n.iarg0 = label;
}

void Graph::set_excluded(NodeId max_excluding_node, int excluded) {
  require(max_excluding_node >= 0 && max_excluding_node < node_count(),
          "graph: set_excluded bad node");
  Node& n = nodes_[max_excluding_node];
  require(n.op == Op::MaxExcluding, "graph: set_excluded on a non max_excluding node");
  require(excluded >= 0 && excluded < nodes_[n.a].value.rows(),
          "graph: excluded index out of range");
  n.iarg0 = excluded;
}

void Graph::mark_output(const std::string& name, NodeId node) {
  require(!name.empty(), "graph: output needs a name");
  require(node >= 0 && node < node_count(), "graph: mark_output bad node");
  outputs_[name] = node;
}

void Graph::bind(const std::string& leaf_name, const Tensor& value) {
  auto it = leaves_.find(leaf_name);
  require(it != leaves_.end(), "graph: no leaf named '" + leaf_name + "'");
  Node& n = nodes_[it->second];
  require(same_shape(n.value, value),
          "graph: leaf '" + leaf_name + "' expects shape " + shape_string(n.value) +
              ", got " + shape_string(value));
  n.value = value;
  n.bound = true;
}

bool Graph::has_leaf(const std::string& leaf_name) const {
  return leaves_.find(leaf_name) != leaves_.end();
}

Tensor& Graph::leaf_value(const std::string& leaf_name) {
  auto it = leaves_.find(leaf_name);
  require(it != leaves_.end(), "graph: no leaf named '" + leaf_name + "'");
  nodes_[it->second].bound = true;
  return nodes_[it->second].value;
}

const Tensor& Graph::leaf_value(const std::string& leaf_name) const {
  auto it = leaves_.find(leaf_name);
  require(it != leaves_.end(), "graph: no leaf named '" + leaf_name + "'");
  return nodes_[it->second].value;
}

void Graph::eval(Node& n) {
  switch (n.op) {
    case Op::Leaf:
      require(n.bound, "graph: leaf '" + n.name + "' was never bound");
      break;
    case Op::Constant:
      break;
    case Op::Add:
      n.value = nodes_[n.a].value + nodes_[n.b].value;
      break;
    case Op::Sub:
      n.value = nodes_[n.a].value - nodes_[n.b].value;
      break;
    case Op::Mul:
      n.value = nodes_[n.a].value * nodes_[n.b].value;
      break;
    case Op::Div:
      n.value = nodes_[n.a].value / nodes_[n.b].value;
      break;
    case Op::Neg:
      n.value = -nodes_[n.a].value;
      break;
    case Op::Scale:
      n.value = n.darg * nodes_[n.a].value;
      break;
    case Op::AddScalar:
      n.value = nodes_[n.a].value + n.darg;
      break;
    case Op::PowInt:
      n.value = int_power(nodes_[n.a].value, n.iarg0);
      break;
    case Op::Abs:
      n.value = nodes_[n.a].value.abs();
      break;
    case Op::Sqrt:
      n.value = nodes_[n.a].value.sqrt();
      break;
    case Op::Max2:
      n.value = nodes_[n.a].value.max(nodes_[n.b].value);
      break;
    case Op::Relu:
      n.value = nodes_[n.a].value.max(0.0);
      break;
    case Op::RowSum:
      n.value = nodes_[n.a].value.rowwise().sum();
      break;
    case Op::BcastSub:
      n.value = nodes_[n.a].value -
                nodes_[n.b].value.replicate(1, nodes_[n.a].value.cols());
      break;
    case Op::Flatten: {
      const Tensor& src = nodes_[n.a].value;
      Eigen::Map<Eigen::ArrayXd>(n.value.data(), n.value.size()) =
          Eigen::Map<const Eigen::ArrayXd>(src.data(), src.size());
      break;
    }
    case Op::MatMul:
      n.value = (nodes_[n.a].value.matrix() * nodes_[n.b].value.matrix()).array();
      break;
    case Op::Conv1d: {
      const Tensor& x = nodes_[n.a].value;
      const Eigen::Index channels = x.rows();
      const int kernel = n.iarg0;
      const Eigen::Index out_steps = n.value.cols();
      for (Eigen::Index c = 0; c < channels; ++c)
        for (int k = 0; k < kernel; ++k)
          n.scratch.row(c * kernel + k) = x.row(c).segment(k, out_steps);
      n.value = (nodes_[n.b].value.matrix() * n.scratch.matrix()).array() +
                nodes_[n.c].value.replicate(1, out_steps);
      break;
    }
    case Op::MaxPool1d: {
      const Tensor& x = nodes_[n.a].value;
      const int width = n.iarg0;
      const Eigen::Index pooled = n.value.cols();
      for (Eigen::Index c = 0; c < x.rows(); ++c) {
        for (Eigen::Index p = 0; p < pooled; ++p) {
          Eigen::Index best = p * width;
          double best_val = x(c, best);
          for (int k = 1; k < width; ++k) {
            const Eigen::Index col = p * width + k;
            if (x(c, col) > best_val) {  // tie keeps the earliest position
              best_val = x(c, col);
              best = col;
            }
          }
          n.indices[static_cast<size_t>(c * pooled + p)] = static_cast<int>(best);
          n.value(c, p) = best_val;
        }
      }
      break;
    }
    case Op::SoftmaxCE: {
      const Tensor& logits = nodes_[n.a].value;
      require(n.iarg0 >= 0 && n.iarg0 < logits.rows(),
              "graph: softmax_cross_entropy label out of range");
      const double peak = logits.maxCoeff();
      Tensor shifted = logits - peak;
      n.scratch = shifted.exp();
      const double total = n.scratch.sum();
      n.scratch /= total;
      n.value(0, 0) = std::log(total) - shifted(n.iarg0, 0);
      break;
    }
    case Op::Sum:
      n.value(0, 0) = nodes_[n.a].value.sum();
      break;
    case Op::MaxAll: {
      const Tensor& x = nodes_[n.a].value;
      const double* data = x.data();
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < x.size(); ++i)
        if (data[i] > data[best]) best = i;  // tie keeps the lowest flat index
      n.indices[0] = static_cast<int>(best);
      n.value(0, 0) = data[best];
      break;
    }
    case Op::Pick:
      n.value(0, 0) = nodes_[n.a].value(n.iarg0, 0);
      break;
    case Op::MaxExcluding: {
      const Tensor& v = nodes_[n.a].value;
      require(n.iarg0 >= 0 && n.iarg0 < v.rows(),
              "graph: max_excluding index out of range");
      Eigen::Index best = -1;
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        if (i == n.iarg0) continue;
        if (best < 0 || v(i, 0) > v(best, 0)) best = i;
      }
      n.indices[0] = static_cast<int>(best);
      n.value(0, 0) = v(best, 0);
      break;
    }
  }
}

void Graph::forward() {
  for (NodeId id = 0; id < node_count(); ++id) {
    Node& n = nodes_[id];
    eval(n);
    if (!n.value.allFinite()) fail(id, "non-finite value in forward pass");
  }
}

void Graph::zero_gradients() {
  for (Node& n : nodes_) {
    if (!same_shape(n.grad, n.value))
      n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
    else
      n.grad.setZero();
  }
}

void Graph::propagate(Node& n) {
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      break;
    case Op::Add:
      nodes_[n.a].grad += g;
      nodes_[n.b].grad += g;
      break;
    case Op::Sub:
      nodes_[n.a].grad += g;
      nodes_[n.b].grad -= g;
      break;
    case Op::Mul:
      nodes_[n.a].grad += g * nodes_[n.b].value;
      nodes_[n.b].grad += g * nodes_[n.a].value;
      break;
    case Op::Div:
      nodes_[n.a].grad += g / nodes_[n.b].value;
      nodes_[n.b].grad -= g * n.value / nodes_[n.b].value;
      break;
    case Op::Neg:
      nodes_[n.a].grad -= g;
      break;
    case Op::Scale:
      nodes_[n.a].grad += n.darg * g;
      break;
    case Op::AddScalar:
      nodes_[n.a].grad += g;
      break;
    case Op::PowInt:
      if (n.iarg0 >= 1)
        nodes_[n.a].grad +=
            g * static_cast<double>(n.iarg0) * int_power(nodes_[n.a].value, n.iarg0 - 1);
      break;
    case Op::Abs:
      nodes_[n.a].grad += g * nodes_[n.a].value.sign();
      break;
    case Op::Sqrt:
      nodes_[n.a].grad += g * 0.5 / n.value;
      break;
    case Op::Max2: {
      Tensor left_wins = (nodes_[n.a].value >= nodes_[n.b].value).cast<double>();
      nodes_[n.a].grad += g * left_wins;
      nodes_[n.b].grad += g * (1.0 - left_wins);
      break;
    }
    case Op::Relu:
      nodes_[n.a].grad += g * (nodes_[n.a].value > 0.0).cast<double>();
      break;
    case Op::RowSum:
      nodes_[n.a].grad += g.replicate(1, nodes_[n.a].value.cols());
      break;
    case Op::BcastSub:
      nodes_[n.a].grad += g;
      nodes_[n.b].grad -= g.rowwise().sum();
      break;
    case Op::Flatten: {
      Tensor& pg = nodes_[n.a].grad;
      Eigen::Map<Eigen::ArrayXd>(pg.data(), pg.size()) +=
          Eigen::Map<const Eigen::ArrayXd>(g.data(), g.size());
      break;
    }
    case Op::MatMul:
      nodes_[n.a].grad += (g.matrix() * nodes_[n.b].value.matrix().transpose()).array();
      nodes_[n.b].grad += (nodes_[n.a].value.matrix().transpose() * g.matrix()).array();
      break;
    case Op::Conv1d: {
      const int kernel = n.iarg0;
      const Eigen::Index channels = nodes_[n.a].value.rows();
      const Eigen::Index out_steps = n.value.cols();
      nodes_[n.b].grad += (g.matrix() * n.scratch.matrix().transpose()).array();
      nodes_[n.c].grad += g.rowwise().sum();
      Tensor col_grad = (nodes_[n.b].value.matrix().transpose() * g.matrix()).array();
      Tensor& xg = nodes_[n.a].grad;
      for (Eigen::Index c = 0; c < channels; ++c)
        for (int k = 0; k < kernel; ++k)
          xg.row(c).segment(k, out_steps) += col_grad.row(c * kernel + k);
      break;
    }
    case Op::MaxPool1d: {
      Tensor& xg = nodes_[n.a].grad;
      const Eigen::Index pooled = n.value.cols();
      for (Eigen::Index c = 0; c < n.value.rows(); ++c)
        for (Eigen::Index p = 0; p < pooled; ++p)
          xg(c, n.indices[static_cast<size_t>(c * pooled + p)]) += g(c, p);
      break;
    }
    case Op::SoftmaxCE: {
      Tensor delta = n.scratch;
      delta(n.iarg0, 0) -= 1.0;
      nodes_[n.a].grad += g(0, 0) * delta;
      break;
    }
    case Op::Sum:
      nodes_[n.a].grad += g(0, 0);
      break;
    case Op::MaxAll:
      nodes_[n.a].grad.data()[n.indices[0]] += g(0, 0);
      break;
    case Op::Pick:
      nodes_[n.a].grad(n.iarg0, 0) += g(0, 0);
      break;
    case Op::MaxExcluding:
      nodes_[n.a].grad(n.indices[0], 0) += g(0, 0);
      break;
  }
}

void Graph::backward(NodeId output, bool accumulate) {
  require(output >= 0 && output < node_count(), "graph: backward bad output node");
  require(nodes_[output].value.size() == 1,
          "graph: backward needs a scalar output, got shape " +
              shape_string(nodes_[output].value));
  for (Node& n : nodes_) {
    const bool keep = accumulate && n.op == Op::Leaf;
    if (!same_shape(n.grad, n.value))
      n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
    else if (!keep)
      n.grad.setZero();
  }
  nodes_[output].grad(0, 0) += 1.0;
  for (NodeId id = output; id >= 0; --id) propagate(nodes_[id]);
}

const Tensor& Graph::value(NodeId id) const { return at(id).value; }

const Tensor& Graph::gradient(NodeId id) const {
  const Node& n = at(id);
  require(same_shape(n.grad, n.value), "graph: gradient read before backward");
  return n.grad;
}

const Tensor& Graph::leaf_gradient(const std::string& leaf_name) const {
  auto it = leaves_.find(leaf_name);
  require(it != leaves_.end(), "graph: no leaf named '" + leaf_name + "'");
  const Node& n = nodes_[it->second];
  require(n.differentiable, "graph: leaf '" + leaf_name + "' is not differentiable");
  require(same_shape(n.grad, n.value), "graph: gradient read before backward");
  return n.grad;
}

std::map<std::string, Tensor> forward(Graph& graph, const std::map<std::string, Tensor>& inputs) {
  for (const auto& [name, value] : inputs) graph.bind(name, value);
  graph.forward();
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : graph.outputs()) out[name] = graph.value(id);
  return out;
}

std::map<std::string, Tensor> gradient(Graph& graph, const std::string& output_name,
                                       const std::vector<std::string>& wrt) {
  const auto& outputs = graph.outputs();
  auto it = outputs.find(output_name);
  if (it == outputs.end())
    throw ConfigError("graph: no output named '" + output_name + "'");
  graph.forward();
  graph.backward(it->second);
  std::map<std::string, Tensor> grads;
  for (const std::string& name : wrt) grads[name] = graph.leaf_gradient(name);
  return grads;
}

}  // namespace tsastat
