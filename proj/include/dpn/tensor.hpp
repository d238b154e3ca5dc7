#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dpn/errors.hpp"

namespace dpn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <class Scalar>
using VecX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using MatMap = Eigen::Map<RowMat<Scalar>>;

template <class Scalar>
using ConstMatMap = Eigen::Map<const RowMat<Scalar>>;

inline Index numel(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// One record of the autodiff graph. Interior nodes hold a backprop closure
// that scatters this node's grad into its parents; leaves hold none.
template <class Scalar>
struct Node {
  Shape shape;
  VecX<Scalar> value;  // flat buffer, row-major layout
  VecX<Scalar> grad;   // empty until backward() touches this node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
};

// Value-semantic handle to a graph node. Copies share the node.
template <class Scalar>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = std::make_shared<Node<Scalar>>();
    n->shape = std::move(shape);
    n->value = VecX<Scalar>::Zero(dpn::numel(n->shape));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor constant(Shape shape, Scalar fill) {
    Tensor t = zeros(std::move(shape));
    t.value().setConstant(fill);
    return t;
  }

  static Tensor from_flat(Shape shape, std::vector<Scalar> data,
                          bool requires_grad = false) {
    if (static_cast<Index>(data.size()) != dpn::numel(shape))
      throw ShapeError("from_flat: " + std::to_string(data.size()) +
                       " values do not fill shape " + shape_str(shape));
    Tensor t = zeros(std::move(shape), requires_grad);
    for (Index i = 0; i < t.numel(); ++i) t.value()[i] = data[static_cast<std::size_t>(i)];
    return t;
  }

  static Tensor scalar(Scalar v, bool requires_grad = false) {
    Tensor t = zeros({1}, requires_grad);
    t.value()[0] = v;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index numel() const { return node_->value.size(); }
  Index dim(Index i) const { return node_->shape[static_cast<std::size_t>(i)]; }

  Index rows() const {
    return rank() == 2 ? dim(0) : (rank() == 1 ? 1 : throw_rank());
  }
  Index cols() const {
    return rank() == 2 ? dim(1) : (rank() == 1 ? dim(0) : throw_rank());
  }

  VecX<Scalar>& value() { return node_->value; }
  const VecX<Scalar>& value() const { return node_->value; }
  VecX<Scalar>& grad() { return node_->grad; }
  const VecX<Scalar>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() > 0; }
  bool requires_grad() const { return node_->requires_grad; }

  Scalar item() const {
    if (numel() != 1)
      throw ShapeError("item: tensor " + shape_str(shape()) + " is not scalar");
    return node_->value[0];
  }

  // 2-D view over the flat buffer (rank-1 tensors map to a single row).
  ConstMatMap<Scalar> mat() const {
    return ConstMatMap<Scalar>(node_->value.data(), rows(), cols());
  }
  MatMap<Scalar> mat_mutable() {
    return MatMap<Scalar>(node_->value.data(), rows(), cols());
  }

  NodePtr node() const { return node_; }

 private:
  static Index throw_rank() { throw ShapeError("tensor is not rank 1 or 2"); }
  NodePtr node_;
};

namespace detail {

// Reverse topological order of the requires_grad subgraph under `root`.
template <class Scalar>
std::vector<Node<Scalar>*> topo_order(Node<Scalar>* root) {
  std::vector<Node<Scalar>*> order;
  if (!root->requires_grad) return order;
  std::unordered_set<Node<Scalar>*> seen;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<Scalar>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; traverse in reverse for backprop
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Interior grads are reset per call;
// leaf grads accumulate until explicitly zeroed, so repeated backward() adds.
template <class Scalar>
void backward(const Tensor<Scalar>& loss) {
  if (loss.numel() != 1)
    throw NumericError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;  // nothing reachable to differentiate

  auto order = detail::topo_order(loss.node().get());
  for (Node<Scalar>* n : order) {
    if (!n->parents.empty()) {
      n->grad = VecX<Scalar>::Zero(n->value.size());
    } else if (n->grad.size() == 0) {
      n->grad = VecX<Scalar>::Zero(n->value.size());
    }
  }
  loss.node()->grad[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

}  // namespace dpn
