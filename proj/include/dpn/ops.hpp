#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "dpn/tensor.hpp"

namespace dpn {

namespace detail {

template <class Scalar>
Tensor<Scalar> make_op(Shape shape, const char* op,
                       std::vector<std::shared_ptr<Node<Scalar>>> parents) {
  auto n = std::make_shared<Node<Scalar>>();
  n->shape = std::move(shape);
  n->value.resize(numel(n->shape));
  n->op = op;
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) n->parents = std::move(parents);
  return Tensor<Scalar>(std::move(n));
}

template <class Scalar>
void accumulate(const std::shared_ptr<Node<Scalar>>& p, const VecX<Scalar>& g) {
  if (p->requires_grad) p->grad += g;
}

}  // namespace detail

// C = A B with numpy-style rank lifting: a rank-1 left operand is a row
// vector, a rank-1 right operand is a column vector; lifted dims are dropped
// from the result.
template <class Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() < 1 || a.rank() > 2 || b.rank() < 1 || b.rank() > 2)
    throw ShapeError("matmul: operands must be rank 1 or 2, got " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const bool lift_a = a.rank() == 1;
  const bool lift_b = b.rank() == 1;
  const Index m = lift_a ? 1 : a.dim(0);
  const Index k = lift_a ? a.dim(0) : a.dim(1);
  const Index k2 = b.dim(0);
  const Index n = lift_b ? 1 : b.dim(1);
  if (k != k2)
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  Shape out_shape;
  if (!lift_a) out_shape.push_back(m);
  if (!lift_b) out_shape.push_back(n);
  if (out_shape.empty()) out_shape = {1};

  auto out = detail::make_op<Scalar>(std::move(out_shape), "matmul", {a.node(), b.node()});
  ConstMatMap<Scalar> A(a.value().data(), m, k);
  ConstMatMap<Scalar> B(b.value().data(), k, n);
  MatMap<Scalar>(out.value().data(), m, n) = A * B;

  if (out.requires_grad()) {
    out.node()->backprop = [an = a.node(), bn = b.node(), m, k, n](Node<Scalar>& self) {
      ConstMatMap<Scalar> dC(self.grad.data(), m, n);
      ConstMatMap<Scalar> A(an->value.data(), m, k);
      ConstMatMap<Scalar> B(bn->value.data(), k, n);
      if (an->requires_grad) MatMap<Scalar>(an->grad.data(), m, k) += dC * B.transpose();
      if (bn->requires_grad) MatMap<Scalar>(bn->grad.data(), k, n) += A.transpose() * dC;
    };
  }
  return out;
}

// Elementwise sum; a rank-1 right operand of width cols(a) broadcasts over rows.
template <class Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const bool broadcast = a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1);
  if (!broadcast && a.shape() != b.shape())
    throw ShapeError("add: shapes disagree: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  auto out = detail::make_op<Scalar>(a.shape(), "add", {a.node(), b.node()});
  if (broadcast) {
    const Index r = a.dim(0), c = a.dim(1);
    MatMap<Scalar>(out.value().data(), r, c) =
        ConstMatMap<Scalar>(a.value().data(), r, c).rowwise() +
        Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(b.value().data(), c);
  } else {
    out.value() = a.value() + b.value();
  }
  if (out.requires_grad()) {
    out.node()->backprop = [an = a.node(), bn = b.node(), broadcast](Node<Scalar>& self) {
      detail::accumulate(an, self.grad);
      if (!bn->requires_grad) return;
      if (broadcast) {
        const Index c = bn->value.size();
        const Index r = self.value.size() / c;
        Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(bn->grad.data(), c) +=
            ConstMatMap<Scalar>(self.grad.data(), r, c).colwise().sum().transpose();
      } else {
        bn->grad += self.grad;
      }
    };
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("sub: shapes disagree: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  auto out = detail::make_op<Scalar>(a.shape(), "sub", {a.node(), b.node()});
  out.value() = a.value() - b.value();
  if (out.requires_grad()) {
    out.node()->backprop = [an = a.node(), bn = b.node()](Node<Scalar>& self) {
      detail::accumulate(an, self.grad);
      if (bn->requires_grad) bn->grad -= self.grad;
    };
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("mul: shapes disagree: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  auto out = detail::make_op<Scalar>(a.shape(), "mul", {a.node(), b.node()});
  out.value() = a.value() * b.value();
  if (out.requires_grad()) {
    out.node()->backprop = [an = a.node(), bn = b.node()](Node<Scalar>& self) {
      if (an->requires_grad) an->grad += self.grad * bn->value;
      if (bn->requires_grad) bn->grad += self.grad * an->value;
    };
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& x, Scalar c) {
  auto out = detail::make_op<Scalar>(x.shape(), "scale", {x.node()});
  out.value() = x.value() * c;
  if (out.requires_grad()) {
    out.node()->backprop = [xn = x.node(), c](Node<Scalar>& self) {
      xn->grad += self.grad * c;
    };
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  auto out = detail::make_op<Scalar>(Shape{1}, "sum", {x.node()});
  out.value()[0] = x.value().sum();
  if (out.requires_grad()) {
    out.node()->backprop = [xn = x.node()](Node<Scalar>& self) {
      xn->grad += self.grad[0];
    };
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
  return scale(sum(x), Scalar(1) / Scalar(x.numel()));
}

template <class Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& x) {
  auto out = detail::make_op<Scalar>(x.shape(), "tanh", {x.node()});
  out.value() = x.value().tanh();
  if (out.requires_grad()) {
    out.node()->backprop = [xn = x.node()](Node<Scalar>& self) {
      xn->grad += self.grad * (Scalar(1) - self.value.square());
    };
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  auto out = detail::make_op<Scalar>(x.shape(), "sigmoid", {x.node()});
  out.value() = Scalar(1) / (Scalar(1) + (-x.value()).exp());
  if (out.requires_grad()) {
    out.node()->backprop = [xn = x.node()](Node<Scalar>& self) {
      xn->grad += self.grad * self.value * (Scalar(1) - self.value);
    };
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  auto out = detail::make_op<Scalar>(x.shape(), "relu", {x.node()});
  out.value() = x.value().max(Scalar(0));
  if (out.requires_grad()) {
    out.node()->backprop = [xn = x.node()](Node<Scalar>& self) {
      xn->grad += self.grad * (self.value > Scalar(0)).template cast<Scalar>();
    };
  }
  return out;
}

// Row-normalized softmax. `valid`, when non-empty, flags entries that may
// carry mass; invalid entries come out exactly 0 and pass no gradient.
template <class Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& x,
                            const std::vector<std::uint8_t>& valid = {}) {
  if (x.rank() < 1 || x.rank() > 2)
    throw ShapeError("softmax_rows: expected rank 1 or 2, got " + shape_str(x.shape()));
  if (!valid.empty() && static_cast<Index>(valid.size()) != x.numel())
    throw ShapeError("softmax_rows: mask size " + std::to_string(valid.size()) +
                     " does not match " + shape_str(x.shape()));
  const Index r = x.rows(), c = x.cols();
  auto out = detail::make_op<Scalar>(x.shape(), "softmax_rows", {x.node()});
  for (Index i = 0; i < r; ++i) {
    const Scalar* xi = x.value().data() + i * c;
    Scalar* yi = out.value().data() + i * c;
    Scalar mx = std::numeric_limits<Scalar>::lowest();
    bool any = false;
    for (Index j = 0; j < c; ++j) {
      if (valid.empty() || valid[static_cast<std::size_t>(i * c + j)]) {
        mx = std::max(mx, xi[j]);
        any = true;
      }
    }
    if (!any)
      throw ValidationError("softmax_rows: fully masked row " + std::to_string(i));
    Scalar s = 0;
    for (Index j = 0; j < c; ++j) {
      const bool ok = valid.empty() || valid[static_cast<std::size_t>(i * c + j)];
      yi[j] = ok ? std::exp(xi[j] - mx) : Scalar(0);
      s += yi[j];
    }
    for (Index j = 0; j < c; ++j) yi[j] /= s;
  }
  if (out.requires_grad()) {
    out.node()->backprop = [xn = x.node(), r, c](Node<Scalar>& self) {
      for (Index i = 0; i < r; ++i) {
        const Scalar* y = self.value.data() + i * c;
        const Scalar* dy = self.grad.data() + i * c;
        Scalar dot = 0;
        for (Index j = 0; j < c; ++j) dot += dy[j] * y[j];
        Scalar* dx = xn->grad.data() + i * c;
        // masked entries have y == 0, so they receive exactly 0 here
        for (Index j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dot);
      }
    };
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> concat(const std::vector<Tensor<Scalar>>& parts, int axis = 0) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  const Index rank = parts.front().rank();
  if (rank == 1 && axis != 0) throw ShapeError("concat: rank-1 parts require axis 0");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  std::vector<std::shared_ptr<Node<Scalar>>> nodes;
  Index axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank)
      throw ShapeError("concat: mixed ranks among parts");
    for (Index d = 0; d < rank; ++d)
      if (d != axis && p.dim(d) != parts.front().dim(d))
        throw ShapeError("concat: non-axis dims disagree: " + shape_str(p.shape()) +
                         " vs " + shape_str(parts.front().shape()));
    axis_total += p.dim(axis);
    nodes.push_back(p.node());
  }
  Shape out_shape = parts.front().shape();
  out_shape[static_cast<std::size_t>(axis)] = axis_total;

  auto out = detail::make_op<Scalar>(out_shape, "concat", nodes);
  const Index out_cols = rank == 2 ? out_shape[1] : axis_total;
  const Index out_rows = rank == 2 ? out_shape[0] : 1;
  std::vector<Index> offsets;  // column (axis 1) or flat (axis 0) offsets
  if (rank == 1 || axis == 0) {
    Index off = 0;
    for (const auto& p : parts) {
      offsets.push_back(off);
      out.value().segment(off, p.numel()) = p.value();
      off += p.numel();
    }
  } else {
    Index col = 0;
    MatMap<Scalar> O(out.value().data(), out_rows, out_cols);
    for (const auto& p : parts) {
      offsets.push_back(col);
      O.block(0, col, out_rows, p.dim(1)) =
          ConstMatMap<Scalar>(p.value().data(), p.dim(0), p.dim(1));
      col += p.dim(1);
    }
  }
  if (out.requires_grad()) {
    std::vector<std::shared_ptr<Node<Scalar>>> srcs = nodes;
    out.node()->backprop = [srcs, offsets, rank, axis, out_rows, out_cols](Node<Scalar>& self) {
      for (std::size_t i = 0; i < srcs.size(); ++i) {
        auto& p = srcs[i];
        if (!p->requires_grad) continue;
        if (rank == 1 || axis == 0) {
          p->grad += self.grad.segment(offsets[i], p->value.size());
        } else {
          const Index pc = p->shape[1];
          MatMap<Scalar>(p->grad.data(), p->shape[0], pc) +=
              ConstMatMap<Scalar>(self.grad.data(), out_rows, out_cols)
                  .block(0, offsets[i], out_rows, pc);
        }
      }
    };
  }
  return out;
}

template <class Scalar>
std::vector<Tensor<Scalar>> split(const Tensor<Scalar>& x, Index n, int axis = 0) {
  if (n < 1) throw ShapeError("split: n must be >= 1");
  if (x.rank() == 1 && axis != 0) throw ShapeError("split: rank-1 input requires axis 0");
  if (axis != 0 && axis != 1) throw ShapeError("split: axis must be 0 or 1");
  const Index axis_size = x.dim(axis);
  if (axis_size % n != 0)
    throw ShapeError("split: axis size " + std::to_string(axis_size) +
                     " of " + shape_str(x.shape()) + " not divisible by " + std::to_string(n));
  const Index piece = axis_size / n;
  std::vector<Tensor<Scalar>> out;
  for (Index i = 0; i < n; ++i) {
    Shape s = x.shape();
    s[static_cast<std::size_t>(axis)] = piece;
    auto t = detail::make_op<Scalar>(s, "split", {x.node()});
    if (x.rank() == 1 || axis == 0) {
      const Index stride = x.rank() == 2 ? x.dim(1) : 1;
      t.value() = x.value().segment(i * piece * stride, piece * stride);
      if (t.requires_grad()) {
        const Index off = i * piece * stride;
        t.node()->backprop = [xn = x.node(), off](Node<Scalar>& self) {
          xn->grad.segment(off, self.value.size()) += self.grad;
        };
      }
    } else {
      const Index r = x.dim(0), c = x.dim(1);
      MatMap<Scalar>(t.value().data(), r, piece) =
          ConstMatMap<Scalar>(x.value().data(), r, c).block(0, i * piece, r, piece);
      if (t.requires_grad()) {
        const Index col = i * piece;
        t.node()->backprop = [xn = x.node(), col, r, c, piece](Node<Scalar>& self) {
          MatMap<Scalar>(xn->grad.data(), r, c).block(0, col, r, piece) +=
              ConstMatMap<Scalar>(self.grad.data(), r, piece);
        };
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

// Stacks rank-1 tensors of equal width into a matrix, one per row.
template <class Scalar>
Tensor<Scalar> stack_rows(const std::vector<Tensor<Scalar>>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const Index d = rows.front().numel();
  std::vector<std::shared_ptr<Node<Scalar>>> nodes;
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.numel() != d)
      throw ShapeError("stack_rows: expected rank-1 width " + std::to_string(d) +
                       ", got " + shape_str(r.shape()));
    nodes.push_back(r.node());
  }
  const Index m = static_cast<Index>(rows.size());
  auto out = detail::make_op<Scalar>(Shape{m, d}, "stack_rows", nodes);
  for (Index i = 0; i < m; ++i)
    out.value().segment(i * d, d) = rows[static_cast<std::size_t>(i)].value();
  if (out.requires_grad()) {
    out.node()->backprop = [nodes, d](Node<Scalar>& self) {
      for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i]->requires_grad)
          nodes[i]->grad += self.grad.segment(static_cast<Index>(i) * d, d);
    };
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> row(const Tensor<Scalar>& x, Index i) {
  if (x.rank() != 2) throw ShapeError("row: expected rank 2, got " + shape_str(x.shape()));
  if (i < 0 || i >= x.dim(0))
    throw ShapeError("row: index " + std::to_string(i) + " out of " + shape_str(x.shape()));
  const Index d = x.dim(1);
  auto out = detail::make_op<Scalar>(Shape{d}, "row", {x.node()});
  out.value() = x.value().segment(i * d, d);
  if (out.requires_grad()) {
    out.node()->backprop = [xn = x.node(), i, d](Node<Scalar>& self) {
      xn->grad.segment(i * d, d) += self.grad;
    };
  }
  return out;
}

// Mean of same-shaped tensors (multi-head pointer average).
template <class Scalar>
Tensor<Scalar> average(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("average: no parts");
  std::vector<std::shared_ptr<Node<Scalar>>> nodes;
  for (const auto& p : parts) {
    if (p.shape() != parts.front().shape())
      throw ShapeError("average: shapes disagree: " + shape_str(p.shape()) + " vs " +
                       shape_str(parts.front().shape()));
    nodes.push_back(p.node());
  }
  auto out = detail::make_op<Scalar>(parts.front().shape(), "average", nodes);
  out.value().setZero();
  for (const auto& p : parts) out.value() += p.value();
  const Scalar inv = Scalar(1) / Scalar(parts.size());
  out.value() *= inv;
  if (out.requires_grad()) {
    out.node()->backprop = [nodes, inv](Node<Scalar>& self) {
      for (const auto& p : nodes)
        if (p->requires_grad) p->grad += self.grad * inv;
    };
  }
  return out;
}

// Row gather; backward scatter-adds into the table. Unknown ids must already
// be mapped to the reserved UNK id by the caller.
template <class Scalar>
Tensor<Scalar> embedding_lookup(const Tensor<Scalar>& table, const std::vector<Index>& ids) {
  if (table.rank() != 2)
    throw ShapeError("embedding_lookup: table must be rank 2, got " + shape_str(table.shape()));
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  const Index v = table.dim(0), d = table.dim(1);
  for (Index id : ids)
    if (id < 0 || id >= v)
      throw ValidationError("embedding_lookup: id " + std::to_string(id) +
                            " out of vocabulary (size " + std::to_string(v) + ")");
  const Index len = static_cast<Index>(ids.size());
  auto out = detail::make_op<Scalar>(Shape{len, d}, "embedding_lookup", {table.node()});
  for (Index i = 0; i < len; ++i)
    out.value().segment(i * d, d) = table.value().segment(ids[static_cast<std::size_t>(i)] * d, d);
  if (out.requires_grad()) {
    out.node()->backprop = [tn = table.node(), ids, d](Node<Scalar>& self) {
      for (std::size_t i = 0; i < ids.size(); ++i)
        tn->grad.segment(ids[i] * d, d) += self.grad.segment(static_cast<Index>(i) * d, d);
    };
  }
  return out;
}

// Valid 1-D convolution + relu + max-over-time, fused. Sequences shorter than
// the window are right-zero-padded to window length. Gradient flows only to
// the argmax position of each filter (lowest index on ties).
template <class Scalar>
Tensor<Scalar> conv1d_maxpool(const Tensor<Scalar>& seq, const Tensor<Scalar>& filters,
                              const Tensor<Scalar>& bias) {
  if (seq.rank() != 2)
    throw ShapeError("conv1d_maxpool: seq must be rank 2, got " + shape_str(seq.shape()));
  if (filters.rank() != 3)
    throw ShapeError("conv1d_maxpool: filters must be rank 3 [w x d_in x f], got " +
                     shape_str(filters.shape()));
  const Index L = seq.dim(0), d = seq.dim(1);
  const Index w = filters.dim(0), fd = filters.dim(1), f = filters.dim(2);
  if (f == 0) throw ConfigError("conv1d_maxpool: zero filters");
  if (fd != d)
    throw ShapeError("conv1d_maxpool: filter depth " + std::to_string(fd) +
                     " vs input depth " + std::to_string(d));
  if (bias.rank() != 1 || bias.dim(0) != f)
    throw ShapeError("conv1d_maxpool: bias must be [f], got " + shape_str(bias.shape()));
  if (L < 1) throw ShapeError("conv1d_maxpool: empty sequence");

  const Index padded = std::max(L, w);
  const Index npos = padded - w + 1;
  auto out = detail::make_op<Scalar>(Shape{f},
                                     "conv1d_maxpool", {seq.node(), filters.node(), bias.node()});
  std::vector<Index> argmax(static_cast<std::size_t>(f), 0);
  std::vector<std::uint8_t> active(static_cast<std::size_t>(f), 0);
  const Scalar* sv = seq.value().data();
  const Scalar* fv = filters.value().data();
  for (Index j = 0; j < f; ++j) {
    Scalar best = std::numeric_limits<Scalar>::lowest();
    Index best_p = 0;
    bool best_pos = false;
    for (Index p = 0; p < npos; ++p) {
      Scalar z = bias.value()[j];
      for (Index r = 0; r < w; ++r) {
        const Index rowi = p + r;
        if (rowi >= L) continue;  // right zero padding
        for (Index c = 0; c < d; ++c)
          z += sv[rowi * d + c] * fv[(r * d + c) * f + j];
      }
      const Scalar a = std::max(z, Scalar(0));
      if (a > best) {
        best = a;
        best_p = p;
        best_pos = z > Scalar(0);
      }
    }
    out.value()[j] = best;
    argmax[static_cast<std::size_t>(j)] = best_p;
    active[static_cast<std::size_t>(j)] = best_pos ? 1 : 0;
  }
  if (out.requires_grad()) {
    out.node()->backprop = [sn = seq.node(), fn = filters.node(), bn = bias.node(),
                            argmax, active, L, d, w, f](Node<Scalar>& self) {
      for (Index j = 0; j < f; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;  // relu clipped
        const Scalar g = self.grad[j];
        const Index p = argmax[static_cast<std::size_t>(j)];
        if (bn->requires_grad) bn->grad[j] += g;
        for (Index r = 0; r < w; ++r) {
          const Index rowi = p + r;
          if (rowi >= L) continue;
          for (Index c = 0; c < d; ++c) {
            if (sn->requires_grad)
              sn->grad[rowi * d + c] += g * fn->value[(r * d + c) * f + j];
            if (fn->requires_grad)
              fn->grad[(r * d + c) * f + j] += g * sn->value[rowi * d + c];
          }
        }
      }
    };
  }
  return out;
}

// Inverted dropout on LSTM outputs; identity at inference or p == 0.
template <class Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double p, bool training, std::mt19937& rng) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout: probability must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  VecX<Scalar> mask(x.numel());
  const Scalar keep_scale = Scalar(1.0 / (1.0 - p));
  for (Index i = 0; i < x.numel(); ++i) {
    const double u = rng() * (1.0 / 4294967296.0);
    mask[i] = u < p ? Scalar(0) : keep_scale;
  }
  auto out = detail::make_op<Scalar>(x.shape(), "dropout", {x.node()});
  out.value() = x.value() * mask;
  if (out.requires_grad()) {
    out.node()->backprop = [xn = x.node(), mask](Node<Scalar>& self) {
      xn->grad += self.grad * mask;
    };
  }
  return out;
}

// -log softmax(logits)[target], numerically stabilized.
template <class Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& logits, Index target) {
  if (logits.rank() != 1)
    throw ShapeError("cross_entropy: logits must be rank 1, got " + shape_str(logits.shape()));
  const Index n = logits.dim(0);
  if (target < 0 || target >= n)
    throw ValidationError("cross_entropy: target " + std::to_string(target) +
                          " out of range for " + std::to_string(n) + " classes");
  const Scalar mx = logits.value().maxCoeff();
  VecX<Scalar> probs = (logits.value() - mx).exp();
  const Scalar z = probs.sum();
  probs /= z;
  auto out = detail::make_op<Scalar>(Shape{1}, "cross_entropy", {logits.node()});
  out.value()[0] = std::log(z) + mx - logits.value()[target];
  if (out.requires_grad()) {
    out.node()->backprop = [ln = logits.node(), probs, target](Node<Scalar>& self) {
      ln->grad += self.grad[0] * probs;
      ln->grad[target] -= self.grad[0];
    };
  }
  return out;
}

namespace detail {
inline std::atomic<int>& zero_mass_warnings() {
  static std::atomic<int> count{0};
  return count;
}
}  // namespace detail

// -log(dist[target]) over an already-normalized distribution (pointer loss).
// A target slot holding exactly zero mass indicates a masking bug upstream;
// the loss is clamped at 50 and a warning is emitted.
template <class Scalar>
Tensor<Scalar> neg_log_prob_at(const Tensor<Scalar>& dist, Index target) {
  if (dist.rank() != 1)
    throw ShapeError("neg_log_prob_at: distribution must be rank 1, got " +
                     shape_str(dist.shape()));
  if (target < 0 || target >= dist.dim(0))
    throw ValidationError("neg_log_prob_at: target " + std::to_string(target) +
                          " out of range for " + shape_str(dist.shape()));
  const Scalar p = dist.value()[target];
  auto out = detail::make_op<Scalar>(Shape{1}, "neg_log_prob_at", {dist.node()});
  if (p <= Scalar(0)) {
    out.value()[0] = Scalar(50);
    if (detail::zero_mass_warnings()++ < 5)
      std::cerr << "warning: pointer target slot " << target
                << " carries zero attention mass (masking bug?)\n";
  } else {
    out.value()[0] = -std::log(p);
  }
  if (out.requires_grad()) {
    out.node()->backprop = [dn = dist.node(), target, p](Node<Scalar>& self) {
      if (p > Scalar(0)) dn->grad[target] -= self.grad[0] / p;
    };
  }
  return out;
}

// Standard LSTM cell, coupled bias, gate blocks ordered [i, f, g, o].
template <class Scalar>
struct LstmWeights {
  Tensor<Scalar> w_input;  // [d_in x 4H]
  Tensor<Scalar> w_recur;  // [H x 4H]
  Tensor<Scalar> bias;     // [4H]
};

template <class Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> lstm_cell(const Tensor<Scalar>& x,
                                                    const Tensor<Scalar>& h_prev,
                                                    const Tensor<Scalar>& c_prev,
                                                    const LstmWeights<Scalar>& w) {
  auto z = add(add(matmul(x, w.w_input), matmul(h_prev, w.w_recur)), w.bias);
  auto gates = split(z, 4, 0);
  auto i = sigmoid(gates[0]);
  auto f = sigmoid(gates[1]);
  auto g = tanh(gates[2]);
  auto o = sigmoid(gates[3]);
  auto c = add(mul(f, c_prev), mul(i, g));
  auto h = mul(o, tanh(c));
  return {h, c};
}

// Lowest index wins ties; deterministic prediction readout.
template <class Scalar>
Index argmax_index(const VecX<Scalar>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace dpn
