#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mlfa/errors.hpp"
#include "mlfa/matrix.hpp"

namespace mlfa::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; the Tape owns all storage.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
  const Matrix& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

/// Reverse-mode tape over Matrix-valued nodes. Nodes are created in
/// topological order by construction, so backward() is a reverse sweep.
class Tape {
 public:
  Var leaf(Matrix value, bool requires_grad = false) {
    return push(std::move(value), requires_grad);
  }

  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Leaf bound to a named parameter; grads are collected per name after
  /// backward(). A name may be bound at most once per tape.
  Var param(const std::string& name, const Matrix& value) {
    for (const auto& [n, _] : named_)
      if (n == name) throw ShapeMismatch("param bound twice: " + name);
    Var v = leaf(value, true);
    named_.emplace_back(name, v.id);
    return v;
  }

  const Matrix& value(int id) const { return nodes_[id].value; }
  Matrix& grad(int id) { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  /// Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. Root must be 1x1.
  void backward(Var root) {
    if (root.tape != this) throw ShapeMismatch("backward: foreign var");
    if (nodes_[root.id].value.rows() != 1 || nodes_[root.id].value.cols() != 1)
      throw ShapeMismatch("backward: root must be scalar");
    nodes_[root.id].grad(0, 0) += 1.0;
    for (int i = root.id; i >= 0; --i)
      if (nodes_[i].requires_grad && nodes_[i].back) nodes_[i].back(*this);
  }

  /// Named parameter gradients accumulated during backward().
  std::vector<std::pair<std::string, const Matrix*>> named_grads() const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    out.reserve(named_.size());
    for (const auto& [name, id] : named_) out.emplace_back(name, &nodes_[id].grad);
    return out;
  }

  size_t node_count() const { return nodes_.size(); }

  Var push(Matrix value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.grad = Matrix(n.value.rows(), n.value.cols());
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    Var v;
    v.tape = this;
    v.id = static_cast<int>(nodes_.size()) - 1;
    return v;
  }

  void set_back(Var v, std::function<void(Tape&)> f) { nodes_[v.id].back = std::move(f); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, int>> named_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

namespace detail {

inline Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ShapeMismatch("vars from different tapes");
  return *a.tape;
}

inline bool any_grad(std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (v.tape->requires_grad(v.id)) return true;
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

inline Var add(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  if (!a.value().same_shape(b.value())) throw ShapeMismatch("add");
  Matrix val = a.value();
  val += b.value();
  Var out = t.push(std::move(val), detail::any_grad({a, b}));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, ib = b.id, io = out.id](Tape& tp) {
      const Matrix& g = tp.grad(io);
      if (tp.requires_grad(ia)) tp.grad(ia) += g;
      if (tp.requires_grad(ib)) tp.grad(ib) += g;
    });
  return out;
}

/// Hadamard product.
inline Var mul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  if (!a.value().same_shape(b.value())) throw ShapeMismatch("mul");
  Matrix val = a.value();
  for (size_t i = 0; i < val.size(); ++i) val.data()[i] *= b.value().data()[i];
  Var out = t.push(std::move(val), detail::any_grad({a, b}));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, ib = b.id, io = out.id](Tape& tp) {
      const Matrix& g = tp.grad(io);
      const Matrix& av = tp.value(ia);
      const Matrix& bv = tp.value(ib);
      if (tp.requires_grad(ia)) {
        Matrix& ga = tp.grad(ia);
        for (size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g.data()[i] * bv.data()[i];
      }
      if (tp.requires_grad(ib)) {
        Matrix& gb = tp.grad(ib);
        for (size_t i = 0; i < gb.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
      }
    });
  return out;
}

/// c0 * x + c1, elementwise with scalar constants.
inline Var affine(Var a, double c0, double c1) {
  Tape& t = *a.tape;
  Matrix val = a.value();
  for (size_t i = 0; i < val.size(); ++i) val.data()[i] = c0 * val.data()[i] + c1;
  Var out = t.push(std::move(val), t.requires_grad(a.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, io = out.id, c0](Tape& tp) {
      const Matrix& g = tp.grad(io);
      Matrix& ga = tp.grad(ia);
      for (size_t i = 0; i < ga.size(); ++i) ga.data()[i] += c0 * g.data()[i];
    });
  return out;
}

inline Var scale(Var a, double c) { return affine(a, c, 0.0); }

inline Var add_const(Var a, const Matrix& c) {
  Tape& t = *a.tape;
  if (!a.value().same_shape(c)) throw ShapeMismatch("add_const");
  Matrix val = a.value();
  val += c;
  Var out = t.push(std::move(val), t.requires_grad(a.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, io = out.id](Tape& tp) { tp.grad(ia) += tp.grad(io); });
  return out;
}

namespace detail {

template <class FwdFn, class DervFromOutFn>
inline Var unary_from_out(Var a, FwdFn fwd, DervFromOutFn derv) {
  Tape& t = *a.tape;
  Matrix val = a.value();
  for (size_t i = 0; i < val.size(); ++i) val.data()[i] = fwd(val.data()[i]);
  Var out = t.push(std::move(val), t.requires_grad(a.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, io = out.id, derv](Tape& tp) {
      const Matrix& g = tp.grad(io);
      const Matrix& y = tp.value(io);
      Matrix& ga = tp.grad(ia);
      for (size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g.data()[i] * derv(y.data()[i]);
    });
  return out;
}

}  // namespace detail

inline Var sigmoid(Var a) {
  return detail::unary_from_out(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

inline Var tanh_v(Var a) {
  return detail::unary_from_out(a, [](double x) { return std::tanh(x); },
                                [](double y) { return 1.0 - y * y; });
}

inline Var relu(Var a) {
  return detail::unary_from_out(a, [](double x) { return x > 0.0 ? x : 0.0; },
                                [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

/// Row-wise softmax with max-subtraction.
inline Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  Matrix val = a.value();
  for (int r = 0; r < val.rows(); ++r) {
    double* row = val.row(r);
    double mx = row[0];
    for (int c = 1; c < val.cols(); ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int c = 0; c < val.cols(); ++c) {
      row[c] = std::exp(row[c] - mx);
      z += row[c];
    }
    for (int c = 0; c < val.cols(); ++c) row[c] /= z;
  }
  Var out = t.push(std::move(val), t.requires_grad(a.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, io = out.id](Tape& tp) {
      const Matrix& g = tp.grad(io);
      const Matrix& y = tp.value(io);
      Matrix& ga = tp.grad(ia);
      for (int r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (int c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
        for (int c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
      }
    });
  return out;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  Var out = t.push(mlfa::matmul(a.value(), b.value()), detail::any_grad({a, b}));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, ib = b.id, io = out.id](Tape& tp) {
      const Matrix& g = tp.grad(io);
      if (tp.requires_grad(ia)) tp.grad(ia) += mlfa::matmul_nt(g, tp.value(ib));
      if (tp.requires_grad(ib)) tp.grad(ib) += mlfa::matmul_tn(tp.value(ia), g);
    });
  return out;
}

/// a @ b^T without materializing the transpose.
inline Var matmul_nt(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  Var out = t.push(mlfa::matmul_nt(a.value(), b.value()), detail::any_grad({a, b}));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, ib = b.id, io = out.id](Tape& tp) {
      const Matrix& g = tp.grad(io);
      if (tp.requires_grad(ia)) tp.grad(ia) += mlfa::matmul(g, tp.value(ib));
      if (tp.requires_grad(ib)) tp.grad(ib) += mlfa::matmul_tn(g, tp.value(ia));
    });
  return out;
}

/// Broadcast-add a 1xC row vector to every row.
inline Var add_rowvec(Var a, Var row) {
  Tape& t = detail::same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeMismatch("add_rowvec");
  Matrix val = a.value();
  for (int r = 0; r < val.rows(); ++r)
    for (int c = 0; c < val.cols(); ++c) val(r, c) += row.value()(0, c);
  Var out = t.push(std::move(val), detail::any_grad({a, row}));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, ir = row.id, io = out.id](Tape& tp) {
      const Matrix& g = tp.grad(io);
      if (tp.requires_grad(ia)) tp.grad(ia) += g;
      if (tp.requires_grad(ir)) {
        Matrix& gr = tp.grad(ir);
        for (int r = 0; r < g.rows(); ++r)
          for (int c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
      }
    });
  return out;
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

inline Var slice_rows(Var a, int r0, int r1) {
  Tape& t = *a.tape;
  if (r0 < 0 || r1 > a.rows() || r0 >= r1) throw ShapeMismatch("slice_rows");
  Matrix val(r1 - r0, a.cols());
  for (int r = r0; r < r1; ++r)
    for (int c = 0; c < a.cols(); ++c) val(r - r0, c) = a.value()(r, c);
  Var out = t.push(std::move(val), t.requires_grad(a.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, io = out.id, r0](Tape& tp) {
      const Matrix& g = tp.grad(io);
      Matrix& ga = tp.grad(ia);
      for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < g.cols(); ++c) ga(r0 + r, c) += g(r, c);
    });
  return out;
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw EmptyBatch("concat_rows");
  Tape& t = *parts[0].tape;
  const int cols = parts[0].cols();
  int rows = 0;
  bool rg = false;
  for (Var p : parts) {
    if (p.tape != &t || p.cols() != cols) throw ShapeMismatch("concat_rows");
    rows += p.rows();
    rg = rg || t.requires_grad(p.id);
  }
  Matrix val(rows, cols);
  int at = 0;
  for (Var p : parts) {
    for (int r = 0; r < p.rows(); ++r)
      for (int c = 0; c < cols; ++c) val(at + r, c) = p.value()(r, c);
    at += p.rows();
  }
  std::vector<std::pair<int, int>> spans;  // (id, row offset)
  at = 0;
  for (Var p : parts) {
    spans.emplace_back(p.id, at);
    at += p.rows();
  }
  Var out = t.push(std::move(val), rg);
  if (rg)
    t.set_back(out, [spans, io = out.id](Tape& tp) {
      const Matrix& g = tp.grad(io);
      for (const auto& [id, off] : spans) {
        if (!tp.requires_grad(id)) continue;
        Matrix& gp = tp.grad(id);
        for (int r = 0; r < gp.rows(); ++r)
          for (int c = 0; c < gp.cols(); ++c) gp(r, c) += g(off + r, c);
      }
    });
  return out;
}

inline Var concat_cols(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  if (a.rows() != b.rows()) throw ShapeMismatch("concat_cols");
  Matrix val(a.rows(), a.cols() + b.cols());
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) val(r, c) = a.value()(r, c);
    for (int c = 0; c < b.cols(); ++c) val(r, a.cols() + c) = b.value()(r, c);
  }
  Var out = t.push(std::move(val), detail::any_grad({a, b}));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, ib = b.id, io = out.id, ac = a.cols()](Tape& tp) {
      const Matrix& g = tp.grad(io);
      if (tp.requires_grad(ia)) {
        Matrix& ga = tp.grad(ia);
        for (int r = 0; r < ga.rows(); ++r)
          for (int c = 0; c < ga.cols(); ++c) ga(r, c) += g(r, c);
      }
      if (tp.requires_grad(ib)) {
        Matrix& gb = tp.grad(ib);
        for (int r = 0; r < gb.rows(); ++r)
          for (int c = 0; c < gb.cols(); ++c) gb(r, c) += g(r, ac + c);
      }
    });
  return out;
}

/// Rows of `a` selected by index, duplicates allowed (embedding lookup).
inline Var gather_rows(Var a, const std::vector<int>& idx) {
  Tape& t = *a.tape;
  for (int i : idx)
    if (i < 0 || i >= a.rows()) throw ShapeMismatch("gather_rows: index out of range");
  Matrix val(static_cast<int>(idx.size()), a.cols());
  for (size_t r = 0; r < idx.size(); ++r)
    for (int c = 0; c < a.cols(); ++c) val(static_cast<int>(r), c) = a.value()(idx[r], c);
  Var out = t.push(std::move(val), t.requires_grad(a.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, io = out.id, idx](Tape& tp) {
      const Matrix& g = tp.grad(io);
      Matrix& ga = tp.grad(ia);
      for (size_t r = 0; r < idx.size(); ++r)
        for (int c = 0; c < g.cols(); ++c) ga(idx[r], c) += g(static_cast<int>(r), c);
    });
  return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

/// Column means: [T x C] -> [1 x C].
inline Var mean_rows(Var a) {
  Tape& t = *a.tape;
  const int n = a.rows();
  Matrix val(1, a.cols());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < a.cols(); ++c) val(0, c) += a.value()(r, c) / n;
  Var out = t.push(std::move(val), t.requires_grad(a.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, io = out.id, n](Tape& tp) {
      const Matrix& g = tp.grad(io);
      Matrix& ga = tp.grad(ia);
      for (int r = 0; r < ga.rows(); ++r)
        for (int c = 0; c < ga.cols(); ++c) ga(r, c) += g(0, c) / n;
    });
  return out;
}

inline Var mean_all(Var a) {
  Tape& t = *a.tape;
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (size_t i = 0; i < a.value().size(); ++i) s += a.value().data()[i];
  Var out = t.push(Matrix::scalar(s / n), t.requires_grad(a.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, io = out.id, n](Tape& tp) {
      const double g = tp.grad(io)(0, 0);
      Matrix& ga = tp.grad(ia);
      for (size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g / n;
    });
  return out;
}

inline Var sum_all(Var a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (size_t i = 0; i < a.value().size(); ++i) s += a.value().data()[i];
  Var out = t.push(Matrix::scalar(s), t.requires_grad(a.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ia = a.id, io = out.id](Tape& tp) {
      const double g = tp.grad(io)(0, 0);
      Matrix& ga = tp.grad(ia);
      for (size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g;
    });
  return out;
}

// ---------------------------------------------------------------------------
// convolution / pooling over the time axis (rows = time, cols = channels)
// ---------------------------------------------------------------------------

/// Valid 1-D convolution over rows. input [T x Cin], weight [(k*Cin) x Cout]
/// in im2col layout (kernel tap major), bias [1 x Cout].
/// Output row t covers input rows [t*stride, t*stride + k).
inline Var conv1d(Var input, Var weight, Var bias, int kernel, int stride) {
  Tape& t = *input.tape;
  if (weight.tape != &t || bias.tape != &t) throw ShapeMismatch("conv1d tapes");
  const int in_t = input.rows(), cin = input.cols();
  const int cout = weight.cols();
  if (weight.rows() != kernel * cin) throw ShapeMismatch("conv1d weight");
  if (bias.rows() != 1 || bias.cols() != cout) throw ShapeMismatch("conv1d bias");
  if (in_t < kernel) throw ShapeMismatch("conv1d: input shorter than kernel");
  const int out_t = (in_t - kernel) / stride + 1;

  // im2col: unfolded[t, tap*cin + c] = input[t*stride + tap, c]
  Matrix unfolded(out_t, kernel * cin);
  for (int ot = 0; ot < out_t; ++ot)
    for (int tap = 0; tap < kernel; ++tap)
      for (int c = 0; c < cin; ++c)
        unfolded(ot, tap * cin + c) = input.value()(ot * stride + tap, c);

  Matrix val = mlfa::matmul(unfolded, weight.value());
  for (int r = 0; r < out_t; ++r)
    for (int c = 0; c < cout; ++c) val(r, c) += bias.value()(0, c);

  const bool rg = detail::any_grad({input, weight, bias});
  Var out = t.push(std::move(val), rg);
  if (rg)
    t.set_back(out, [ii = input.id, iw = weight.id, ib = bias.id, io = out.id,
                     u = std::move(unfolded), kernel, stride, cin](Tape& tp) {
      const Matrix& g = tp.grad(io);
      if (tp.requires_grad(iw)) tp.grad(iw) += mlfa::matmul_tn(u, g);
      if (tp.requires_grad(ib)) {
        Matrix& gb = tp.grad(ib);
        for (int r = 0; r < g.rows(); ++r)
          for (int c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      }
      if (tp.requires_grad(ii)) {
        const Matrix du = mlfa::matmul_nt(g, tp.value(iw));  // [out_t x k*cin]
        Matrix& gi = tp.grad(ii);
        for (int ot = 0; ot < du.rows(); ++ot)
          for (int tap = 0; tap < kernel; ++tap)
            for (int c = 0; c < cin; ++c)
              gi(ot * stride + tap, c) += du(ot, tap * cin + c);
      }
    });
  return out;
}

/// Mean over sliding windows of rows: out[t] = mean(input[t*stride .. +window)).
inline Var mean_pool_windows(Var input, int window, int stride) {
  Tape& t = *input.tape;
  const int in_t = input.rows(), cols = input.cols();
  if (in_t < window) throw ShapeMismatch("mean_pool_windows: input shorter than window");
  const int out_t = (in_t - window) / stride + 1;
  Matrix val(out_t, cols);
  for (int ot = 0; ot < out_t; ++ot)
    for (int r = 0; r < window; ++r)
      for (int c = 0; c < cols; ++c) val(ot, c) += input.value()(ot * stride + r, c) / window;
  Var out = t.push(std::move(val), t.requires_grad(input.id));
  if (out.tape->requires_grad(out.id))
    t.set_back(out, [ii = input.id, io = out.id, window, stride](Tape& tp) {
      const Matrix& g = tp.grad(io);
      Matrix& gi = tp.grad(ii);
      for (int ot = 0; ot < g.rows(); ++ot)
        for (int r = 0; r < window; ++r)
          for (int c = 0; c < g.cols(); ++c)
            gi(ot * stride + r, c) += g(ot, c) / window;
    });
  return out;
}

// ---------------------------------------------------------------------------
// custom scalar node: precomputed value and per-input analytic gradients
// ---------------------------------------------------------------------------

/// Scalar node whose gradients were computed externally (CTC, Viterbi
/// confidence, batch losses). grads[i] must match inputs[i]'s shape and holds
/// d(value)/d(inputs[i]).
inline Var custom_scalar(Tape& t, const std::vector<Var>& inputs, double value,
                         std::vector<Matrix> grads) {
  if (inputs.size() != grads.size()) throw ShapeMismatch("custom_scalar arity");
  bool rg = false;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].tape != &t) throw ShapeMismatch("custom_scalar tapes");
    if (!inputs[i].value().same_shape(grads[i])) throw ShapeMismatch("custom_scalar grad shape");
    rg = rg || t.requires_grad(inputs[i].id);
  }
  Var out = t.push(Matrix::scalar(value), rg);
  if (rg) {
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (Var v : inputs) ids.push_back(v.id);
    t.set_back(out, [ids, gs = std::move(grads), io = out.id](Tape& tp) {
      const double g = tp.grad(io)(0, 0);
      for (size_t i = 0; i < ids.size(); ++i) {
        if (!tp.requires_grad(ids[i])) continue;
        Matrix& gi = tp.grad(ids[i]);
        for (size_t j = 0; j < gi.size(); ++j) gi.data()[j] += g * gs[i].data()[j];
      }
    });
  }
  return out;
}

}  // namespace mlfa::ad
