#include "sparta/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sparta/error.hpp"

namespace sparta::ad {
namespace {

void same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

void same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw Error("operands belong to different graphs");
}

// Views a rank-1 operand as a row (left side) or a column (right side).
struct MatDims {
  std::size_t rows, cols;
};
MatDims left_dims(const Tensor& t) { return t.rank() == 2 ? MatDims{t.shape()[0], t.shape()[1]} : MatDims{1, t.shape()[0]}; }
MatDims right_dims(const Tensor& t) { return t.rank() == 2 ? MatDims{t.shape()[0], t.shape()[1]} : MatDims{t.shape()[0], 1}; }

}  // namespace

Graph::Graph(const ParameterStore* params) : params_(params) {
  nodes_.reserve(256);
  if (params_) param_nodes_.assign(params_->size(), 0);
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Graph::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var{this, nodes_.size() - 1};
}

Var Graph::param(ParamId id) {
  if (!params_) throw Error("graph has no parameter store");
  if (id.index >= param_nodes_.size()) throw Error("parameter id out of range");
  if (param_nodes_[id.index]) return Var{this, param_nodes_[id.index] - 1};
  const Parameter& p = (*params_)[id];
  nodes_.push_back(Node{p.tensor, {}, {}, p.trainable});
  param_nodes_[id.index] = nodes_.size();
  return Var{this, nodes_.size() - 1};
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  return n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

Var Graph::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Graph::record(Tensor value, std::span<const Var> parents, Backward backward) {
  bool req = false;
  for (Var p : parents) {
    if (p.graph != this) throw Error("operand belongs to a different graph");
    req = req || nodes_[p.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, req ? std::move(backward) : Backward{}, req});
  return Var{this, nodes_.size() - 1};
}

void Graph::backward(Var root) {
  if (root.graph != this) throw Error("root belongs to a different graph");
  if (nodes_[root.id].value.size() != 1)
    throw ShapeError("backward needs a scalar root, got shape " +
                     shape_string(nodes_[root.id].value.shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[root.id].requires_grad) return;
  grad_buffer(root.id)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward && !n.grad.empty()) n.backward(*this, i);
  }
}

void Graph::accumulate_gradients(GradientStore& grads, double scale) const {
  for (std::size_t p = 0; p < param_nodes_.size(); ++p) {
    if (!param_nodes_[p]) continue;
    const Node& n = nodes_[param_nodes_[p] - 1];
    if (!n.requires_grad || n.grad.empty()) continue;
    Tensor& dst = grads[p];
    if (dst.shape() != n.grad.shape()) throw ShapeError("gradient store does not match parameters");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * n.grad[i];
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  same_graph(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const MatDims da = left_dims(A), db = right_dims(B);
  if (da.cols != db.rows)
    throw ShapeError("matmul: shape mismatch " + shape_string(A.shape()) + " x " +
                     shape_string(B.shape()));
  const std::size_t m = da.rows, k = da.cols, n = db.cols;
  Shape out_shape;
  if (A.rank() == 2 && B.rank() == 2) out_shape = {m, n};
  else if (A.rank() == 2) out_shape = {m};
  else if (B.rank() == 2) out_shape = {n};
  else out_shape = {1};
  Tensor C(out_shape);
  const double* pa = A.values().data();
  const double* pb = B.values().data();
  double* pc = C.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record(std::move(C), {a, b}, [ia, ib, m, k, n](Graph& g, std::size_t self) {
    const double* dc = g.upstream(self).values().data();
    if (g.needs_grad(ia)) {
      const double* pb = g.value(ib).values().data();
      double* dA = g.grad_buffer(ia).values().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += dc[i * n + j] * pb[p * n + j];
          dA[i * k + p] += s;
        }
    }
    if (g.needs_grad(ib)) {
      const double* pa = g.value(ia).values().data();
      double* dB = g.grad_buffer(ib).values().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) dB[p * n + j] += av * dc[i * n + j];
        }
    }
  });
}

namespace {

// Elementwise binary op with per-operand local derivative callbacks.
template <class F, class DA, class DB>
Var binary(const char* name, Var a, Var b, F f, DA dfa, DB dfb) {
  same_graph(a, b);
  same_shape(name, a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor C(A.shape());
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = f(A[i], B[i]);
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record(std::move(C), {a, b}, [ia, ib, dfa, dfb](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    const Tensor& A = g.value(ia);
    const Tensor& B = g.value(ib);
    if (g.needs_grad(ia)) {
      Tensor& d = g.grad_buffer(ia);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * dfa(A[i], B[i]);
    }
    if (g.needs_grad(ib)) {
      Tensor& d = g.grad_buffer(ib);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * dfb(A[i], B[i]);
    }
  });
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <class F, class D>
Var unary(Var x, F f, D dfdx) {
  const Tensor& X = x.value();
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = f(X[i]);
  const std::size_t ix = x.id;
  return x.graph->record(std::move(Y), {x}, [ix, dfdx](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    const Tensor& X = g.value(ix);
    const Tensor& Y = g.value(self);
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * dfdx(X[i], Y[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var add_bias(Var x, Var bias) {
  same_graph(x, bias);
  const Tensor& X = x.value();
  const Tensor& b = bias.value();
  if (b.rank() != 1 || b.size() != X.cols())
    throw ShapeError("add_bias: shape mismatch " + shape_string(X.shape()) + " + " +
                     shape_string(b.shape()));
  Tensor Y = X;
  const std::size_t rows = X.rows(), cols = X.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) Y[r * cols + c] += b[c];
  const std::size_t ix = x.id, ib = bias.id;
  return x.graph->record(std::move(Y), {x, bias}, [ix, ib, rows, cols](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    if (g.needs_grad(ix)) g.grad_buffer(ix) += up;
    if (g.needs_grad(ib)) {
      Tensor& d = g.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) d[c] += up[r * cols + c];
    }
  });
}

Var scale(Var x, double factor) {
  return unary(
      x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var softmax(Var x, std::size_t axis) {
  const Tensor& X = x.value();
  if (X.empty()) throw ShapeError("softmax over an empty axis");
  if ((X.rank() == 1 && axis != 0) || axis > 1)
    throw ShapeError("softmax: bad axis " + std::to_string(axis) + " for shape " +
                     shape_string(X.shape()));
  // Normalize groups of `len` entries spaced by `stride`, starting at each group origin.
  const std::size_t rows = X.rows(), cols = X.cols();
  const bool over_cols = X.rank() == 1 || axis == 1;
  const std::size_t groups = over_cols ? rows : cols;
  const std::size_t len = over_cols ? cols : rows;
  const std::size_t stride = over_cols ? 1 : cols;
  const std::size_t step = over_cols ? cols : 1;
  Tensor Y(X.shape());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t base = gi * step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, X[base + j * stride]);
    double total = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      const double e = std::exp(X[base + j * stride] - mx);
      Y[base + j * stride] = e;
      total += e;
    }
    for (std::size_t j = 0; j < len; ++j) Y[base + j * stride] /= total;
  }
  const std::size_t ix = x.id;
  return x.graph->record(std::move(Y), {x}, [=](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    const Tensor& Y = g.value(self);
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t gi = 0; gi < groups; ++gi) {
      const std::size_t base = gi * step;
      double dot = 0.0;
      for (std::size_t j = 0; j < len; ++j) dot += up[base + j * stride] * Y[base + j * stride];
      for (std::size_t j = 0; j < len; ++j) {
        const std::size_t at = base + j * stride;
        d[at] += Y[at] * (up[at] - dot);
      }
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero operands");
  Graph* graph = parts[0].graph;
  const std::size_t rank = parts[0].value().rank();
  if ((rank == 1 && axis != 0) || axis > 1) throw ShapeError("concat: bad axis");
  for (Var p : parts) {
    if (p.value().rank() != rank) throw ShapeError("concat: operands differ in rank");
    if (rank == 2 && p.value().shape()[1 - axis] != parts[0].value().shape()[1 - axis])
      throw ShapeError("concat: shape mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
  }
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  Tensor Y;
  if (rank == 1 || axis == 0) {
    // Row-major data simply appends.
    std::vector<double> data;
    std::size_t lead = 0;
    for (Var p : parts) {
      data.insert(data.end(), p.value().values().begin(), p.value().values().end());
      lead += p.value().shape()[0];
      ids.push_back(p.id);
    }
    Shape shape = rank == 1 ? Shape{lead} : Shape{lead, parts[0].value().shape()[1]};
    Y = Tensor(shape, std::move(data));
    return graph->record(std::move(Y), parts, [ids](Graph& g, std::size_t self) {
      const Tensor& up = g.upstream(self);
      std::size_t off = 0;
      for (std::size_t id : ids) {
        const std::size_t n = g.value(id).size();
        if (g.needs_grad(id)) {
          Tensor& d = g.grad_buffer(id);
          for (std::size_t i = 0; i < n; ++i) d[i] += up[off + i];
        }
        off += n;
      }
    });
  }
  const std::size_t rows = parts[0].value().shape()[0];
  std::size_t total_cols = 0;
  for (Var p : parts) {
    total_cols += p.value().shape()[1];
    ids.push_back(p.id);
  }
  Y = Tensor({rows, total_cols});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& P = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < P.cols(); ++c) Y.at(r, off + c) = P.at(r, c);
    off += P.cols();
  }
  return graph->record(std::move(Y), parts, [ids, rows, total_cols](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    std::size_t off = 0;
    for (std::size_t id : ids) {
      const std::size_t c_n = g.value(id).cols();
      if (g.needs_grad(id)) {
        Tensor& d = g.grad_buffer(id);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < c_n; ++c) d[r * c_n + c] += up[r * total_cols + off + c];
      }
      off += c_n;
    }
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows of zero operands");
  const std::size_t n = rows[0].value().size();
  std::vector<double> data;
  data.reserve(n * rows.size());
  std::vector<std::size_t> ids;
  for (Var r : rows) {
    if (r.value().rank() != 1 || r.value().size() != n)
      throw ShapeError("stack_rows: shape mismatch " + shape_string(rows[0].shape()) + " vs " +
                       shape_string(r.shape()));
    data.insert(data.end(), r.value().values().begin(), r.value().values().end());
    ids.push_back(r.id);
  }
  Tensor Y({rows.size(), n}, std::move(data));
  return rows[0].graph->record(std::move(Y), rows, [ids, n](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.needs_grad(ids[k])) continue;
      Tensor& d = g.grad_buffer(ids[k]);
      for (std::size_t i = 0; i < n; ++i) d[i] += up[k * n + i];
    }
  });
}

Var row_select(Var x, std::size_t r) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || r >= X.shape()[0])
    throw ShapeError("row_select: row " + std::to_string(r) + " out of range for shape " +
                     shape_string(X.shape()));
  const std::size_t cols = X.cols();
  Tensor Y = Tensor::vector(std::vector<double>(X.row(r).begin(), X.row(r).end()));
  const std::size_t ix = x.id;
  return x.graph->record(std::move(Y), {x}, [ix, r, cols](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += up[c];
  });
}

Var row_select(Var x, std::span<const std::size_t> idx) {
  const Tensor& X = x.value();
  if (X.rank() != 2) throw ShapeError("row_select needs a matrix, got " + shape_string(X.shape()));
  if (idx.empty()) throw ShapeError("row_select with no rows");
  const std::size_t cols = X.cols();
  std::vector<double> data;
  data.reserve(idx.size() * cols);
  for (std::size_t r : idx) {
    if (r >= X.shape()[0])
      throw ShapeError("row_select: row " + std::to_string(r) + " out of range for shape " +
                       shape_string(X.shape()));
    data.insert(data.end(), X.row(r).begin(), X.row(r).end());
  }
  Tensor Y({idx.size(), cols}, std::move(data));
  std::vector<std::size_t> rows(idx.begin(), idx.end());
  const std::size_t ix = x.id;
  return x.graph->record(std::move(Y), {x}, [ix, rows, cols](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t k = 0; k < rows.size(); ++k)
      for (std::size_t c = 0; c < cols; ++c) d[rows[k] * cols + c] += up[k * cols + c];
  });
}

Var slice(Var x, std::size_t start, std::size_t len) {
  const Tensor& X = x.value();
  const std::size_t cols = X.cols(), rows = X.rows();
  if (len == 0 || start + len > cols)
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") out of range for shape " + shape_string(X.shape()));
  Shape shape = X.rank() == 1 ? Shape{len} : Shape{rows, len};
  Tensor Y(shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < len; ++c) Y[r * len + c] = X[r * cols + start + c];
  const std::size_t ix = x.id;
  return x.graph->record(std::move(Y), {x}, [=](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < len; ++c) d[r * cols + start + c] += up[r * len + c];
  });
}

Var transpose(Var x) {
  const Tensor& X = x.value();
  if (X.rank() != 2) throw ShapeError("transpose needs a matrix, got " + shape_string(X.shape()));
  const std::size_t rows = X.shape()[0], cols = X.shape()[1];
  Tensor Y({cols, rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) Y[c * rows + r] = X[r * cols + c];
  const std::size_t ix = x.id;
  return x.graph->record(std::move(Y), {x}, [ix, rows, cols](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += up[c * rows + r];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const std::size_t ix = x.id;
  return x.graph->record(Tensor::vector({s}), {x}, [ix](Graph& g, std::size_t self) {
    const double up = g.upstream(self)[0];
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += up;
  });
}

Var mean_rows(Var x) {
  const Tensor& X = x.value();
  if (X.rank() != 2) throw ShapeError("mean_rows needs a matrix, got " + shape_string(X.shape()));
  const std::size_t rows = X.shape()[0], cols = X.shape()[1];
  Tensor Y({cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) Y[c] += X[r * cols + c];
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t c = 0; c < cols; ++c) Y[c] *= inv;
  const std::size_t ix = x.id;
  return x.graph->record(std::move(Y), {x}, [ix, rows, cols, inv](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += up[c] * inv;
  });
}

Var dropout(Var x, double rate, Rng& rng, bool train) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(x.value().shape());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
  Var m = x.graph->constant(std::move(mask));
  return mul(x, m);
}

Var cross_entropy(Var logits, std::size_t gold) {
  const Tensor& z = logits.value();
  if (z.rank() != 1 || z.size() < 2)
    throw ShapeError("cross_entropy needs a logit vector of length >= 2, got " +
                     shape_string(z.shape()));
  if (gold >= z.size())
    throw Error("cross_entropy: gold class " + std::to_string(gold) + " out of range for " +
                std::to_string(z.size()) + " classes");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z.values()) mx = std::max(mx, v);
  double total = 0.0;
  for (double v : z.values()) total += std::exp(v - mx);
  const double loss = std::log(total) + mx - z[gold];
  const std::size_t iz = logits.id;
  return logits.graph->record(Tensor::vector({loss}), {logits},
                              [iz, gold](Graph& g, std::size_t self) {
                                const double up = g.upstream(self)[0];
                                Tensor p = softmax_values(g.value(iz));
                                p[gold] -= 1.0;
                                Tensor& d = g.grad_buffer(iz);
                                for (std::size_t i = 0; i < d.size(); ++i) d[i] += up * p[i];
                              });
}

Tensor softmax_values(const Tensor& logits) {
  if (logits.empty()) throw ShapeError("softmax over an empty axis");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits.values()) mx = std::max(mx, v);
  Tensor p(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] = std::exp(logits[i] - mx));
  for (std::size_t i = 0; i < p.size(); ++i) p[i] /= total;
  return p;
}

}  // namespace sparta::ad
