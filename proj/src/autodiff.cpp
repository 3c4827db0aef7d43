/* Copyright 2026 The FocusLeak Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "focusleak/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "focusleak/error.hpp"

namespace focusleak::ad {

namespace {

constexpr double kNormEps = 1e-12;
constexpr double kCosineFloor = 1e-24;

// Neumaier summation; full reductions feed finite-difference checks, where
// rounding noise in the value is divided by the step.
double compensated_sum(const std::vector<double>& xs) {
  double s = 0.0, c = 0.0;
  for (double v : xs) {
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}

void check_same_graph(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph) {
    throw ContractError("operands belong to different graphs");
  }
}

void check_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                        shape_str(b.shape));
  }
}

void check_rank(std::string_view op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw ContractError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                        shape_str(a.shape));
  }
}

void check_nonscalar(std::string_view op, const Tensor& a) {
  if (a.rank() == 0 || a.shape.back() == 0) {
    throw ContractError(std::string(op) + ": needs a non-empty last dimension, got " +
                        shape_str(a.shape));
  }
}

Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(numel(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (numel(shape) != data.size()) {
    throw ContractError("tensor shape " + shape_str(shape) + " holds " +
                        std::to_string(numel(shape)) + " values, got " +
                        std::to_string(data.size()));
  }
}

double Tensor::item() const {
  if (data.size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape));
  return data[0];
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scalar_mul: return "scalar_mul";
    case Op::matmul: return "matmul";
    case Op::tanh: return "tanh";
    case Op::relu: return "relu";
    case Op::softmax_lastdim: return "softmax_lastdim";
    case Op::mean_all: return "mean_all";
    case Op::sum_all: return "sum_all";
    case Op::l2_normalize_lastdim: return "l2_normalize_lastdim";
    case Op::cosine_similarity: return "cosine_similarity";
    case Op::log: return "log";
    case Op::clamp01_pass_through: return "clamp01_pass_through";
    case Op::gather_rows: return "gather_rows";
    case Op::bilinear_resample: return "bilinear_resample";
    case Op::gather: return "gather";
    case Op::reshape: return "reshape";
    case Op::transpose: return "transpose";
    case Op::add_row_broadcast: return "add_row_broadcast";
    case Op::mean_rows: return "mean_rows";
    case Op::div_scalar: return "div_scalar";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(*this); }

Var Graph::leaf(Tensor value, bool requires_grad) {
  for (double v : value.data) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in leaf tensor " + shape_str(value.shape));
  }
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{Op::leaf, {}, std::move(value), {}, requires_grad, nullptr});
  return Var{this, id};
}

Var Graph::push(Op op, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  for (double v : value.data) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite output from " + std::string(op_name(op)) + " at node " +
                         std::to_string(nodes_.size()));
    }
  }
  bool rg = false;
  for (std::size_t in : inputs) rg = rg || nodes_.at(in).requires_grad;
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), {}, rg, rg ? std::move(backward) : nullptr});
  return Var{this, id};
}

double* Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad.data();
}

void Graph::backward(Var root) {
  if (root.graph != this) throw ContractError("backward: root belongs to another graph");
  const Node& r = nodes_.at(root.id);
  if (r.value.size() != 1) {
    throw ContractError("backward: root must be scalar, got shape " + shape_str(r.value.shape));
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!r.requires_grad) return;
  grad_buffer(root.id)[0] = 1.0;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    for (double g : n.grad) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient at node " + std::to_string(id) + " (" +
                           std::string(op_name(n.op)) + ")");
      }
    }
    n.backward(*this, id);
  }
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return Tensor(n.value.shape, 0.0);
  return Tensor(n.value.shape, n.grad);
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
  check_same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  check_same_shape("add", x, y);
  Tensor out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] + y.data[i];
  return a.graph->push(Op::add, {a.id, b.id}, std::move(out), [](Graph& g, std::size_t id) {
    const auto& n = g.node(id);
    const auto& go = g.out_grad(id);
    for (std::size_t in : n.inputs) {
      if (!g.needs_grad(in)) continue;
      double* gi = g.grad_buffer(in);
      for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
    }
  });
}

Var sub(Var a, Var b) {
  check_same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  check_same_shape("sub", x, y);
  Tensor out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] - y.data[i];
  return a.graph->push(Op::sub, {a.id, b.id}, std::move(out), [](Graph& g, std::size_t id) {
    const auto& n = g.node(id);
    const auto& go = g.out_grad(id);
    if (g.needs_grad(n.inputs[0])) {
      double* gi = g.grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
    }
    if (g.needs_grad(n.inputs[1])) {
      double* gi = g.grad_buffer(n.inputs[1]);
      for (std::size_t i = 0; i < go.size(); ++i) gi[i] -= go[i];
    }
  });
}

Var mul(Var a, Var b) {
  check_same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  check_same_shape("mul", x, y);
  Tensor out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] * y.data[i];
  return a.graph->push(Op::mul, {a.id, b.id}, std::move(out), [](Graph& g, std::size_t id) {
    const auto& n = g.node(id);
    const auto& go = g.out_grad(id);
    const auto& xv = g.node(n.inputs[0]).value.data;
    const auto& yv = g.node(n.inputs[1]).value.data;
    if (g.needs_grad(n.inputs[0])) {
      double* gi = g.grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] * yv[i];
    }
    if (g.needs_grad(n.inputs[1])) {
      double* gi = g.grad_buffer(n.inputs[1]);
      for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] * xv[i];
    }
  });
}

Var scalar_mul(Var a, double s) {
  const Tensor& x = a.value();
  Tensor out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] * s;
  return a.graph->push(Op::scalar_mul, {a.id}, std::move(out), [s](Graph& g, std::size_t id) {
    const auto& go = g.out_grad(id);
    double* gi = g.grad_buffer(g.node(id).inputs[0]);
    for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] * s;
  });
}

Var tanh(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::tanh(x.data[i]);
  return a.graph->push(Op::tanh, {a.id}, std::move(out), [](Graph& g, std::size_t id) {
    const auto& n = g.node(id);
    const auto& go = g.out_grad(id);
    const auto& y = n.value.data;
    double* gi = g.grad_buffer(n.inputs[0]);
    for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] * (1.0 - y[i] * y[i]);
  });
}

Var relu(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  return a.graph->push(Op::relu, {a.id}, std::move(out), [](Graph& g, std::size_t id) {
    const auto& n = g.node(id);
    const auto& go = g.out_grad(id);
    const auto& xv = g.node(n.inputs[0]).value.data;
    double* gi = g.grad_buffer(n.inputs[0]);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (xv[i] > 0.0) gi[i] += go[i];
    }
  });
}

Var log(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(x.data[i] > 0.0)) {
      throw NumericError("log of non-positive value " + std::to_string(x.data[i]) + " at index " +
                         std::to_string(i));
    }
    out.data[i] = std::log(x.data[i]);
  }
  return a.graph->push(Op::log, {a.id}, std::move(out), [](Graph& g, std::size_t id) {
    const auto& n = g.node(id);
    const auto& go = g.out_grad(id);
    const auto& xv = g.node(n.inputs[0]).value.data;
    double* gi = g.grad_buffer(n.inputs[0]);
    for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] / xv[i];
  });
}

Var clamp01_pass_through(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::clamp(x.data[i], 0.0, 1.0);
  return a.graph->push(Op::clamp01_pass_through, {a.id}, std::move(out),
                       [](Graph& g, std::size_t id) {
                         const auto& go = g.out_grad(id);
                         double* gi = g.grad_buffer(g.node(id).inputs[0]);
                         for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
                       });
}

// ---------------------------------------------------------------------------
// Linear algebra and reductions

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  check_rank("matmul", a, 2);
  check_rank("matmul", b, 2);
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  if (b.shape[0] != k) {
    throw ContractError("matmul: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.data[i * k + p];
      const double* brow = b.data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Var matmul(Var a, Var b) {
  check_same_graph(a, b);
  Tensor out = matmul_values(a.value(), b.value());
  return a.graph->push(Op::matmul, {a.id, b.id}, std::move(out), [](Graph& g, std::size_t id) {
    const auto& n = g.node(id);
    const auto& go = g.out_grad(id);
    const Tensor& av = g.node(n.inputs[0]).value;
    const Tensor& bv = g.node(n.inputs[1]).value;
    const std::size_t m = av.shape[0], k = av.shape[1], cols = bv.shape[1];
    if (g.needs_grad(n.inputs[0])) {
      double* ga = g.grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < cols; ++j) s += go[i * cols + j] * bv.data[p * cols + j];
          ga[i * k + p] += s;
        }
      }
    }
    if (g.needs_grad(n.inputs[1])) {
      double* gb = g.grad_buffer(n.inputs[1]);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av_ip = av.data[i * k + p];
          for (std::size_t j = 0; j < cols; ++j) gb[p * cols + j] += av_ip * go[i * cols + j];
        }
      }
    }
  });
}

Var softmax_lastdim(Var a) {
  const Tensor& x = a.value();
  check_nonscalar("softmax_lastdim", x);
  const std::size_t d = x.shape.back();
  const std::size_t rows = x.size() / d;
  Tensor out(x.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = x.data.data() + r * d;
    double* yi = out.data.data() + r * d;
    const double mx = *std::max_element(xi, xi + d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (yi[j] = std::exp(xi[j] - mx));
    for (std::size_t j = 0; j < d; ++j) yi[j] /= s;
  }
  return a.graph->push(Op::softmax_lastdim, {a.id}, std::move(out), [d, rows](Graph& g, std::size_t id) {
    const auto& n = g.node(id);
    const auto& go = g.out_grad(id);
    const auto& y = n.value.data;
    double* gi = g.grad_buffer(n.inputs[0]);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += go[r * d + j] * y[r * d + j];
      for (std::size_t j = 0; j < d; ++j) gi[r * d + j] += y[r * d + j] * (go[r * d + j] - dot);
    }
  });
}

Var sum_all(Var a) {
  const double s = compensated_sum(a.value().data);
  return a.graph->push(Op::sum_all, {a.id}, Tensor::scalar(s), [](Graph& g, std::size_t id) {
    const double go = g.out_grad(id)[0];
    const std::size_t in = g.node(id).inputs[0];
    double* gi = g.grad_buffer(in);
    const std::size_t n = g.node(in).value.size();
    for (std::size_t i = 0; i < n; ++i) gi[i] += go;
  });
}

Var mean_all(Var a) {
  const Tensor& x = a.value();
  if (x.size() == 0) throw ContractError("mean_all of an empty tensor");
  const double s = compensated_sum(x.data);
  const double inv = 1.0 / static_cast<double>(x.size());
  return a.graph->push(Op::mean_all, {a.id}, Tensor::scalar(s * inv), [inv](Graph& g, std::size_t id) {
    const double go = g.out_grad(id)[0] * inv;
    const std::size_t in = g.node(id).inputs[0];
    double* gi = g.grad_buffer(in);
    const std::size_t n = g.node(in).value.size();
    for (std::size_t i = 0; i < n; ++i) gi[i] += go;
  });
}

Var l2_normalize_lastdim(Var a) {
  const Tensor& x = a.value();
  check_nonscalar("l2_normalize_lastdim", x);
  const std::size_t d = x.shape.back();
  const std::size_t rows = x.size() / d;
  Tensor out(x.shape);
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x.data[r * d + j] * x.data[r * d + j];
    norms[r] = std::sqrt(s);
    const double denom = std::max(norms[r], kNormEps);
    for (std::size_t j = 0; j < d; ++j) out.data[r * d + j] = x.data[r * d + j] / denom;
  }
  return a.graph->push(
      Op::l2_normalize_lastdim, {a.id}, std::move(out),
      [d, rows, norms = std::move(norms)](Graph& g, std::size_t id) {
        const auto& n = g.node(id);
        const auto& go = g.out_grad(id);
        const auto& xv = g.node(n.inputs[0]).value.data;
        double* gi = g.grad_buffer(n.inputs[0]);
        for (std::size_t r = 0; r < rows; ++r) {
          const double nr = norms[r];
          const double denom = std::max(nr, kNormEps);
          double gx = 0.0;
          for (std::size_t j = 0; j < d; ++j) gx += go[r * d + j] * xv[r * d + j];
          // y = x / max(|x|, e); above the floor dy/dx = I/|x| - x x^T / |x|^3
          const double k = nr > kNormEps ? gx / (nr * nr * nr) : 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            gi[r * d + j] += go[r * d + j] / denom - k * xv[r * d + j];
          }
        }
      });
}

Var cosine_similarity(Var a, Var b) {
  check_same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  check_same_shape("cosine_similarity", x, y);
  check_nonscalar("cosine_similarity", x);
  const std::size_t d = x.shape.back();
  const std::size_t rows = x.size() / d;
  Tensor out(drop_last(x.shape));
  struct RowStats {
    double dot, nx2, ny2, denom;
    bool floored;
  };
  std::vector<RowStats> stats(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0, nx2 = 0.0, ny2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double xv = x.data[r * d + j], yv = y.data[r * d + j];
      dot += xv * yv;
      nx2 += xv * xv;
      ny2 += yv * yv;
    }
    const double prod = nx2 * ny2;
    const bool floored = prod < kCosineFloor;
    const double denom = std::sqrt(floored ? kCosineFloor : prod);
    stats[r] = {dot, nx2, ny2, denom, floored};
    out.data[r] = dot / denom;
  }
  return a.graph->push(
      Op::cosine_similarity, {a.id, b.id}, std::move(out),
      [d, rows, stats = std::move(stats)](Graph& g, std::size_t id) {
        const auto& n = g.node(id);
        const auto& go = g.out_grad(id);
        const auto& xv = g.node(n.inputs[0]).value.data;
        const auto& yv = g.node(n.inputs[1]).value.data;
        const bool gx_needed = g.needs_grad(n.inputs[0]);
        const bool gy_needed = g.needs_grad(n.inputs[1]);
        double* gx = gx_needed ? g.grad_buffer(n.inputs[0]) : nullptr;
        double* gy = gy_needed ? g.grad_buffer(n.inputs[1]) : nullptr;
        for (std::size_t r = 0; r < rows; ++r) {
          const RowStats& s = stats[r];
          const double c = s.dot / s.denom;
          const double kx = (!s.floored && s.nx2 > 0.0) ? c / s.nx2 : 0.0;
          const double ky = (!s.floored && s.ny2 > 0.0) ? c / s.ny2 : 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const std::size_t i = r * d + j;
            if (gx) gx[i] += go[r] * (yv[i] / s.denom - kx * xv[i]);
            if (gy) gy[i] += go[r] * (xv[i] / s.denom - ky * yv[i]);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Indexing and layout

namespace {

Var gather_impl(Op op, Var a, std::span<const std::size_t> flat_indices, Shape out_shape) {
  const Tensor& x = a.value();
  if (numel(out_shape) != flat_indices.size()) {
    throw ContractError("gather: " + std::to_string(flat_indices.size()) +
                        " indices for output shape " + shape_str(out_shape));
  }
  Tensor out(std::move(out_shape));
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= x.size()) {
      throw ContractError("gather: index " + std::to_string(flat_indices[i]) +
                          " out of range for shape " + shape_str(x.shape));
    }
    out.data[i] = x.data[flat_indices[i]];
  }
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  return a.graph->push(op, {a.id}, std::move(out), [idx = std::move(idx)](Graph& g, std::size_t id) {
    const auto& go = g.out_grad(id);
    double* gi = g.grad_buffer(g.node(id).inputs[0]);
    for (std::size_t i = 0; i < idx.size(); ++i) gi[idx[i]] += go[i];
  });
}

}  // namespace

Var gather(Var a, std::span<const std::size_t> flat_indices, Shape out_shape) {
  return gather_impl(Op::gather, a, flat_indices, std::move(out_shape));
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& x = a.value();
  check_rank("gather_rows", x, 2);
  const std::size_t n = x.shape[0], d = x.shape[1];
  std::vector<std::size_t> flat;
  flat.reserve(rows.size() * d);
  for (std::size_t r : rows) {
    if (r >= n) {
      throw ContractError("gather_rows: row " + std::to_string(r) + " out of range for shape " +
                          shape_str(x.shape));
    }
    for (std::size_t j = 0; j < d; ++j) flat.push_back(r * d + j);
  }
  return gather_impl(Op::gather_rows, a, flat, Shape{rows.size(), d});
}

Var reshape(Var a, Shape shape) {
  const Tensor& x = a.value();
  if (numel(shape) != x.size()) {
    throw ContractError("reshape: " + shape_str(x.shape) + " to " + shape_str(shape));
  }
  Tensor out(std::move(shape), x.data);
  return a.graph->push(Op::reshape, {a.id}, std::move(out), [](Graph& g, std::size_t id) {
    const auto& go = g.out_grad(id);
    double* gi = g.grad_buffer(g.node(id).inputs[0]);
    for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  check_rank("transpose", x, 2);
  const std::size_t m = x.shape[0], n = x.shape[1];
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = x.data[i * n + j];
  return a.graph->push(Op::transpose, {a.id}, std::move(out), [m, n](Graph& g, std::size_t id) {
    const auto& go = g.out_grad(id);
    double* gi = g.grad_buffer(g.node(id).inputs[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gi[i * n + j] += go[j * m + i];
  });
}

Var add_row_broadcast(Var a, Var b) {
  check_same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& bias = b.value();
  check_rank("add_row_broadcast", x, 2);
  const std::size_t m = x.shape[0], n = x.shape[1];
  const bool ok = (bias.rank() == 1 && bias.shape[0] == n) ||
                  (bias.rank() == 2 && bias.shape[0] == 1 && bias.shape[1] == n);
  if (!ok) {
    throw ContractError("add_row_broadcast: shape mismatch " + shape_str(x.shape) + " vs " +
                        shape_str(bias.shape));
  }
  Tensor out(x.shape);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = x.data[i * n + j] + bias.data[j];
  return a.graph->push(Op::add_row_broadcast, {a.id, b.id}, std::move(out), [m, n](Graph& g, std::size_t id) {
    const auto& nd = g.node(id);
    const auto& go = g.out_grad(id);
    if (g.needs_grad(nd.inputs[0])) {
      double* gi = g.grad_buffer(nd.inputs[0]);
      for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
    }
    if (g.needs_grad(nd.inputs[1])) {
      double* gb = g.grad_buffer(nd.inputs[1]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
    }
  });
}

Var mean_rows(Var a) {
  const Tensor& x = a.value();
  check_rank("mean_rows", x, 2);
  const std::size_t m = x.shape[0], n = x.shape[1];
  if (m == 0) throw ContractError("mean_rows of zero rows");
  Tensor out({1, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j] += x.data[i * n + j];
  const double inv = 1.0 / static_cast<double>(m);
  for (double& v : out.data) v *= inv;
  return a.graph->push(Op::mean_rows, {a.id}, std::move(out), [m, n, inv](Graph& g, std::size_t id) {
    const auto& go = g.out_grad(id);
    double* gi = g.grad_buffer(g.node(id).inputs[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gi[i * n + j] += go[j] * inv;
  });
}

Var div_scalar(Var a, Var s) {
  check_same_graph(a, s);
  const Tensor& x = a.value();
  const double sv = s.value().item();
  if (sv == 0.0) throw NumericError("div_scalar: division by zero");
  Tensor out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] / sv;
  return a.graph->push(Op::div_scalar, {a.id, s.id}, std::move(out), [sv](Graph& g, std::size_t id) {
    const auto& n = g.node(id);
    const auto& go = g.out_grad(id);
    if (g.needs_grad(n.inputs[0])) {
      double* gi = g.grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] / sv;
    }
    if (g.needs_grad(n.inputs[1])) {
      const auto& y = n.value.data;
      double acc = 0.0;
      for (std::size_t i = 0; i < go.size(); ++i) acc += go[i] * y[i];
      g.grad_buffer(n.inputs[1])[0] -= acc / sv;
    }
  });
}

Var bilinear_resample(Var a, const ResampleWindow& window) {
  const Tensor& x = a.value();
  check_rank("bilinear_resample", x, 2);
  ResampleWindow w = window;
  if (x.shape[0] != w.in_h || x.shape[1] != w.in_w) {
    throw ContractError("bilinear_resample: plane " + shape_str(x.shape) + " does not match window " +
                        shape_str({w.in_h, w.in_w}));
  }
  Tensor out({w.out_h, w.out_w}, resample_plane(x.data, w));
  return a.graph->push(Op::bilinear_resample, {a.id}, std::move(out), [w](Graph& g, std::size_t id) {
    const auto& go = g.out_grad(id);
    double* gi = g.grad_buffer(g.node(id).inputs[0]);
    const auto ys = axis_taps(w.top, w.win_h, w.out_h);
    const auto xs = axis_taps(w.left, w.win_w, w.out_w);
    for (std::size_t oy = 0; oy < w.out_h; ++oy) {
      const AxisTap& ty = ys[oy];
      for (std::size_t ox = 0; ox < w.out_w; ++ox) {
        const AxisTap& tx = xs[ox];
        const double gv = go[oy * w.out_w + ox];
        const double wy1 = ty.frac, wy0 = 1.0 - ty.frac;
        const double wx1 = tx.frac, wx0 = 1.0 - tx.frac;
        gi[ty.lo * w.in_w + tx.lo] += gv * wy0 * wx0;
        gi[ty.lo * w.in_w + tx.hi] += gv * wy0 * wx1;
        gi[ty.hi * w.in_w + tx.lo] += gv * wy1 * wx0;
        gi[ty.hi * w.in_w + tx.hi] += gv * wy1 * wx1;
      }
    }
  });
}

}  // namespace focusleak::ad
