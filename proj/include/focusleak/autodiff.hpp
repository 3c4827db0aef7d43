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

#pragma once

// Reverse-mode differentiation over a small fixed operation set. A Graph is a
// tape: every op evaluates eagerly, appends a node, and records how to push
// its output gradient back to its inputs. Graphs are single-owner; build one
// per loss evaluation.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "focusleak/resample.hpp"

namespace focusleak::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major double tensor. A scalar has an empty shape and one value.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  double item() const;

  bool operator==(const Tensor&) const = default;
};

enum class Op {
  leaf,
  add,
  sub,
  mul,
  scalar_mul,
  matmul,
  tanh,
  relu,
  softmax_lastdim,
  mean_all,
  sum_all,
  l2_normalize_lastdim,
  cosine_similarity,
  log,
  clamp01_pass_through,
  gather_rows,
  bilinear_resample,
  // Structural helpers needed by the surrogate stack.
  gather,
  reshape,
  transpose,
  add_row_broadcast,
  mean_rows,
  div_scalar,
};

std::string_view op_name(Op op);

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid while its Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  struct Node {
    Op op;
    std::vector<std::size_t> inputs;
    Tensor value;
    std::vector<double> grad;  // empty until something flows into it
    bool requires_grad;
    BackwardFn backward;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Leaves reject non-finite values.
  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar root. Clears gradients from any earlier sweep.
  void backward(Var root);

  // dRoot/dv after backward(); zeros when v was unreachable or constant.
  Tensor grad(Var v) const;

  // Used by op implementations.
  Var push(Op op, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  double* grad_buffer(std::size_t id);
  const std::vector<double>& out_grad(std::size_t id) const { return nodes_[id].grad; }

 private:
  std::vector<Node> nodes_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scalar_mul(Var a, double s);
Var matmul(Var a, Var b);
Var tanh(Var a);
Var relu(Var a);
Var softmax_lastdim(Var a);
Var mean_all(Var a);
Var sum_all(Var a);
// x / max(|x|, 1e-12) along the last dimension.
Var l2_normalize_lastdim(Var a);

// Cosine along the last dimension; the result drops that dimension.
// The norm product is floored at 1e-24 so zero vectors give 0, not NaN.
Var cosine_similarity(Var a, Var b);

Var log(Var a);

// Forward clamps to [0,1]; backward passes the gradient through unchanged.
Var clamp01_pass_through(Var a);

// Rows of a 2-D tensor, in the given order (repeats allowed).
Var gather_rows(Var a, std::span<const std::size_t> rows);

// Resamples a 2-D plane; differentiable w.r.t. the plane, not the geometry.
Var bilinear_resample(Var a, const ResampleWindow& window);

// Flat-index gather into a new shape.
Var gather(Var a, std::span<const std::size_t> flat_indices, Shape out_shape);
Var reshape(Var a, Shape shape);
Var transpose(Var a);

// a[m,n] + b broadcast over rows; b is [n] or [1,n].
Var add_row_broadcast(Var a, Var b);

// Column means of a 2-D tensor: [m,n] -> [1,n].
Var mean_rows(Var a);

// a / s for scalar node s.
Var div_scalar(Var a, Var s);

// Plain-value evaluation helpers shared with non-graph code paths.
Tensor matmul_values(const Tensor& a, const Tensor& b);

}  // namespace focusleak::ad
