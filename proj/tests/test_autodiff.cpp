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

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "focusleak/autodiff.hpp"
#include "focusleak/error.hpp"
#include "focusleak/gradcheck.hpp"
#include "focusleak/rng.hpp"

using namespace focusleak;
using namespace focusleak::ad;

namespace {

Tensor random_tensor(SplitMix64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

using Builder = std::function<Var(Graph&, std::vector<Var>&)>;

// Root = sum(op(inputs) * w) for a fixed random weight tensor w, so every
// output coordinate contributes with a distinct coefficient.
double check_op_gradients(const std::vector<Tensor>& inputs, const Builder& build, std::uint64_t wseed) {
  Tensor weights;
  auto root_of = [&](Graph& g, std::vector<Var>& vars) {
    Var out = build(g, vars);
    if (weights.data.empty()) {
      SplitMix64 wr(wseed);
      weights = random_tensor(wr, out.shape(), 0.5, 1.5);
    }
    return sum_all(mul(out, g.constant(weights)));
  };

  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.leaf(t));
  Var root = root_of(g, vars);
  g.backward(root);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = g.grad(vars[k]);
    auto f = [&](const Tensor& x) {
      Graph h;
      std::vector<Var> vs;
      for (std::size_t j = 0; j < inputs.size(); ++j) vs.push_back(h.leaf(j == k ? x : inputs[j]));
      return root_of(h, vs).value().item();
    };
    const Tensor numeric = finite_difference_oracle(f, inputs[k]);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      worst = std::max(worst, relative_error(analytic.data[i], numeric.data[i]));
    }
  }
  return worst;
}

struct OpCase {
  std::string name;
  std::function<std::vector<Tensor>(SplitMix64&)> inputs;
  Builder build;
};

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  auto dims = [](SplitMix64& r) { return std::pair<std::size_t, std::size_t>{1 + r.below(4), 1 + r.below(4)}; };
  auto unary = [&](std::string name, std::function<Var(Var)> f, double lo = -1.0, double hi = 1.0) {
    cases.push_back({name,
                     [=](SplitMix64& r) {
                       auto [m, n] = dims(r);
                       return std::vector<Tensor>{random_tensor(r, {m, n}, lo, hi)};
                     },
                     [=](Graph&, std::vector<Var>& v) { return f(v[0]); }});
  };
  auto binary = [&](std::string name, std::function<Var(Var, Var)> f) {
    cases.push_back({name,
                     [=](SplitMix64& r) {
                       auto [m, n] = dims(r);
                       return std::vector<Tensor>{random_tensor(r, {m, n}), random_tensor(r, {m, n})};
                     },
                     [=](Graph&, std::vector<Var>& v) { return f(v[0], v[1]); }});
  };

  binary("add", [](Var a, Var b) { return add(a, b); });
  binary("sub", [](Var a, Var b) { return sub(a, b); });
  binary("mul", [](Var a, Var b) { return mul(a, b); });
  unary("scalar_mul", [](Var a) { return scalar_mul(a, -2.5); });
  cases.push_back({"matmul",
                   [](SplitMix64& r) {
                     const std::size_t m = 1 + r.below(4), k = 1 + r.below(4), n = 1 + r.below(4);
                     return std::vector<Tensor>{random_tensor(r, {m, k}), random_tensor(r, {k, n})};
                   },
                   [](Graph&, std::vector<Var>& v) { return matmul(v[0], v[1]); }});
  unary("tanh", [](Var a) { return ad::tanh(a); }, -2.0, 2.0);
  // Keep inputs away from the kink so central differences are valid.
  cases.push_back({"relu",
                   [](SplitMix64& r) {
                     Tensor t({3, 3});
                     for (double& v : t.data) v = (r.uniform() < 0.5 ? -1.0 : 1.0) * r.uniform(0.01, 1.0);
                     return std::vector<Tensor>{t};
                   },
                   [](Graph&, std::vector<Var>& v) { return relu(v[0]); }});
  unary("softmax_lastdim", [](Var a) { return softmax_lastdim(a); }, -3.0, 3.0);
  unary("mean_all", [](Var a) { return mean_all(a); });
  unary("sum_all", [](Var a) { return sum_all(a); });
  unary("l2_normalize_lastdim", [](Var a) { return l2_normalize_lastdim(a); }, 0.2, 1.0);
  cases.push_back({"cosine_similarity",
                   [](SplitMix64& r) {
                     const std::size_t m = 1 + r.below(4), n = 2 + r.below(4);
                     return std::vector<Tensor>{random_tensor(r, {m, n}), random_tensor(r, {m, n})};
                   },
                   [](Graph&, std::vector<Var>& v) { return cosine_similarity(v[0], v[1]); }});
  unary("log", [](Var a) { return ad::log(a); }, 0.2, 2.0);
  // Straight-through only equals the true derivative inside (0,1).
  unary("clamp01_pass_through", [](Var a) { return clamp01_pass_through(a); }, 0.05, 0.95);
  cases.push_back({"gather_rows",
                   [](SplitMix64& r) { return std::vector<Tensor>{random_tensor(r, {4, 3})}; },
                   [](Graph&, std::vector<Var>& v) {
                     const std::size_t rows[] = {2, 0, 2, 3};
                     return gather_rows(v[0], rows);
                   }});
  cases.push_back({"bilinear_resample",
                   [](SplitMix64& r) { return std::vector<Tensor>{random_tensor(r, {7, 6})}; },
                   [](Graph&, std::vector<Var>& v) {
                     return bilinear_resample(v[0], ResampleWindow{7, 6, 1, 2, 5, 4, 3, 5});
                   }});
  cases.push_back({"gather",
                   [](SplitMix64& r) { return std::vector<Tensor>{random_tensor(r, {3, 4})}; },
                   [](Graph&, std::vector<Var>& v) {
                     const std::size_t idx[] = {11, 0, 5, 5, 7, 2};
                     return gather(v[0], idx, {2, 3});
                   }});
  cases.push_back({"reshape",
                   [](SplitMix64& r) { return std::vector<Tensor>{random_tensor(r, {2, 6})}; },
                   [](Graph&, std::vector<Var>& v) { return reshape(v[0], {3, 4}); }});
  unary("transpose", [](Var a) { return transpose(a); });
  cases.push_back({"add_row_broadcast",
                   [](SplitMix64& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 4}), random_tensor(r, {4})};
                   },
                   [](Graph&, std::vector<Var>& v) { return add_row_broadcast(v[0], v[1]); }});
  unary("mean_rows", [](Var a) { return mean_rows(a); });
  cases.push_back({"div_scalar",
                   [](SplitMix64& r) {
                     return std::vector<Tensor>{random_tensor(r, {2, 3}), Tensor::scalar(r.uniform(0.5, 2.0))};
                   },
                   [](Graph&, std::vector<Var>& v) { return div_scalar(v[0], v[1]); }});
  return cases;
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("forward examples") {
    Graph g;
    Var v = g.leaf(Tensor({4}, {0.3, -1.2, 2.0, 0.7}));
    CHECK(cosine_similarity(v, v).value().item() == 1.0);

    const Tensor s = softmax_lastdim(g.leaf(Tensor({3}, {0.0, 0.0, 0.0}))).value();
    for (double p : s.data) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const Tensor m = matmul(g.leaf(Tensor({2, 3}, 1.0)), g.leaf(Tensor({3, 2}, 1.0))).value();
    CHECK(m.shape == Shape{2, 2});
    for (double x : m.data) CHECK(x == 3.0);
  }

  TEST_CASE("shape mismatch names both shapes") {
    Graph g;
    Var a = g.leaf(Tensor({2, 3}));
    Var b = g.leaf(Tensor({3, 2}));
    try {
      add(a, b);
      FAIL("expected ContractError");
    } catch (const ContractError& e) {
      const std::string what = e.what();
      CHECK(what.find("[2,3]") != std::string::npos);
      CHECK(what.find("[3,2]") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(a, a), ContractError);
  }

  TEST_CASE("non-finite inputs are rejected") {
    Graph g;
    CHECK_THROWS_AS(g.leaf(Tensor({2}, {1.0, std::nan("")})), NumericError);
    CHECK_THROWS_AS(ad::log(g.leaf(Tensor({1}, {0.0}))), NumericError);
  }

  TEST_CASE("sum_all gradient is all ones") {
    Graph g;
    Var x = g.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    g.backward(sum_all(x));
    const Tensor gx = g.grad(x);
    CHECK(gx.shape == x.shape());
    for (double v : gx.data) CHECK(v == 1.0);
  }

  TEST_CASE("cosine at its maximum has zero gradient") {
    Graph g;
    const Tensor c({5}, {0.2, -0.4, 1.0, 0.3, -0.9});
    Var x = g.leaf(c);
    g.backward(cosine_similarity(x, g.constant(c)));
    for (double v : g.grad(x).data) CHECK(std::abs(v) < 1e-12);
  }

  TEST_CASE("tanh chain matches central differences") {
    SplitMix64 rng(7);
    const Tensor w = random_tensor(rng, {1, 6});
    const Tensor x0 = random_tensor(rng, {6, 1});
    auto f = [&](const Tensor& x) {
      Graph h;
      return sum_all(ad::tanh(matmul(h.constant(w), h.leaf(x)))).value().item();
    };
    Graph g;
    Var x = g.leaf(x0);
    g.backward(sum_all(ad::tanh(matmul(g.constant(w), x))));
    const Tensor a = g.grad(x);
    const Tensor n = finite_difference_oracle(f, x0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(relative_error(a.data[i], n.data[i]) < 1e-6);
  }

  TEST_CASE("backward contracts") {
    Graph g;
    Var x = g.leaf(Tensor({3}, 1.0));
    Var unused = g.leaf(Tensor({2, 2}, 5.0));
    CHECK_THROWS_AS(g.backward(x), ContractError);
    g.backward(sum_all(mul(x, x)));
    const Tensor gu = g.grad(unused);
    CHECK(gu.shape == Shape{2, 2});
    for (double v : gu.data) CHECK(v == 0.0);
  }

  TEST_CASE("diamond graph accumulates both paths") {
    // y = x*x + 3x through two branches that share x; dy/dx = 2x + 3.
    Graph g;
    Var x = g.leaf(Tensor({3}, {-1.0, 0.5, 2.0}));
    Var left = mul(x, x);
    Var right = scalar_mul(x, 3.0);
    g.backward(sum_all(add(left, right)));
    const Tensor gx = g.grad(x);
    CHECK(gx.data[0] == doctest::Approx(1.0));
    CHECK(gx.data[1] == doctest::Approx(4.0));
    CHECK(gx.data[2] == doctest::Approx(7.0));

    Graph h;
    Var z = h.leaf(Tensor({2}, {1.0, 2.0}));
    h.backward(sum_all(add(z, z)));
    for (double v : h.grad(z).data) CHECK(v == 2.0);
  }

  TEST_CASE("repeated backward does not accumulate across sweeps") {
    Graph g;
    Var x = g.leaf(Tensor({2}, {1.0, 2.0}));
    Var root = sum_all(scalar_mul(x, 4.0));
    g.backward(root);
    g.backward(root);
    for (double v : g.grad(x).data) CHECK(v == 4.0);
  }

  TEST_CASE("forward is deterministic to the byte") {
    auto run = [] {
      SplitMix64 rng(99);
      Graph g;
      Var a = g.leaf(random_tensor(rng, {4, 5}));
      Var b = g.leaf(random_tensor(rng, {5, 3}));
      Var out = softmax_lastdim(ad::tanh(matmul(a, b)));
      g.backward(sum_all(mul(out, out)));
      return std::pair{out.value().data, g.grad(a).data};
    };
    CHECK(run() == run());
  }

  TEST_CASE("finite difference oracle examples") {
    auto sq = [](const Tensor& x) { return x.data[0] * x.data[0] + x.data[1] * x.data[1]; };
    const Tensor g = finite_difference_oracle(sq, Tensor({2}, {1.0, 2.0}));
    CHECK(std::abs(g.data[0] - 2.0) < 1e-8);
    CHECK(std::abs(g.data[1] - 4.0) < 1e-8);

    const Tensor z = finite_difference_oracle([](const Tensor&) { return 3.0; }, Tensor({3}, 0.2));
    for (double v : z.data) CHECK(v == 0.0);

    CHECK_THROWS_AS(finite_difference_oracle([](const Tensor&) { return std::nan(""); }, Tensor({1}, 0.0)),
                    NumericError);
    CHECK_THROWS_AS(finite_difference_oracle(sq, Tensor({2}, 0.0), 0.0), ContractError);
  }

  TEST_CASE("every op matches finite differences on 100 random inputs") {
    for (const OpCase& c : op_cases()) {
      SUBCASE(c.name.c_str()) {
        SplitMix64 rng(derive_seed(2024, std::hash<std::string>{}(c.name)));
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
          worst = std::max(worst, check_op_gradients(c.inputs(rng), c.build, rng.next()));
        }
        INFO(c.name << " worst relative error " << worst);
        CHECK(worst < 1e-4);
      }
    }
  }
}
