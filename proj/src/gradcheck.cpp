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

#include "focusleak/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "focusleak/error.hpp"

namespace focusleak::ad {

namespace {

double checked(const ScalarFn& f, const Tensor& x) {
  const double v = f(x);
  if (!std::isfinite(v)) throw NumericError("finite_difference_oracle: function returned " + std::to_string(v));
  return v;
}

}  // namespace

std::vector<double> finite_difference_at(const ScalarFn& f, const Tensor& x,
                                         std::span<const std::size_t> coords, double h) {
  if (!(h > 0.0)) throw ContractError("finite_difference_oracle: step must be positive");
  Tensor probe = x;
  std::vector<double> out;
  out.reserve(coords.size());
  for (std::size_t i : coords) {
    if (i >= x.size()) throw ContractError("finite_difference_at: coordinate out of range");
    const double orig = probe.data[i];
    probe.data[i] = orig + h;
    const double fp = checked(f, probe);
    probe.data[i] = orig - h;
    const double fm = checked(f, probe);
    probe.data[i] = orig;
    out.push_back((fp - fm) / (2.0 * h));
  }
  return out;
}

Tensor finite_difference_oracle(const ScalarFn& f, const Tensor& x, double h) {
  std::vector<std::size_t> all(x.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return Tensor(x.shape, finite_difference_at(f, x, all, h));
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace focusleak::ad
