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

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "focusleak/autodiff.hpp"

namespace focusleak::ad {

using ScalarFn = std::function<double(const Tensor&)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Tensor finite_difference_oracle(const ScalarFn& f, const Tensor& x, double h = 1e-5);

// Same, restricted to the listed flat coordinates.
std::vector<double> finite_difference_at(const ScalarFn& f, const Tensor& x,
                                         std::span<const std::size_t> coords, double h = 1e-5);

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-8);

}  // namespace focusleak::ad
