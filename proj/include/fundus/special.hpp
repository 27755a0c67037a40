// Copyright 2026 The fundus-eval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FUNDUS_SPECIAL_HPP
#define FUNDUS_SPECIAL_HPP

namespace fundus::special {

/// Standard normal CDF.
[[nodiscard]] double normal_cdf(double x) noexcept;

/// Inverse standard normal CDF for p in (0,1): rational approximation followed
/// by one Halley refinement step. Returns +/-infinity at p = 1 / p = 0.
[[nodiscard]] double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
[[nodiscard]] double incomplete_beta(double a, double b, double x);

/// x such that I_x(a, b) = p, by bisection to an absolute tolerance of 1e-10 (or `tol`).
[[nodiscard]] double beta_quantile(double p, double a, double b, double tol = 1e-10);

} // namespace fundus::special

#endif // FUNDUS_SPECIAL_HPP
