// Copyright 2026 The asepdist authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Shared test utilities: independent closed-form oracles (Poisson tail,
// geometric-Poisson mixture, Skellam pmf), a chi-square goodness-of-fit
// p-value, and random rational instance generators.  Everything here is kept
// independent of the library code paths it is used to check.

#ifndef ASEPDIST_TESTS_SUPPORT_HPP
#define ASEPDIST_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "asepdist/kernel.hpp"
#include "asepdist/scalar.hpp"

namespace testsupport {

using asepdist::ModelParams;
using asepdist::Params;
using asepdist::PeriodicProfile;
using asepdist::Rational;
using asepdist::XiVector;

// P(N >= s) for N ~ Poisson(t); 1 for s <= 0.
inline double poisson_tail(double t, long long s) {
  if (s <= 0) return 1.0;
  // Sum from r = s upward; terms decay once r > t.
  double term = std::exp(-t + s * std::log(t) - std::lgamma(s + 1.0));
  double sum = term;
  for (long long r = s + 1; r < s + 2000; ++r) {
    term *= t / static_cast<double>(r);
    sum += term;
    if (term < 1e-20 * (sum + 1e-300)) break;
  }
  return std::min(1.0, sum);
}

// P(x_1(t) <= x) for uniform Bernoulli(rho) initial data at p = 0, q = 1:
// the first particle sits at a geometric(rho) site j and free-falls left by
// Poisson(t):  sum_{j>=1} rho (1-rho)^{j-1} P(Poisson(t) >= j - x).
inline double geometric_poisson_cdf(double t, double rho, long long x) {
  double sum = 0.0;
  double weight = rho;
  for (long long j = 1; j < 4000; ++j) {
    sum += weight * poisson_tail(t, j - x);
    weight *= (1.0 - rho);
    if (weight < 1e-16) break;
  }
  return sum;
}

// P(R - L = d) with R ~ Poisson(a), L ~ Poisson(b) independent.
inline double skellam_pmf(double a, double b, long long d) {
  double sum = 0.0;
  for (long long m = std::max<long long>(0, -d); m < 400; ++m) {
    const long long r = m + d;
    const double lt = -a - b + r * std::log(a > 0 ? a : 1e-300) -
                      std::lgamma(r + 1.0) +
                      m * std::log(b > 0 ? b : 1e-300) - std::lgamma(m + 1.0);
    const double term = std::exp(lt);
    sum += term;
    if (m > d + 4 * (a + b) + 20 && term < 1e-18) break;
  }
  return sum;
}

namespace detail {
// Regularized incomplete gamma: series for P(a,x), continued fraction for
// Q(a,x) (the usual split at x < a + 1).
inline double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}
inline double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}
}  // namespace detail

// Q(a, x) = upper regularized incomplete gamma.
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) return 1.0;
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

// p-value of a chi-square statistic.
inline double chi_square_pvalue(double stat, int dof) {
  return gamma_q(dof / 2.0, stat / 2.0);
}

// Pearson goodness-of-fit: observed counts vs expected probabilities over
// bins; bins with tiny expectation are pooled into the last one.
inline double chi_square_gof_pvalue(const std::vector<long long>& observed,
                                    const std::vector<double>& expected_prob,
                                    long long total) {
  double stat = 0.0;
  int dof = -1;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = expected_prob[i] * total;
    if (e < 5.0) {
      pooled_obs += observed[i];
      pooled_exp += e;
      continue;
    }
    const double d = observed[i] - e;
    stat += d * d / e;
    ++dof;
  }
  if (pooled_exp > 0.0) {
    const double d = pooled_obs - pooled_exp;
    stat += d * d / pooled_exp;
    ++dof;
  }
  if (dof < 1) dof = 1;
  return chi_square_pvalue(stat, dof);
}

// Two-sample chi-square with equal sample sizes.
inline double chi_square_two_sample_pvalue(const std::vector<long long>& a,
                                           const std::vector<long long>& b) {
  double stat = 0.0;
  int dof = -1;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double s = static_cast<double>(a[i] + b[i]);
    if (s < 10.0) continue;
    const double d = static_cast<double>(a[i] - b[i]);
    stat += d * d / s;
    ++dof;
  }
  if (dof < 1) dof = 1;
  return chi_square_pvalue(stat, dof);
}

// Random rational instance generation mirroring the documented test ranges:
// |xi| in (1, 4], tau in {0, 1/3, 1/2, 2/3}, rho on a small rational palette.
class InstanceRng {
 public:
  explicit InstanceRng(std::uint64_t seed) : eng_(seed) {}

  long long uniform(long long lo, long long hi) {
    return std::uniform_int_distribution<long long>(lo, hi)(eng_);
  }
  Rational tau() {
    static const std::vector<Rational> pool = {
        Rational(0), Rational(1, 3), Rational(1, 2), Rational(2, 3)};
    return pool[uniform(0, 3)];
  }
  Rational nonzero_tau() {
    static const std::vector<Rational> pool = {Rational(1, 3), Rational(1, 2),
                                               Rational(2, 3)};
    return pool[uniform(0, 2)];
  }
  Rational xi_value() {
    static const std::vector<Rational> pool = {Rational(3, 2), Rational(2),
                                               Rational(5, 2), Rational(3),
                                               Rational(7, 2)};
    return pool[uniform(0, 4)];
  }
  Rational rho_value() {
    static const std::vector<Rational> pool = {
        Rational(0),    Rational(1, 4), Rational(1, 3), Rational(1, 2),
        Rational(2, 3), Rational(3, 4), Rational(1)};
    return pool[uniform(0, 6)];
  }
  Rational positive_rho() {
    Rational r;
    do {
      r = rho_value();
    } while (sgn(r) == 0);
    return r;
  }

  ModelParams params(bool allow_tau_zero = true) {
    const Rational t = allow_tau_zero ? tau() : nonzero_tau();
    return ModelParams(t / (1 + t));
  }
  XiVector<Rational> xi(int k) {
    std::vector<Rational> v;
    for (int i = 0; i < k; ++i) v.push_back(xi_value());
    return XiVector<Rational>(std::move(v));
  }
  PeriodicProfile<Rational> periodic(int m) {
    std::vector<Rational> v;
    do {
      v.clear();
      for (int r = 0; r < m; ++r) v.push_back(rho_value());
    } while (std::all_of(v.begin(), v.end(),
                         [](const Rational& q) { return sgn(q) == 0; }));
    return PeriodicProfile<Rational>(std::move(v));
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

}  // namespace testsupport

#endif  // ASEPDIST_TESTS_SUPPORT_HPP
