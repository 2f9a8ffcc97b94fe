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

#ifndef ASEPDIST_SCALAR_HPP
#define ASEPDIST_SCALAR_HPP

#include <algorithm>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

namespace asepdist {

using Rational = mpq_class;
using Complex = std::complex<double>;

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
// Vanishing denominator on a contour or in a closed form.
struct PoleError : DomainError {
  using DomainError::DomainError;
};
// Parameter value at which a formula degenerates (tau = 1, tau = 0 where a
// negative tau-power appears, ...).
struct DegenerateParameterError : DomainError {
  using DomainError::DomainError;
};
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parses "a/b" or "a" (base 10) into a canonical rational.
inline Rational parse_rational(const std::string& text) {
  mpq_class q;
  if (q.set_str(text, 10) != 0)
    throw ConfigError("not a rational number: '" + text + "'");
  if (q.get_den() == 0)
    throw ConfigError("zero denominator in rational: '" + text + "'");
  q.canonicalize();
  return q;
}

inline std::string rational_str(const Rational& q) { return q.get_str(); }

// Number-system glue so that the same formula code runs over exact rationals
// (identity checks) and over double/complex (contour quadrature).
template <class S>
struct ScalarOps;

template <>
struct ScalarOps<Rational> {
  static constexpr bool exact = true;
  static Rational zero() { return Rational(0); }
  static Rational one() { return Rational(1); }
  static Rational from(const Rational& r) { return r; }
  static bool is_zero(const Rational& v) { return sgn(v) == 0; }
};

template <>
struct ScalarOps<double> {
  static constexpr bool exact = false;
  static double zero() { return 0.0; }
  static double one() { return 1.0; }
  static double from(const Rational& r) { return r.get_d(); }
  static bool is_zero(double v) { return v == 0.0; }
};

template <>
struct ScalarOps<Complex> {
  static constexpr bool exact = false;
  static Complex zero() { return Complex(0.0, 0.0); }
  static Complex one() { return Complex(1.0, 0.0); }
  static Complex from(const Rational& r) { return Complex(r.get_d(), 0.0); }
  static bool is_zero(const Complex& v) { return v == Complex(0.0, 0.0); }
};

template <class S>
S to_scalar(const Rational& r) {
  return ScalarOps<S>::from(r);
}

template <class T, class S>
T convert_scalar(const S& x) {
  if constexpr (std::is_same_v<S, T>)
    return x;
  else if constexpr (std::is_same_v<S, Rational>)
    return to_scalar<T>(x);
  else
    return static_cast<T>(x);
}

// Integer power by repeated squaring; negative exponents invert the base.
template <class S>
S pow_int(S base, long long e) {
  if (e < 0) {
    if (ScalarOps<S>::is_zero(base))
      throw PoleError("pow_int: negative power of zero");
    base = ScalarOps<S>::one() / base;
    e = -e;
  }
  S r = ScalarOps<S>::one();
  while (e > 0) {
    if (e & 1) r *= base;
    e >>= 1;
    if (e) base *= base;
  }
  return r;
}

// Hop rates (p right, q left, p + q = 1) together with tau = p/q.
// Construction is exact; the symmetric point tau = 1 and q = 0 are rejected
// because every closed form downstream divides by 1 - tau^j or by q-powers.
template <class S>
struct Params {
  S p, q, tau;
};

class ModelParams {
 public:
  ModelParams(const Rational& p, const Rational& q) : p_(p), q_(q) {
    if (p_ < 0 || p_ > 1 || q_ < 0 || q_ > 1)
      throw DomainError("ModelParams: p and q must lie in [0,1]");
    if (p_ + q_ != 1) throw DomainError("ModelParams: p + q must equal 1");
    if (sgn(q_) == 0) throw DegenerateParameterError("ModelParams: q = 0");
    tau_ = p_ / q_;
    if (tau_ == 1)
      throw DegenerateParameterError("ModelParams: tau = 1 (symmetric case)");
  }
  explicit ModelParams(const Rational& p) : ModelParams(p, 1 - p) {}

  const Rational& p() const { return p_; }
  const Rational& q() const { return q_; }
  const Rational& tau() const { return tau_; }

  template <class S>
  Params<S> as() const {
    return Params<S>{to_scalar<S>(p_), to_scalar<S>(q_), to_scalar<S>(tau_)};
  }

 private:
  Rational p_, q_, tau_;
};

// Finite ordered set of positive sites; serves both as a subset S of the
// initial data and as a deterministic initial configuration Y.
class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(std::vector<long long> sites) : sites_(std::move(sites)) {
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      if (sites_[i] < 1) throw DomainError("SiteSet: sites must be >= 1");
      if (i > 0 && sites_[i] <= sites_[i - 1])
        throw DomainError("SiteSet: sites must be strictly increasing");
    }
  }

  int size() const { return static_cast<int>(sites_.size()); }
  bool empty() const { return sites_.empty(); }
  // 1-based element s_i.
  long long site(int i) const { return sites_.at(i - 1); }
  long long max_site() const { return sites_.empty() ? 0 : sites_.back(); }
  bool contains(long long s) const {
    return std::binary_search(sites_.begin(), sites_.end(), s);
  }
  bool subset_of(const SiteSet& other) const {
    for (long long s : sites_)
      if (!other.contains(s)) return false;
    return true;
  }
  const std::vector<long long>& sites() const { return sites_; }
  auto begin() const { return sites_.begin(); }
  auto end() const { return sites_.end(); }

 private:
  std::vector<long long> sites_;
};

// #{(u,v) : u in U, v in V, u >= v}, by raw pair counting.
inline long long pairs_geq(const SiteSet& u, const SiteSet& v) {
  long long count = 0;
  for (long long a : u)
    for (long long b : v)
      if (a >= b) ++count;
  return count;
}

// Gaussian binomial [N over l] with parameter tau.
template <class S>
S tau_binomial(long long n, long long l, const S& tau) {
  const S one = ScalarOps<S>::one();
  if (l == 0) return one;
  if (l < 0 || l > n) return ScalarOps<S>::zero();
  if (tau == one)
    throw DegenerateParameterError("tau_binomial: undefined at tau = 1");
  S num = one, den = one;
  for (long long j = 0; j < l; ++j) num *= one - pow_int(tau, n - j);
  for (long long j = 1; j <= l; ++j) den *= one - pow_int(tau, j);
  return num / den;
}

namespace detail {
inline void check_order_indices(long long l, long long k) {
  if (l < 1 || l > k)
    throw DomainError("series prefactor: need 1 <= l <= k");
  if (k > 64)
    throw DomainError("series prefactor: k > 64 (exponent overflow guard)");
}
}  // namespace detail

// Prefactor of the k-th series term for particle index l, with the
// tau^{k(k+1)/2} subset weight already folded in:
//   (-1)^l q^{k(k-1)/2} tau^{(k-l)(k-l+1)/2} [k-1 over l-1]_tau.
// The tau-exponent is >= 0, so this is finite at tau = 0 (totally asymmetric
// case), where every term with k > l vanishes.
template <class S>
S series_prefactor(long long l, long long k, const Params<S>& pr) {
  detail::check_order_indices(l, k);
  const long long d = k - l;
  S value = pow_int(pr.q, k * (k - 1) / 2) *
            pow_int(pr.tau, d * (d + 1) / 2) *
            tau_binomial<S>(k - 1, l - 1, pr.tau);
  return (l % 2 == 0) ? value : -value;
}

// The raw subset-expansion coefficient
//   (-1)^l q^{k(k-1)/2} tau^{l(l-1)/2 - kl} [k-1 over l-1]_tau,
// singular at tau = 0 because the tau-exponent is negative for all valid
// (l, k).  raw * tau^{k(k+1)/2} == series_prefactor.
template <class S>
S raw_series_coefficient(long long l, long long k, const Params<S>& pr) {
  detail::check_order_indices(l, k);
  if (ScalarOps<S>::is_zero(pr.tau))
    throw DegenerateParameterError(
        "raw_series_coefficient: negative tau-power at tau = 0");
  S value = pow_int(pr.q, k * (k - 1) / 2) *
            pow_int(pr.tau, l * (l - 1) / 2 - k * l) *
            tau_binomial<S>(k - 1, l - 1, pr.tau);
  return (l % 2 == 0) ? value : -value;
}

}  // namespace asepdist

#endif  // ASEPDIST_SCALAR_HPP
