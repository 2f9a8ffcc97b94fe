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
// Analytic ingredients of the position-distribution formula: the dispersion
// and pair factors of the integrand, the occupation-average weight phi, the
// m x m transfer matrices for periodic Bernoulli profiles, their semi-infinite
// upper-triangular analogue for arbitrary profiles, and the closed-form
// special cases (step, uniform Bernoulli, sublattice, one-hot).
//
// Convention used throughout: every *_factor below EXCLUDES the global
// tau^{k(k+1)/2} subset weight.  That weight is carried exactly once, by
// series_prefactor in scalar.hpp, which keeps all tau-exponents nonnegative
// and the totally asymmetric point tau = 0 regular.

#ifndef ASEPDIST_KERNEL_HPP
#define ASEPDIST_KERNEL_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "asepdist/scalar.hpp"

namespace asepdist {

namespace detail {
template <class S>
void check_probability(const S& v, const char* what) {
  if constexpr (ScalarOps<S>::exact) {
    if (v < 0 || v > 1) throw DomainError(std::string(what) + ": value outside [0,1]");
  } else if constexpr (std::is_same_v<S, double>) {
    if (!(v >= 0.0 && v <= 1.0))
      throw DomainError(std::string(what) + ": value outside [0,1]");
  } else {
    if (!(v.imag() == 0.0 && v.real() >= 0.0 && v.real() <= 1.0))
      throw DomainError(std::string(what) + ": value outside [0,1]");
  }
}
}  // namespace detail

// m-periodic occupation probabilities, indexed by the residue class of the
// site.  Residue 0 is the class of site m (rho_0 = rho_m).
template <class S>
class PeriodicProfile {
 public:
  explicit PeriodicProfile(std::vector<S> values) : values_(std::move(values)) {
    if (values_.empty()) throw DomainError("PeriodicProfile: empty period");
    bool any = false;
    for (const S& v : values_) {
      detail::check_probability(v, "PeriodicProfile");
      any = any || !ScalarOps<S>::is_zero(v);
    }
    if (!any) throw DomainError("PeriodicProfile: no occupied residue class");
  }

  int period() const { return static_cast<int>(values_.size()); }
  const S& at_residue(int r) const { return values_.at(r); }
  S rho(long long n) const {
    const long long m = period();
    return values_[static_cast<std::size_t>(((n % m) + m) % m)];
  }

  // The same profile listed over `times` periods (period m -> m*times).
  PeriodicProfile repeated(int times) const {
    std::vector<S> v;
    v.reserve(values_.size() * times);
    for (int r = 0; r < times; ++r)
      v.insert(v.end(), values_.begin(), values_.end());
    return PeriodicProfile(std::move(v));
  }

  template <class T>
  PeriodicProfile<T> cast() const {
    std::vector<T> v;
    v.reserve(values_.size());
    for (const S& x : values_) v.push_back(convert_scalar<T>(x));
    return PeriodicProfile<T>(std::move(v));
  }

 private:
  std::vector<S> values_;
};

// Arbitrary occupation probabilities on sites 1..N; rho = 0 beyond N.
template <class S>
class GeneralProfile {
 public:
  explicit GeneralProfile(std::vector<S> values) : values_(std::move(values)) {
    if (values_.empty()) throw DomainError("GeneralProfile: empty horizon");
    for (const S& v : values_) detail::check_probability(v, "GeneralProfile");
  }

  static GeneralProfile from_periodic(const PeriodicProfile<S>& p, long long n) {
    std::vector<S> v;
    v.reserve(n);
    for (long long s = 1; s <= n; ++s) v.push_back(p.rho(s));
    return GeneralProfile(std::move(v));
  }

  // 0/1 profile of a deterministic configuration, up to horizon n.
  static GeneralProfile from_sites(const SiteSet& y, long long n) {
    std::vector<S> v(n, ScalarOps<S>::zero());
    for (long long s : y)
      if (s <= n) v[s - 1] = ScalarOps<S>::one();
    return GeneralProfile(std::move(v));
  }

  long long horizon() const { return static_cast<long long>(values_.size()); }
  S rho(long long n) const {
    if (n < 1 || n > horizon()) return ScalarOps<S>::zero();
    return values_[static_cast<std::size_t>(n - 1)];
  }
  const std::vector<S>& values() const { return values_; }

  template <class T>
  GeneralProfile<T> cast() const {
    std::vector<T> v;
    v.reserve(values_.size());
    for (const S& x : values_) v.push_back(convert_scalar<T>(x));
    return GeneralProfile<T>(std::move(v));
  }

 private:
  std::vector<S> values_;
};

// Tuple of integration variables xi_1..xi_k with cached suffix products
// Pi_i = xi_i * xi_{i+1} * ... * xi_k (Pi_{k+1} = 1).
template <class S>
class XiVector {
 public:
  explicit XiVector(std::vector<S> values) : xi_(std::move(values)) {
    for (const S& x : xi_)
      if (ScalarOps<S>::is_zero(x)) throw DomainError("XiVector: xi = 0");
    suffix_.assign(xi_.size() + 1, ScalarOps<S>::one());
    for (int i = static_cast<int>(xi_.size()) - 1; i >= 0; --i)
      suffix_[i] = xi_[i] * suffix_[i + 1];
  }

  int k() const { return static_cast<int>(xi_.size()); }
  // 1-based xi_i.
  const S& at(int i) const { return xi_.at(i - 1); }
  // Pi_i for i in 1..k+1.
  const S& prod_from(int i) const { return suffix_.at(i - 1); }
  const S& prod_all() const { return suffix_.front(); }
  const std::vector<S>& values() const { return xi_; }

  template <class T>
  XiVector<T> cast() const {
    std::vector<T> v;
    v.reserve(xi_.size());
    for (const S& x : xi_) v.push_back(convert_scalar<T>(x));
    return XiVector<T>(std::move(v));
  }

 private:
  std::vector<S> xi_;
  std::vector<S> suffix_;
};

template <class S>
class TransferMatrix {
 public:
  TransferMatrix(int dim, std::vector<S> entries)
      : dim_(dim), a_(std::move(entries)) {
    if (static_cast<int>(a_.size()) != dim_ * dim_)
      throw DomainError("TransferMatrix: size mismatch");
  }
  explicit TransferMatrix(int dim)
      : dim_(dim), a_(static_cast<std::size_t>(dim) * dim, ScalarOps<S>::zero()) {}

  int dim() const { return dim_; }
  const S& at(int mu, int nu) const { return a_.at(mu * dim_ + nu); }
  S& at(int mu, int nu) { return a_.at(mu * dim_ + nu); }

  std::vector<S> apply(const std::vector<S>& v) const {
    std::vector<S> out(dim_, ScalarOps<S>::zero());
    for (int mu = 0; mu < dim_; ++mu)
      for (int nu = 0; nu < dim_; ++nu) out[mu] += at(mu, nu) * v[nu];
    return out;
  }

 private:
  int dim_;
  std::vector<S> a_;
};

// eps(xi) = p/xi + q xi - 1, the single-particle jump symbol.
template <class S>
S dispersion(const S& xi, const Params<S>& pr) {
  if (ScalarOps<S>::is_zero(xi)) throw DomainError("dispersion: xi = 0");
  return pr.p / xi + pr.q * xi - ScalarOps<S>::one();
}

// f(xi_i, xi_j) = (xi_j - xi_i) / (p + q xi_i xi_j - xi_i).
template <class S>
S pair_factor(const S& xi_i, const S& xi_j, const Params<S>& pr) {
  S denom = pr.p + pr.q * xi_i * xi_j - xi_i;
  if (ScalarOps<S>::is_zero(denom))
    throw PoleError("pair_factor: vanishing denominator");
  return (xi_j - xi_i) / denom;
}

namespace detail {
template <class S>
S exp_scaled(const S& eps, double t) {
  if constexpr (ScalarOps<S>::exact) {
    (void)eps;
    if (t != 0.0)
      throw DomainError("base_integrand: exact evaluation requires t = 0");
    return ScalarOps<S>::one();
  } else if constexpr (std::is_same_v<S, double>) {
    return std::exp(eps * t);
  } else {
    return std::exp(eps * t);
  }
}
}  // namespace detail

// The configuration-independent part of the integrand:
//   prod_{i<j} f(xi_i, xi_j) * prod_i xi_i^x e^{eps(xi_i) t} / (1 - xi_i).
// Exact instantiations are restricted to t = 0 (e^{eps t} is transcendental).
template <class S>
S base_integrand(long long x, const XiVector<S>& xi, double t,
                 const Params<S>& pr) {
  const S one = ScalarOps<S>::one();
  const int k = xi.k();
  for (int i = 1; i <= k; ++i) {
    if (ScalarOps<S>::is_zero(xi.at(i)))
      throw DomainError("base_integrand: xi = 0");
    if (xi.at(i) == one) throw DomainError("base_integrand: xi = 1");
  }
  S prod = one;
  for (int i = 1; i <= k; ++i)
    for (int j = i + 1; j <= k; ++j)
      prod *= pair_factor(xi.at(i), xi.at(j), pr);
  for (int i = 1; i <= k; ++i) {
    prod *= pow_int(xi.at(i), x) *
            detail::exp_scaled(dispersion(xi.at(i), pr), t) / (one - xi.at(i));
  }
  return prod;
}

// phi(i, n) = 1 - rho_n + rho_n tau^{k-i+1}: the weight a single gap site n
// acquires after averaging over its occupation.
template <class S, class Profile>
S gap_weight(int i, long long n, int k, const Profile& rho,
             const Params<S>& pr) {
  if (i < 1 || i > k) throw DomainError("gap_weight: need 1 <= i <= k");
  S r = rho.rho(n);
  return ScalarOps<S>::one() - r + r * pow_int(pr.tau, k - i + 1);
}

// The m x m transfer matrix A_i for a periodic profile.  Entry (mu, nu):
//   common denominator D = Pi_i^m - prod_{n=1..m} phi(i,n)
//   mu < nu : Pi_i^m xi_i^{-nu} rho_nu prod_{n=mu+1}^{nu-1}   phi(i,n) / D
//   mu >= nu:          xi_i^{-nu} rho_nu prod_{n=mu+1}^{nu+m-1} phi(i,n) / D
// with phi read through the periodic residue lookup.
template <class S>
TransferMatrix<S> transfer_matrix(int i, int k, const XiVector<S>& xi,
                                  const PeriodicProfile<S>& rho,
                                  const Params<S>& pr) {
  const int m = rho.period();
  const S one = ScalarOps<S>::one();
  const S pi_m = pow_int(xi.prod_from(i), static_cast<long long>(m));

  // phi at sites 1..2m-1; site n belongs to residue n mod m.
  std::vector<S> phi(2 * m);
  for (int n = 1; n <= 2 * m - 1; ++n)
    phi[n] = gap_weight<S>(i, n, k, rho, pr);
  S phi_all = one;
  for (int n = 1; n <= m; ++n) phi_all *= phi[n];

  S denom = pi_m - phi_all;
  if (ScalarOps<S>::is_zero(denom))
    throw PoleError("transfer_matrix: resonant denominator");
  const S inv_denom = one / denom;
  const S inv_xi = one / xi.at(i);

  TransferMatrix<S> a(m);
  for (int nu = 0; nu < m; ++nu) {
    const S col = pow_int(inv_xi, nu) * rho.at_residue(nu) * inv_denom;
    for (int mu = 0; mu < m; ++mu) {
      S range = one;
      if (mu < nu) {
        for (int n = mu + 1; n <= nu - 1; ++n) range *= phi[n];
        a.at(mu, nu) = pi_m * col * range;
      } else {
        for (int n = mu + 1; n <= nu + m - 1; ++n) range *= phi[n];
        a.at(mu, nu) = col * range;
      }
    }
  }
  return a;
}

// Top-row sum of A_1 A_2 ... A_k (lower index leftmost), i.e. the
// configuration average of the subset sum for an m-periodic profile,
// without tau^{k(k+1)/2}.
template <class S>
S periodic_factor(const XiVector<S>& xi, const PeriodicProfile<S>& rho,
                  const Params<S>& pr) {
  const int k = xi.k();
  std::vector<S> v(rho.period(), ScalarOps<S>::one());
  for (int i = k; i >= 1; --i)
    v = transfer_matrix(i, k, xi, rho, pr).apply(v);
  return v[0];
}

// The (N+1) x (N+1) truncation of the semi-infinite chain matrix B_i:
//   B_{i,mu,nu} = xi_i^{-nu} rho_nu prod_{n=mu+1}^{nu-1} phi(i,n)  (mu < nu)
// and 0 otherwise; strictly upper triangular.
template <class S>
TransferMatrix<S> chain_matrix(int i, int k, const XiVector<S>& xi,
                               const GeneralProfile<S>& rho,
                               const Params<S>& pr) {
  const long long n_max = rho.horizon();
  const int dim = static_cast<int>(n_max) + 1;
  const S inv_xi = ScalarOps<S>::one() / xi.at(i);
  TransferMatrix<S> b(dim);
  for (int nu = 1; nu < dim; ++nu) {
    const S col = pow_int(inv_xi, nu) * rho.rho(nu);
    S range = ScalarOps<S>::one();
    for (int mu = nu - 1; mu >= 0; --mu) {
      b.at(mu, nu) = col * range;
      if (mu >= 1) range *= gap_weight<S>(i, mu, k, rho, pr);
    }
  }
  return b;
}

// Top-row sum of B_1 ... B_k over the (N+1)-truncated matrices.  Because B is
// strictly upper triangular this equals the exact finite sum over chains
// 0 < s_1 < ... < s_k <= N, with no truncation error relative to horizon N.
// Computed by the backward recurrence w_mu = c_{mu+1} v_{mu+1} +
// phi(i, mu+1) w_{mu+1} (c_nu = xi_i^{-nu} rho_nu), which is the
// matrix-vector product evaluated with shared partial gap products.
template <class S>
S truncated_general_factor(const XiVector<S>& xi, const GeneralProfile<S>& rho,
                           const Params<S>& pr) {
  const int k = xi.k();
  const long long n_max = rho.horizon();
  std::vector<S> v(n_max + 1, ScalarOps<S>::one());
  std::vector<S> w(n_max + 1, ScalarOps<S>::zero());
  for (int i = k; i >= 1; --i) {
    const S inv_xi = ScalarOps<S>::one() / xi.at(i);
    w[n_max] = ScalarOps<S>::zero();
    S xp = pow_int(inv_xi, n_max);
    for (long long mu = n_max - 1; mu >= 0; --mu) {
      w[mu] = xp * rho.rho(mu + 1) * v[mu + 1] +
              gap_weight<S>(i, mu + 1, k, rho, pr) * w[mu + 1];
      xp *= xi.at(i);
    }
    std::swap(v, w);
  }
  return v[0];
}

// Step initial data (every positive site occupied):
//   prod_{i=1..k} 1 / (xi_i...xi_k - tau^{k-i+1}).
template <class S>
S step_factor(const XiVector<S>& xi, const Params<S>& pr) {
  const int k = xi.k();
  S prod = ScalarOps<S>::one();
  for (int i = 1; i <= k; ++i) {
    S denom = xi.prod_from(i) - pow_int(pr.tau, k - i + 1);
    if (ScalarOps<S>::is_zero(denom)) throw PoleError("step_factor: pole");
    prod /= denom;
  }
  return prod;
}

// Uniform Bernoulli(rho) initial data:
//   prod_{i=1..k} rho / (xi_i...xi_k - 1 + rho - tau^{k-i+1} rho).
template <class S>
S bernoulli_factor(const XiVector<S>& xi, const S& rho, const Params<S>& pr) {
  const int k = xi.k();
  const S one = ScalarOps<S>::one();
  S prod = one;
  for (int i = 1; i <= k; ++i) {
    S denom = xi.prod_from(i) - one + rho - pow_int(pr.tau, k - i + 1) * rho;
    if (ScalarOps<S>::is_zero(denom)) throw PoleError("bernoulli_factor: pole");
    prod *= rho / denom;
  }
  return prod;
}

// Deterministic sublattice initial data Y = m Z^+:
//   prod_{i=1..k} 1 / ((xi_i...xi_k)^m - tau^{k-i+1}).
template <class S>
S lattice_factor(const XiVector<S>& xi, int m, const Params<S>& pr) {
  const int k = xi.k();
  S prod = ScalarOps<S>::one();
  for (int i = 1; i <= k; ++i) {
    S denom = pow_int(xi.prod_from(i), static_cast<long long>(m)) -
              pow_int(pr.tau, k - i + 1);
    if (ScalarOps<S>::is_zero(denom)) throw PoleError("lattice_factor: pole");
    prod /= denom;
  }
  return prod;
}

// One-hot profile: occupation probability rho on the residue class nu mod m,
// zero elsewhere.  For 0 < nu <= m:
//   (xi_1...xi_k)^{m-nu} prod_{i=1..k} rho / ((xi_i...xi_k)^m - phi*)
// with phi* = 1 - rho + rho tau^{k-i+1}; nu = 0 and nu = m agree.
template <class S>
S indicator_factor(const XiVector<S>& xi, int m, int nu, const S& rho,
                   const Params<S>& pr) {
  if (nu < 0 || nu > m) throw DomainError("indicator_factor: need 0 <= nu <= m");
  const int k = xi.k();
  const int nu_r = nu % m;
  const S one = ScalarOps<S>::one();
  S prod = nu_r == 0 ? one
                     : pow_int(xi.prod_all(), static_cast<long long>(m - nu_r));
  for (int i = 1; i <= k; ++i) {
    S denom = pow_int(xi.prod_from(i), static_cast<long long>(m)) -
              (one - rho + rho * pow_int(pr.tau, k - i + 1));
    if (ScalarOps<S>::is_zero(denom)) throw PoleError("indicator_factor: pole");
    prod *= rho / denom;
  }
  return prod;
}

// Weight of one subset S of a deterministic configuration Y, normalized by
// the global subset weight:  tau^{sigma(S,Y) - k(k+1)/2} prod_i xi_i^{-s_i}.
// sigma(S,Y) >= sigma(S,S) = k(k+1)/2, so the exponent is >= 0.
template <class S>
S deterministic_factor(const XiVector<S>& xi, const SiteSet& s,
                       const SiteSet& y, const Params<S>& pr) {
  if (!s.subset_of(y))
    throw DomainError("deterministic_factor: S must be a subset of Y");
  const int k = s.size();
  if (k != xi.k())
    throw DomainError("deterministic_factor: |S| must match the xi tuple");
  const long long sigma = pairs_geq(s, y);
  S prod = pow_int(pr.tau, sigma - static_cast<long long>(k) * (k + 1) / 2);
  for (int i = 1; i <= k; ++i) prod *= pow_int(xi.at(i), -s.site(i));
  return prod;
}

}  // namespace asepdist

#endif  // ASEPDIST_KERNEL_HPP
