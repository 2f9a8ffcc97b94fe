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
// Exact brute-force ground truth for every summation identity used by the
// closed forms in kernel.hpp, plus a randomized identity suite over rational
// instances.  The enumerators stay deliberately dumb: configurations are
// listed as bitmasks and the pair statistic is counted pair by pair, so a bug
// in the closed forms cannot confirm itself here.

#ifndef ASEPDIST_ORACLE_HPP
#define ASEPDIST_ORACLE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "asepdist/kernel.hpp"
#include "asepdist/scalar.hpp"

namespace asepdist {

// Average of tau^{sigma(S,Y)} over initial configurations Y with
// S subset Y subset [1,N]:
//   sum_Y tau^{sigma(S,Y)} prod_{n in Y} rho_n prod_{n in [1,N]\Y} (1-rho_n).
inline Rational brute_config_average(const SiteSet& s, long long n,
                                     const GeneralProfile<Rational>& rho,
                                     const Params<Rational>& pr) {
  if (n < 0 || (!s.empty() && s.max_site() > n))
    throw DomainError("brute_config_average: S must lie in [1,N]");
  if (n > 20)
    throw ResourceError("brute_config_average: horizon too large (N > 20)");

  std::vector<long long> free_sites;
  for (long long site = 1; site <= n; ++site)
    if (!s.contains(site)) free_sites.push_back(site);
  const int f = static_cast<int>(free_sites.size());

  // tau powers up to the largest possible sigma.
  std::vector<Rational> tau_pow(static_cast<std::size_t>(s.size()) * n + 1);
  tau_pow[0] = 1;
  for (std::size_t j = 1; j < tau_pow.size(); ++j)
    tau_pow[j] = tau_pow[j - 1] * pr.tau;

  Rational total = 0;
  std::vector<long long> y_sites;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << f); ++mask) {
    y_sites.assign(s.begin(), s.end());
    for (int b = 0; b < f; ++b)
      if (mask & (std::uint64_t{1} << b)) y_sites.push_back(free_sites[b]);
    std::sort(y_sites.begin(), y_sites.end());
    SiteSet y(y_sites);

    Rational weight = tau_pow[static_cast<std::size_t>(pairs_geq(s, y))];
    for (long long site = 1; site <= n; ++site)
      weight *= y.contains(site) ? rho.rho(site) : 1 - rho.rho(site);
    total += weight;
  }
  return total;
}

// Test hook: replace phi(i0, n0) by phi(i0, n0) + delta inside
// config_average_product, to prove the suite detects a wrong weight.
struct PhiPerturbation {
  int i = 0;
  long long n = 0;
  Rational delta;
};

// Closed form of the same average:
//   tau^{k(k+1)/2} prod_{n in S} rho_n prod_{i=1..k} prod_{n in (s_{i-1}, s_i)}
//   phi(i, n),   with s_0 = 0.
template <class Profile>
Rational config_average_product(
    const SiteSet& s, const Profile& rho, const Params<Rational>& pr,
    const std::optional<PhiPerturbation>& perturb = std::nullopt) {
  const int k = s.size();
  if (k < 1) throw DomainError("config_average_product: need |S| >= 1");
  Rational prod = pow_int(pr.tau, static_cast<long long>(k) * (k + 1) / 2);
  for (long long site : s) prod *= rho.rho(site);
  long long prev = 0;
  for (int i = 1; i <= k; ++i) {
    for (long long site = prev + 1; site < s.site(i); ++site) {
      Rational phi = gap_weight<Rational>(i, site, k, rho, pr);
      if (perturb && perturb->i == i && perturb->n == site)
        phi += perturb->delta;
      prod *= phi;
    }
    prev = s.site(i);
  }
  return prod;
}

namespace detail {
// Visits all k-subsets {c[0] < ... < c[k-1]} of [1, n].
template <class Fn>
void for_each_subset(long long n, int k, Fn&& fn) {
  if (k > n) return;
  std::vector<long long> c(k);
  for (int i = 0; i < k; ++i) c[i] = i + 1;
  while (true) {
    fn(c);
    int i = k - 1;
    while (i >= 0 && c[i] == n - (k - 1 - i)) --i;
    if (i < 0) break;
    ++c[i];
    for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
  }
}
}  // namespace detail

// First-principles double sum
//   sum_{S subset [1,N], |S|=k} brute_config_average(S, N) prod_i xi_i^{-s_i},
// the quantity the chain-matrix product closes in to
//   tau^{k(k+1)/2} * truncated_general_factor.
inline Rational brute_subset_sum(int k, long long n,
                                 const GeneralProfile<Rational>& rho,
                                 const XiVector<Rational>& xi,
                                 const Params<Rational>& pr) {
  if (n > 14 || k > 4)
    throw ResourceError("brute_subset_sum: instance too large (N <= 14, k <= 4)");
  if (k != xi.k()) throw DomainError("brute_subset_sum: k must match xi");
  if (k > n) return 0;

  // xi_i^{-s} tables for s = 1..N.
  std::vector<std::vector<Rational>> xp(k + 1, std::vector<Rational>(n + 1));
  for (int i = 1; i <= k; ++i) {
    Rational inv = Rational(1) / xi.at(i);
    xp[i][0] = 1;
    for (long long s = 1; s <= n; ++s) xp[i][s] = xp[i][s - 1] * inv;
  }

  Rational total = 0;
  detail::for_each_subset(n, k, [&](const std::vector<long long>& c) {
    Rational term = brute_config_average(SiteSet(c), n, rho, pr);
    for (int i = 1; i <= k; ++i) term *= xp[i][c[i - 1]];
    total += term;
  });
  return total;
}

struct InstanceDesc {
  int k = 0;
  int m = 0;
  long long n = 0;
  std::string tau;
  std::vector<std::string> rho;
  std::vector<std::string> xi;
};

struct IdentityReport {
  std::string identity;
  InstanceDesc instance;
  std::string left;
  std::string right;
  bool equal = false;
};

struct SuiteOptions {
  std::uint64_t seed = 1;
  int trials = 100;
  int k_max = 4;
  int m_max = 4;
  long long n_max = 12;
  bool perturb_phi = false;  // test hook: sabotage one phi in trial 0
};

// Convergence of the truncated chain product (horizon N = mT) to the
// periodic transfer-matrix product, in double precision.
struct AvBReport {
  InstanceDesc instance;
  std::vector<long long> horizons;
  std::vector<double> gaps;
  double final_gap = 0.0;
  bool geometric = false;
  bool converged = false;
  bool passed() const { return geometric && converged; }
};

inline AvBReport avb_convergence_check(const XiVector<Rational>& xi,
                                       const PeriodicProfile<Rational>& rho,
                                       const Params<Rational>& pr_exact,
                                       const std::vector<int>& doublings = {2, 4,
                                                                            8,
                                                                            16},
                                       double final_tol = 1e-10) {
  const int k = xi.k();
  const int m = rho.period();
  const auto pr = Params<double>{to_scalar<double>(pr_exact.p),
                                 to_scalar<double>(pr_exact.q),
                                 to_scalar<double>(pr_exact.tau)};
  const auto xi_d = xi.cast<double>();
  const auto rho_d = rho.cast<double>();
  const double weight =
      pow_int(pr.tau, static_cast<long long>(k) * (k + 1) / 2);
  const double limit = weight * periodic_factor(xi_d, rho_d, pr);

  AvBReport rep;
  rep.gaps.reserve(doublings.size());
  for (int t : doublings) {
    const long long n = static_cast<long long>(m) * t;
    const auto gp = GeneralProfile<double>::from_periodic(rho_d, n);
    const double truncated = weight * truncated_general_factor(xi_d, gp, pr);
    rep.horizons.push_back(n);
    rep.gaps.push_back(std::abs(truncated - limit));
  }
  const double scale = std::max(1.0, std::abs(limit));
  rep.geometric = true;
  for (std::size_t j = 1; j < rep.gaps.size(); ++j)
    rep.geometric = rep.geometric &&
                    rep.gaps[j] <= 0.5 * rep.gaps[j - 1] + 1e-14 * scale;
  rep.final_gap = rep.gaps.empty() ? 0.0 : rep.gaps.back();
  rep.converged = rep.final_gap < final_tol * scale;
  return rep;
}

namespace detail {

inline std::vector<std::string> rational_strings(const std::vector<Rational>& v) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& q : v) out.push_back(rational_str(q));
  return out;
}

class SuiteRng {
 public:
  explicit SuiteRng(std::uint64_t seed) : eng_(seed) {}
  long long uniform(long long lo, long long hi) {
    return std::uniform_int_distribution<long long>(lo, hi)(eng_);
  }
  template <class T>
  const T& pick(const std::vector<T>& pool) {
    return pool[static_cast<std::size_t>(uniform(0, pool.size() - 1))];
  }
  std::vector<long long> distinct_sites(int count, long long lo, long long hi) {
    std::vector<long long> all;
    for (long long s = lo; s <= hi; ++s) all.push_back(s);
    std::shuffle(all.begin(), all.end(), eng_);
    all.resize(count);
    std::sort(all.begin(), all.end());
    return all;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace detail

// Randomized exact identity suite.  Every report compares two independently
// computed rational values; `equal` is exact equality.
inline std::vector<IdentityReport> run_identity_suite(const SuiteOptions& opts) {
  static const std::vector<Rational> kTauPool = {
      Rational(0), Rational(1, 3), Rational(1, 2), Rational(2, 3)};
  static const std::vector<Rational> kXiPool = {
      Rational(3, 2), Rational(2), Rational(5, 2), Rational(3), Rational(7, 2)};
  static const std::vector<Rational> kRhoPool = {
      Rational(0),    Rational(1, 4), Rational(1, 3), Rational(1, 2),
      Rational(2, 3), Rational(3, 4), Rational(1)};

  detail::SuiteRng rng(opts.seed);
  std::vector<IdentityReport> reports;

  for (int trial = 0; trial < opts.trials; ++trial) {
    const bool sabotage = opts.perturb_phi && trial == 0;

    const Rational tau = sabotage ? Rational(1, 2) : rng.pick(kTauPool);
    const ModelParams model(tau / (1 + tau));  // p = tau/(1+tau), q = 1/(1+tau)
    const auto pr = model.as<Rational>();

    const int k =
        sabotage ? 1 : static_cast<int>(rng.uniform(1, std::min(opts.k_max, 4)));
    const int m = static_cast<int>(rng.uniform(1, opts.m_max));

    std::vector<Rational> xi_vals;
    for (int i = 0; i < k; ++i) xi_vals.push_back(rng.pick(kXiPool));
    const XiVector<Rational> xi(xi_vals);

    std::vector<Rational> rho_vals;
    do {
      rho_vals.clear();
      for (int r = 0; r < m; ++r) rho_vals.push_back(rng.pick(kRhoPool));
    } while (std::all_of(rho_vals.begin(), rho_vals.end(),
                         [](const Rational& v) { return sgn(v) == 0; }));
    const PeriodicProfile<Rational> periodic(rho_vals);

    InstanceDesc base;
    base.k = k;
    base.m = m;
    base.tau = rational_str(tau);
    base.rho = detail::rational_strings(rho_vals);
    base.xi = detail::rational_strings(xi_vals);

    auto report = [&](const std::string& name, const Rational& left,
                      const Rational& right, InstanceDesc inst) {
      reports.push_back(IdentityReport{name, std::move(inst),
                                       rational_str(left), rational_str(right),
                                       left == right});
    };

    // (a) Configuration average: enumeration vs closed product, at the
    // minimal horizon and at a larger one (horizon independence).
    {
      SiteSet s(sabotage ? std::vector<long long>{2}
                         : rng.distinct_sites(k, 1, k + 6));
      const long long n_lo = s.max_site();
      const long long n_hi = n_lo + 3;
      std::vector<Rational> site_rho;
      for (long long site = 1; site <= n_hi; ++site)
        site_rho.push_back(sabotage ? Rational(1, 2) : rng.pick(kRhoPool));
      const GeneralProfile<Rational> gen(site_rho);

      std::optional<PhiPerturbation> hook;
      if (sabotage) hook = PhiPerturbation{1, 1, Rational(1)};

      InstanceDesc inst = base;
      inst.n = n_lo;
      inst.rho = detail::rational_strings(site_rho);
      const Rational brute_lo = brute_config_average(s, n_lo, gen, pr);
      const Rational brute_hi = brute_config_average(s, n_hi, gen, pr);
      const Rational closed = config_average_product(s, gen, pr, hook);
      report("config_average_brute_vs_product", brute_lo, closed, inst);
      inst.n = n_hi;
      report("config_average_horizon_independence", brute_lo, brute_hi, inst);
    }

    // (b) Subset sum: enumeration vs chain-matrix product, arbitrary profile.
    {
      const long long n_lo = std::max<long long>(k, m);
      const long long n =
          rng.uniform(n_lo, std::max(n_lo, std::min<long long>(opts.n_max, 14)));
      std::vector<Rational> site_rho;
      for (long long site = 1; site <= n; ++site)
        site_rho.push_back(rng.pick(kRhoPool));
      const GeneralProfile<Rational> gen(site_rho);

      InstanceDesc inst = base;
      inst.n = n;
      inst.rho = detail::rational_strings(site_rho);
      const Rational brute = brute_subset_sum(k, n, gen, xi, pr);
      const Rational closed =
          pow_int(pr.tau, static_cast<long long>(k) * (k + 1) / 2) *
          truncated_general_factor(xi, gen, pr);
      report("subset_sum_brute_vs_chain", brute, closed, inst);
    }

    // (c) Reduction identities of the closed forms.
    {
      Rational rho_c = rng.pick(kRhoPool);
      if (sgn(rho_c) == 0) rho_c = Rational(1, 2);

      for (int mm = 1; mm <= opts.m_max; ++mm) {
        const PeriodicProfile<Rational> constant(
            std::vector<Rational>(mm, rho_c));
        InstanceDesc inst = base;
        inst.m = mm;
        inst.rho = {rational_str(rho_c)};
        report("uniform_reduction", periodic_factor(xi, constant, pr),
               bernoulli_factor(xi, rho_c, pr), inst);
      }

      report("period_doubling", periodic_factor(xi, periodic, pr),
             periodic_factor(xi, periodic.repeated(2), pr), base);

      for (int nu = 0; nu < m; ++nu) {
        std::vector<Rational> one_hot(m, Rational(0));
        one_hot[nu] = rho_c;
        InstanceDesc inst = base;
        inst.rho = {rational_str(rho_c)};
        inst.n = nu;
        report("one_hot_vs_indicator",
               periodic_factor(xi, PeriodicProfile<Rational>(one_hot), pr),
               indicator_factor(xi, m, nu, rho_c, pr), inst);
      }

      const PeriodicProfile<Rational> full(
          std::vector<Rational>(m, Rational(1)));
      report("step_profile_reduction", periodic_factor(xi, full, pr),
             step_factor(xi, pr), base);

      std::vector<Rational> lattice_hot(m, Rational(0));
      lattice_hot[0] = 1;
      report("lattice_one_hot_reduction",
             periodic_factor(xi, PeriodicProfile<Rational>(lattice_hot), pr),
             lattice_factor(xi, m, pr), base);

      if (sgn(pr.tau) != 0) {
        const long long l = rng.uniform(1, k);
        report("prefactor_consistency",
               raw_series_coefficient(l, k, pr) *
                   pow_int(pr.tau, static_cast<long long>(k) * (k + 1) / 2),
               series_prefactor(l, k, pr), base);
      }

      for (int i = 1; i <= k; ++i)
        report("suffix_product_cache", xi.prod_from(i),
               xi.at(i) * xi.prod_from(i + 1), base);

      const GeneralProfile<Rational> gen =
          GeneralProfile<Rational>::from_periodic(periodic, m + 2);
      const auto b = chain_matrix(1, k, xi, gen, pr);
      Rational lower_abs_sum = 0;
      for (int mu = 0; mu < b.dim(); ++mu)
        for (int nu = 0; nu <= mu; ++nu) lower_abs_sum += abs(b.at(mu, nu));
      report("chain_matrix_triangular", lower_abs_sum, Rational(0), base);
    }
  }
  return reports;
}

}  // namespace asepdist

#endif  // ASEPDIST_ORACLE_HPP
