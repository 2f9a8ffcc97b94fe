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
// Continuous-time Monte Carlo ASEP on the integers: uniformized event loop
// (global Exp(#particles) clock, uniform particle pick, p/q direction,
// blocked moves discarded), equal in law to the graphical construction.
//
// RNG contract: one stream per trial, derived from (seed, trial index) by a
// SplitMix64 scramble feeding mt19937_64; uniforms come from the top 53 bits
// of the engine output and exponentials via inversion, so trial streams are
// order-independent and results are byte-stable for a given seed.

#ifndef ASEPDIST_SIMULATOR_HPP
#define ASEPDIST_SIMULATOR_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "asepdist/quadrature.hpp"

namespace asepdist {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class TrialRandom {
 public:
  TrialRandom(std::uint64_t seed, std::uint64_t trial) {
    std::uint64_t s = seed;
    detail::splitmix64(s);
    s ^= 0x9e3779b97f4a7c15ULL * (trial + 1);
    eng_.seed(detail::splitmix64(s));
  }

  // [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  long long index(long long n) {
    return static_cast<long long>(
        (static_cast<unsigned __int128>(eng_()) * static_cast<std::uint64_t>(n)) >>
        64);
  }

 private:
  std::mt19937_64 eng_;
};

// Evolved configuration on all of Z: strictly increasing, signs unconstrained
// (initial data lives in Z^+ and uses SiteSet, but particles drift left).
class Configuration {
 public:
  explicit Configuration(std::vector<long long> pos) : pos_(std::move(pos)) {
    for (std::size_t i = 1; i < pos_.size(); ++i)
      if (pos_[i] <= pos_[i - 1])
        throw DomainError("Configuration: sites must be strictly increasing");
  }
  int size() const { return static_cast<int>(pos_.size()); }
  // 1-based: the l-th particle from the left.
  long long site(int l) const { return pos_.at(l - 1); }
  const std::vector<long long>& sites() const { return pos_; }

 private:
  std::vector<long long> pos_;
};

struct SimConfig {
  double p = 0.5;  // hop-right probability; q = 1 - p (q = 0 allowed here)
  double t = 1.0;
  InitialData initial;
  long long truncation = 0;  // L: initial data restricted to [1, L]; 0 = auto
  long long trials = 10000;
  std::uint64_t seed = 1;
  int l_max = 1;
  long long x_min = 0;
  long long x_max = 0;
  int threads = 0;
};

struct EmpiricalCdf {
  long long x_min = 0, x_max = 0;
  long long trials = 0;
  // hits[l-1][x - x_min] = #{trials : x_l(t) <= x}, cumulative in x.
  std::vector<std::vector<long long>> hits;

  double p_hat(int l, long long x) const {
    return static_cast<double>(hits[l - 1][x - x_min]) / trials;
  }
  double stderr_at(int l, long long x) const {
    const double p = p_hat(l, x);
    return std::sqrt(p * (1.0 - p) / trials);
  }
};

namespace detail {

inline std::vector<double> site_probabilities(const InitialData& initial,
                                              long long l_trunc) {
  if (std::holds_alternative<std::monostate>(initial))
    throw DomainError("simulate: no initial data in the config");
  std::vector<double> prob(l_trunc + 1, 0.0);
  if (const auto* p = std::get_if<PeriodicInit>(&initial)) {
    const auto d = p->profile.cast<double>();
    for (long long n = 1; n <= l_trunc; ++n) prob[n] = d.rho(n);
  } else if (const auto* g = std::get_if<GeneralInit>(&initial)) {
    const auto d = g->profile.cast<double>();
    for (long long n = 1; n <= l_trunc; ++n) prob[n] = d.rho(n);
  } else {
    for (long long s : std::get<DeterministicInit>(initial).y)
      if (s <= l_trunc) prob[s] = 1.0;
  }
  return prob;
}

inline int profile_period(const InitialData& initial) {
  if (const auto* p = std::get_if<PeriodicInit>(&initial))
    return p->profile.period();
  return 1;
}

}  // namespace detail

// Each site n in [1, L] occupied independently with probability rho(n).
inline SiteSet sample_initial(const InitialData& initial, long long l_trunc,
                              TrialRandom& rng, int min_particles = 0,
                              int max_retries = 8) {
  for (int attempt = 0;; ++attempt) {
    const auto prob = detail::site_probabilities(initial, l_trunc);
    std::vector<long long> sites;
    for (long long n = 1; n <= l_trunc; ++n)
      if (rng.uniform() < prob[n]) sites.push_back(n);
    if (static_cast<int>(sites.size()) >= min_particles)
      return SiteSet(std::move(sites));
    if (attempt >= max_retries)
      throw ResourceError(
          "sample_initial: fewer particles than tracked indices even after "
          "extending the horizon");
    l_trunc *= 2;
  }
}

// Exact continuous-time dynamics up to time t.  Exclusion forbids crossings,
// so the returned configuration is strictly increasing and particle order is
// preserved.
inline Configuration evolve(const SiteSet& initial, double t, double p,
                            TrialRandom& rng) {
  std::vector<long long> pos(initial.sites());
  const long long n = static_cast<long long>(pos.size());
  if (n == 0 || t <= 0.0) return Configuration(std::move(pos));
  double now = 0.0;
  while (true) {
    now += rng.exponential(static_cast<double>(n));
    if (now > t) break;
    const long long i = rng.index(n);
    if (rng.uniform() < p) {
      if (i + 1 == n || pos[i + 1] != pos[i] + 1) ++pos[i];
    } else {
      if (i == 0 || pos[i - 1] != pos[i] - 1) --pos[i];
    }
  }
  return Configuration(std::move(pos));
}

inline long long default_truncation(const SimConfig& cfg) {
  const long long span = std::max<long long>(cfg.x_max, 0);
  return span + static_cast<long long>(cfg.l_max) *
                    detail::profile_period(cfg.initial) +
         static_cast<long long>(std::ceil(5.0 * cfg.t)) + 20;
}

inline EmpiricalCdf estimate_cdf(const SimConfig& cfg) {
  if (cfg.trials < 1) throw DomainError("estimate_cdf: need trials >= 1");
  if (cfg.l_max < 1) throw DomainError("estimate_cdf: need l_max >= 1");
  if (cfg.x_max < cfg.x_min) throw DomainError("estimate_cdf: empty x window");
  if (!(cfg.p >= 0.0 && cfg.p <= 1.0))
    throw DomainError("estimate_cdf: p outside [0,1]");
  const long long l_trunc =
      cfg.truncation > 0 ? cfg.truncation : default_truncation(cfg);

  const int nx = static_cast<int>(cfg.x_max - cfg.x_min + 1);
  // Per-thread position histograms with an underflow bin at index 0.
  const int threads = std::max(
      1, std::min<int>(detail::resolve_threads(cfg.threads),
                       static_cast<int>(std::min<long long>(cfg.trials, 64))));
  std::vector<std::vector<long long>> partial(
      threads, std::vector<long long>(static_cast<std::size_t>(cfg.l_max) * nx,
                                      0));

  auto worker = [&](int slot, long long begin, long long end) {
    auto& hist = partial[slot];
    for (long long trial = begin; trial < end; ++trial) {
      TrialRandom rng(cfg.seed, static_cast<std::uint64_t>(trial));
      const SiteSet y = sample_initial(cfg.initial, l_trunc, rng, cfg.l_max);
      const Configuration z = evolve(y, cfg.t, cfg.p, rng);
      for (int l = 1; l <= cfg.l_max; ++l) {
        const long long x = z.site(l);
        if (x > cfg.x_max) continue;
        const long long bin = std::max<long long>(0, x - cfg.x_min);
        ++hist[static_cast<std::size_t>(l - 1) * nx + bin];
      }
    }
  };

  if (threads == 1) {
    worker(0, 0, cfg.trials);
  } else {
    std::vector<std::thread> pool;
    const long long chunk = (cfg.trials + threads - 1) / threads;
    for (int s = 0; s < threads; ++s) {
      const long long begin = s * chunk;
      const long long end = std::min(cfg.trials, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, s, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  EmpiricalCdf out;
  out.x_min = cfg.x_min;
  out.x_max = cfg.x_max;
  out.trials = cfg.trials;
  out.hits.assign(cfg.l_max, std::vector<long long>(nx, 0));
  for (int l = 0; l < cfg.l_max; ++l) {
    long long running = 0;
    for (int ix = 0; ix < nx; ++ix) {
      for (int s = 0; s < threads; ++s)
        running += partial[s][static_cast<std::size_t>(l) * nx + ix];
      out.hits[l][ix] = running;
    }
  }
  return out;
}

// Doubles the initial-data horizon under a shared seed and reports the worst
// shift of the empirical CDF against the combined binomial error.
struct TruncationReport {
  long long l_trunc = 0;
  double max_discrepancy = 0.0;
  double worst_allowance = 0.0;
  bool flagged = false;
  EmpiricalCdf base, extended;
};

inline TruncationReport truncation_check(const SimConfig& cfg) {
  TruncationReport rep;
  rep.l_trunc = cfg.truncation > 0 ? cfg.truncation : default_truncation(cfg);
  SimConfig doubled = cfg;
  doubled.truncation = 2 * rep.l_trunc;
  rep.base = estimate_cdf(cfg);
  rep.extended = estimate_cdf(doubled);
  for (int l = 1; l <= cfg.l_max; ++l)
    for (long long x = cfg.x_min; x <= cfg.x_max; ++x) {
      const double d = std::abs(rep.base.p_hat(l, x) - rep.extended.p_hat(l, x));
      const double se1 = rep.base.stderr_at(l, x);
      const double se2 = rep.extended.stderr_at(l, x);
      const double allow = 3.0 * std::sqrt(se1 * se1 + se2 * se2);
      if (d > rep.max_discrepancy) {
        rep.max_discrepancy = d;
        rep.worst_allowance = allow;
      }
      if (d > allow) rep.flagged = true;
    }
  return rep;
}

}  // namespace asepdist

#endif  // ASEPDIST_SIMULATOR_HPP
