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

#include <catch2/catch_amalgamated.hpp>

#include "asepdist/quadrature.hpp"
#include "support.hpp"

using namespace asepdist;
using testsupport::geometric_poisson_cdf;
using testsupport::poisson_tail;

namespace {

const ModelParams kThird(Rational(1, 3));   // p = 1/3, tau = 1/2
const ModelParams kTasep(Rational(0));      // p = 0, tau = 0

PeriodicProfile<Rational> profile_of(std::initializer_list<Rational> v) {
  return PeriodicProfile<Rational>(std::vector<Rational>(v));
}

// Reference evaluation of one series term by plain summation over all node
// tuples, using the literal library formulas (base_integrand and the closed
// factor for the profile).  Deterministic initial data goes through explicit
// subset enumeration, independent of the engine's chain evaluator.
Complex direct_series_term(const EvalRequest& req, int k,
                           const ContourSpec& spec) {
  const auto prc = req.params.as<Complex>();
  const auto prd = req.params.as<double>();
  const double pref = series_prefactor<double>(req.l, k, prd);
  if (pref == 0.0) return Complex(0.0);
  const auto nodes = contour_nodes(spec);
  const int m = spec.points;

  std::vector<int> idx(k, 0);
  Complex total = 0.0;
  while (true) {
    std::vector<Complex> xs;
    Complex wprod = 1.0;
    for (int i = 0; i < k; ++i) {
      xs.push_back(nodes[idx[i]].node);
      wprod *= nodes[idx[i]].weight;
    }
    const XiVector<Complex> xi(xs);
    Complex weight;
    if (const auto* p = std::get_if<PeriodicInit>(&req.initial)) {
      weight = periodic_factor(xi, p->profile.cast<Complex>(), prc);
    } else if (const auto* g = std::get_if<GeneralInit>(&req.initial)) {
      weight = truncated_general_factor(xi, g->profile.cast<Complex>(), prc);
    } else {
      const auto& y = std::get<DeterministicInit>(req.initial).y;
      weight = 0.0;
      std::vector<long long> pick;
      // all k-subsets of y
      std::vector<int> c(k);
      for (int i = 0; i < k; ++i) c[i] = i;
      if (y.size() >= k) {
        while (true) {
          pick.clear();
          for (int i = 0; i < k; ++i) pick.push_back(y.sites()[c[i]]);
          weight += deterministic_factor(xi, SiteSet(pick), y, prc);
          int i = k - 1;
          while (i >= 0 && c[i] == y.size() - k + i) --i;
          if (i < 0) break;
          ++c[i];
          for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
        }
      }
    }
    total += wprod * base_integrand(req.x, xi, req.t, prc) * weight;

    int d = k - 1;
    while (d >= 0 && idx[d] == m - 1) idx[d--] = 0;
    if (d < 0) break;
    ++idx[d];
  }
  return pref * total;
}

}  // namespace

TEST_CASE("contour nodes reproduce monomial integrals") {
  const auto nodes = contour_nodes(ContourSpec{1.7, 16});
  for (long long n = -16; n <= 14; ++n) {
    Complex sum = 0.0;
    for (const auto& nd : nodes) sum += nd.weight * pow_int(nd.node, n);
    const double expected =
        (n + 1) % 16 == 0 ? std::pow(1.7, static_cast<double>(n + 1)) : 0.0;
    // Rounding scale: the summands have magnitude R^{n+1}.
    const double scale = std::max(1.0, std::pow(1.7, static_cast<double>(n + 1)));
    INFO("n=" << n);
    CHECK(std::abs(sum - Complex(expected)) <= 1e-14 * scale);
  }
  // Aliasing example: M=8, R=2, n=7 -> R^8.
  const auto nodes8 = contour_nodes(ContourSpec{2.0, 8});
  Complex sum = 0.0;
  for (const auto& nd : nodes8) sum += nd.weight * pow_int(nd.node, 7);
  CHECK(std::abs(sum - Complex(256.0)) <= 1e-12 * 256.0);
  CHECK_THROWS_AS(contour_nodes(ContourSpec{2.0, 4}), DomainError);
}

TEST_CASE("choose_radius") {
  CHECK(choose_radius(Params<double>{0.0, 1.0, 0.0}) == Catch::Approx(1.1));
  CHECK(choose_radius(Params<double>{0.5, 0.5, 1.0}) ==
        Catch::Approx(1.1 * (1.0 + std::sqrt(2.0))));
  const double r = choose_radius(Params<double>{2.0 / 3, 1.0 / 3, 2.0});
  CHECK(r == Catch::Approx(1.1 * (1.0 + std::sqrt(1.0 + 8.0 / 9)) * 1.5));
  CHECK_THROWS_AS(
      check_contour(ContourSpec{1.0, 16}, Params<double>{0.0, 1.0, 0.0}),
      DomainError);
}

TEST_CASE("engine matches direct library summation") {
  const ContourSpec spec{2.1, 12};
  // periodic, k = 1 and 2
  {
    EvalRequest req{.l = 1,
                    .x = 1,
                    .t = 0.7,
                    .initial = PeriodicInit{profile_of(
                        {Rational(1, 3), Rational(1, 2), Rational(1, 4)})},
                    .params = kThird};
    for (int k = 1; k <= 3; ++k) {
      const Complex engine = series_term(req, k, spec);
      const Complex direct = direct_series_term(req, k, spec);
      INFO("periodic k=" << k);
      CHECK(std::abs(engine - direct) <=
            1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
  // general profile
  {
    EvalRequest req{.l = 1,
                    .x = -1,
                    .t = 0.4,
                    .initial = GeneralInit{GeneralProfile<Rational>(
                        std::vector<Rational>{Rational(1, 2), Rational(0),
                                              Rational(3, 4), Rational(1, 4)})},
                    .params = kThird};
    for (int k = 1; k <= 2; ++k) {
      const Complex engine = series_term(req, k, spec);
      const Complex direct = direct_series_term(req, k, spec);
      INFO("general k=" << k);
      CHECK(std::abs(engine - direct) <=
            1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
  // deterministic Y: engine chain vs direct subset enumeration
  {
    EvalRequest req{.l = 2,
                    .x = 2,
                    .t = 0.5,
                    .initial = DeterministicInit{SiteSet(
                        std::vector<long long>{2, 4, 6, 8})},
                    .params = kThird};
    for (int k = 2; k <= 4; ++k) {
      const Complex engine = series_term(req, k, spec);
      const Complex direct = direct_series_term(req, k, spec);
      INFO("deterministic k=" << k);
      CHECK(std::abs(engine - direct) <=
            1e-12 * std::max(1.0, std::abs(direct)));
    }
    // k beyond |Y| vanishes identically.
    CHECK(series_term(req, 5, spec) == Complex(0.0));
  }
}

TEST_CASE("series terms beyond l vanish at tau = 0") {
  EvalRequest req{.l = 1,
                  .x = 0,
                  .t = 1.0,
                  .initial = PeriodicInit{profile_of({Rational(1, 2)})},
                  .params = kTasep};
  CHECK(series_term(req, 2, ContourSpec{1.1, 24}) == Complex(0.0));
  CHECK(series_term(req, 3, ContourSpec{1.1, 24}) == Complex(0.0));
}

TEST_CASE("single-term Poisson spot checks at tau = 0") {
  // Step initial data: first particle starts at site 1 and jumps left freely.
  EvalRequest req{.l = 1,
                  .x = 0,
                  .t = 1.0,
                  .initial = PeriodicInit{profile_of({Rational(1)})},
                  .params = kTasep};
  for (long long x = -3; x <= 0; ++x) {
    req.x = x;
    const Complex term = series_term(req, 1, ContourSpec{1.1, 512});
    CHECK(std::abs(term.real() - poisson_tail(1.0, 1 - x)) < 1e-8);
    CHECK(std::abs(term.imag()) < 1e-12);
  }
  // Far left: negligible mass.
  req.x = -40;
  CHECK(std::abs(series_term(req, 1, ContourSpec{1.1, 512})) < 1e-12);
}

TEST_CASE("quadrature extracts exact chain coefficients at t = 0") {
  const auto pr = kThird.as<Rational>();
  const auto prof = profile_of({Rational(1, 3), Rational(1, 2)});

  // k = 1: coefficient of xi^{-s} in the weight is rho_s prod_{n<s} phi(1,n).
  {
    const auto nodes = contour_nodes(ContourSpec{2.0, 64});
    for (long long a = 0; a <= 5; ++a) {
      Complex q = 0.0;
      for (const auto& nd : nodes) {
        const XiVector<Complex> xi(std::vector<Complex>{nd.node});
        q += nd.weight * pow_int(nd.node, a) *
             periodic_factor(xi, prof.cast<Complex>(), kThird.as<Complex>());
      }
      Rational coeff = prof.rho(a + 1);
      for (long long n = 1; n <= a; ++n)
        coeff *= 1 - prof.rho(n) + prof.rho(n) * pr.tau;  // phi(1,n), k=1
      CHECK(std::abs(q - Complex(to_scalar<double>(coeff))) < 1e-12);
    }
  }
  // k = 2: joint coefficient of xi_1^{-s_1} xi_2^{-s_2} is the chain weight
  // rho_{s1} rho_{s2} prod_{(0,s1)} phi(1,n) prod_{(s1,s2)} phi(2,n).
  {
    const auto nodes = contour_nodes(ContourSpec{2.0, 32});
    auto chain_coeff = [&](long long s1, long long s2) -> Rational {
      if (!(0 < s1 && s1 < s2)) return Rational(0);
      Rational c = prof.rho(s1) * prof.rho(s2);
      for (long long n = 1; n < s1; ++n)
        c *= 1 - prof.rho(n) + prof.rho(n) * pow_int(pr.tau, 2);
      for (long long n = s1 + 1; n < s2; ++n)
        c *= 1 - prof.rho(n) + prof.rho(n) * pr.tau;
      return c;
    };
    for (auto [a1, a2] : std::vector<std::pair<long long, long long>>{
             {0, 1}, {0, 0}, {1, 3}, {0, 3}}) {
      Complex q = 0.0;
      for (const auto& n1 : nodes)
        for (const auto& n2 : nodes) {
          const XiVector<Complex> xi(std::vector<Complex>{n1.node, n2.node});
          q += n1.weight * n2.weight * pow_int(n1.node, a1) *
               pow_int(n2.node, a2) *
               periodic_factor(xi, prof.cast<Complex>(), kThird.as<Complex>());
        }
      const Rational expected = chain_coeff(a1 + 1, a2 + 1);
      INFO("a1=" << a1 << " a2=" << a2);
      CHECK(std::abs(q - Complex(to_scalar<double>(expected))) < 1e-9);
    }
  }
}

TEST_CASE("closed-form oracle at tau = 0 (geometric-Poisson)") {
  EvalRequest req{.l = 1,
                  .x = 0,
                  .t = 1.0,
                  .initial = PeriodicInit{profile_of({Rational(1, 2)})},
                  .params = kTasep,
                  .tolerance = 1e-8};
  const auto grid = evaluate_cdf_grid(req, -3, 1);
  for (const auto& r : grid) {
    INFO("x=" << r.x);
    CHECK(std::abs(r.value - geometric_poisson_cdf(1.0, 0.5, r.x)) < 1e-6);
    CHECK(r.series_converged);
    CHECK(r.quadrature_converged);
    CHECK(r.imag_residual < 1e-8);
    CHECK(r.tail_estimate == 0.0);  // only the k = 1 term survives
  }
}

TEST_CASE("radius invariance") {
  EvalRequest req{.l = 1,
                  .x = 0,
                  .t = 1.0,
                  .initial = PeriodicInit{profile_of(
                      {Rational(1, 2), Rational(1, 3)})},
                  .params = kThird,
                  .k_max = 3,
                  .tolerance = 1e-7};
  const auto base = evaluate_cdf(req);
  REQUIRE(base.quadrature_converged);
  EvalRequest wide = req;
  wide.radius = 1.15 * choose_radius(kThird.as<double>());
  const auto moved = evaluate_cdf(wide);
  CHECK(std::abs(base.value - moved.value) < 10 * req.tolerance);
}

TEST_CASE("grid sanity: monotone, in range, real") {
  EvalRequest req{.l = 1,
                  .x = 0,
                  .t = 1.0,
                  .initial = PeriodicInit{profile_of(
                      {Rational(1, 2), Rational(1, 3)})},
                  .params = kThird,
                  .k_max = 4,
                  .tolerance = 1e-6};
  const auto grid = evaluate_cdf_grid(req, -4, 4);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(grid[i].value >= -2 * req.tolerance);
    CHECK(grid[i].value <= 1 + 2 * req.tolerance);
    CHECK(grid[i].imag_residual < req.tolerance);
    if (i > 0) CHECK(grid[i - 1].value <= grid[i].value + 2 * req.tolerance);
  }
}

TEST_CASE("deterministic initial data at t = 0 reproduces the indicator") {
  EvalRequest req{.l = 1,
                  .x = 0,
                  .t = 0.0,
                  .initial = DeterministicInit{SiteSet(
                      std::vector<long long>{2, 4})},
                  .params = kThird,
                  .tolerance = 1e-8};
  for (int l = 1; l <= 2; ++l) {
    req.l = l;
    const long long y_l = l == 1 ? 2 : 4;
    const auto grid = evaluate_cdf_grid(req, 0, 5);
    for (const auto& r : grid) {
      INFO("l=" << l << " x=" << r.x);
      CHECK(std::abs(r.value - (y_l <= r.x ? 1.0 : 0.0)) < 1e-7);
    }
    // Far right: the event is certain.
    req.x = 10;
    CHECK(std::abs(evaluate_cdf(req).value - 1.0) < 1e-7);
  }
}

TEST_CASE("pmf: telescoping and t = 0 concentration") {
  EvalRequest req{.l = 1,
                  .x = 0,
                  .t = 0.5,
                  .initial = PeriodicInit{profile_of({Rational(1, 2)})},
                  .params = kThird,
                  .k_max = 3,
                  .tolerance = 1e-7};
  double mass = 0.0;
  for (long long x = -4; x <= 4; ++x) {
    req.x = x;
    mass += evaluate_pmf(req).value;
  }
  req.x = 4;
  const double hi = evaluate_cdf(req).value;
  req.x = -5;
  const double lo = evaluate_cdf(req).value;
  CHECK(std::abs(mass - (hi - lo)) < 20 * req.tolerance);

  EvalRequest det{.l = 2,
                  .x = 4,
                  .t = 0.0,
                  .initial = DeterministicInit{SiteSet(
                      std::vector<long long>{2, 4})},
                  .params = kThird,
                  .tolerance = 1e-8};
  CHECK(std::abs(evaluate_pmf(det).value - 1.0) < 1e-7);
  det.x = 3;
  CHECK(std::abs(evaluate_pmf(det).value) < 1e-7);
}

TEST_CASE("one-hot periodic equals truncated deterministic lattice") {
  // rho in {0,1}: the transfer-matrix route restates the deterministic sum.
  EvalRequest periodic{.l = 1,
                       .x = 0,
                       .t = 0.5,
                       .initial = PeriodicInit{profile_of(
                           {Rational(1), Rational(0)})},  // sites 2, 4, 6, ...
                       .params = kThird,
                       .k_max = 3,
                       .tolerance = 1e-7};
  std::vector<long long> lattice;
  for (long long s = 2; s <= 24; s += 2) lattice.push_back(s);
  EvalRequest truncated = periodic;
  truncated.initial = DeterministicInit{SiteSet(lattice)};

  const auto a = evaluate_cdf_grid(periodic, -1, 3);
  const auto b = evaluate_cdf_grid(truncated, -1, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    INFO("x=" << a[i].x);
    CHECK(std::abs(a[i].value - b[i].value) < 1e-6);
  }
}

TEST_CASE("non-convergence is reported through flags") {
  EvalRequest req{.l = 1,
                  .x = 0,
                  .t = 1.0,
                  .initial = PeriodicInit{profile_of(
                      {Rational(1, 2), Rational(1, 3)})},
                  .params = kThird,
                  .k_max = 3,
                  .tolerance = 1e-13,
                  .quad_points = 48,
                  .refine_budget = 3000,
                  .max_refine_rounds = 1};
  const auto r = evaluate_cdf(req);
  CHECK_FALSE(r.quadrature_converged);
}

TEST_CASE("results are thread-count invariant") {
  EvalRequest req{.l = 2,
                  .x = 1,
                  .t = 0.8,
                  .initial = PeriodicInit{profile_of(
                      {Rational(1, 4), Rational(1, 2)})},
                  .params = kThird,
                  .k_max = 4,
                  .tolerance = 1e-6};
  req.threads = 1;
  const auto a = evaluate_cdf(req);
  req.threads = 2;
  const auto b = evaluate_cdf(req);
  CHECK(a.value == b.value);
  CHECK(a.imag_residual == b.imag_residual);
}

TEST_CASE("request validation") {
  EvalRequest req{.l = 0,
                  .x = 0,
                  .t = 0.0,
                  .initial = PeriodicInit{profile_of({Rational(1, 2)})},
                  .params = kThird};
  CHECK_THROWS_AS(evaluate_cdf(req), DomainError);
  req.l = 2;
  req.k_max = 1;
  CHECK_THROWS_AS(evaluate_cdf(req), DomainError);
  req.k_max = 0;
  req.tolerance = 0.0;
  CHECK_THROWS_AS(evaluate_cdf(req), DomainError);
  req.tolerance = 1e-6;
  req.radius = 0.9;  // inside the forbidden ring
  CHECK_THROWS_AS(evaluate_cdf(req), DomainError);
  EvalRequest none{.l = 1, .x = 0, .t = 0.0, .initial = std::monostate{},
                   .params = kThird};
  CHECK_THROWS_AS(evaluate_cdf(none), DomainError);
}
