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
// Numerical evaluation of P(x_l(t) <= x): trapezoid discretization of the
// circular contours (spectrally accurate for the analytic integrand),
// k-dimensional tensor-product quadrature of the weighted integrand, and the
// truncated series over k with per-term error diagnostics.
//
// The node loops are nested with the LAST integration variable outermost, so
// the suffix products xi_i...xi_k and the right-to-left transfer-matrix
// product extend incrementally.  Pair factors f(xi_a, xi_b) come from a
// per-grid table and are folded in through running row products.  Partial
// sums are kept per outer node and reduced in fixed node order with
// compensated summation, so results are bit-reproducible for a given
// configuration regardless of the thread count.

#ifndef ASEPDIST_QUADRATURE_HPP
#define ASEPDIST_QUADRATURE_HPP

#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

#include "asepdist/kernel.hpp"
#include "asepdist/scalar.hpp"

namespace asepdist {

struct ContourSpec {
  double radius = 0.0;
  int points = 0;
};

struct ContourNode {
  Complex node;
  Complex weight;
};

// Nodes xi_j = R e^{2 pi i j / M} with weights xi_j / M, so that
// sum_j w_j g(xi_j) approximates the circle integral of g carrying the
// 1/(2 pi i) factor.  Exact on monomials: sum_j w_j xi_j^n = R^{n+1} [M|n+1].
inline std::vector<ContourNode> contour_nodes(const ContourSpec& spec) {
  if (spec.points < 8) throw DomainError("contour_nodes: need M >= 8");
  if (!(spec.radius > 0)) throw DomainError("contour_nodes: need R > 0");
  std::vector<ContourNode> nodes(spec.points);
  const double step = 2.0 * std::numbers::pi / spec.points;
  for (int j = 0; j < spec.points; ++j) {
    Complex xi = std::polar(spec.radius, step * j);
    nodes[j] = ContourNode{xi, xi / static_cast<double>(spec.points)};
  }
  return nodes;
}

// R = 1.1 * max(1, tau, (1 + sqrt(1 + 4pq)) / (2q)).  The third candidate is
// the positive root of qR^2 - R - p = 0, so every pair-factor denominator
// satisfies |p + q xi_i xi_j - xi_i| >= qR^2 - R - p > 0 on |xi| = R, and
// R > max(1, tau) keeps |xi_i...xi_k|^m above |prod_n phi(i,n)|, clear of the
// transfer-matrix resonance.
inline double choose_radius(const Params<double>& pr) {
  const double root = (1.0 + std::sqrt(1.0 + 4.0 * pr.p * pr.q)) / (2.0 * pr.q);
  return 1.1 * std::max({1.0, pr.tau, root});
}

inline void check_contour(const ContourSpec& spec, const Params<double>& pr) {
  if (spec.points < 8) throw DomainError("contour: need M >= 8");
  if (!(spec.radius > 1.0 && spec.radius > pr.tau))
    throw DomainError("contour: radius must exceed max(1, tau)");
  if (!(pr.q * spec.radius * spec.radius - spec.radius - pr.p > 0))
    throw DomainError("contour: radius inside the pair-factor pole ring");
}

struct PeriodicInit {
  PeriodicProfile<Rational> profile;
};
struct GeneralInit {
  GeneralProfile<Rational> profile;
};
struct DeterministicInit {
  SiteSet y;
};
// monostate = "not provided"; evaluators reject it.
using InitialData =
    std::variant<std::monostate, PeriodicInit, GeneralInit, DeterministicInit>;

struct EvalRequest {
  int l = 1;
  long long x = 0;
  double t = 0.0;
  InitialData initial;
  ModelParams params;
  int k_max = 0;          // 0 -> l + 4
  double tolerance = 1e-6;
  int quad_points = 48;   // M0; per-term schedule M_k = max(min_points, M0 >> (k-l))
  int min_points = 24;
  double radius = 0.0;    // 0 -> choose_radius
  long long refine_budget = 50'000'000;  // node-tuple cap for a refinement pass
  int max_refine_rounds = 6;
  int threads = 0;        // 0 -> ASEPDIST_THREADS or hardware concurrency
};

struct TermDiagnostics {
  int k = 0;
  Complex value;
  double quad_error = 0.0;  // last observed change under grid doubling/halving
  int points = 0;
  bool refined = false;     // quad_error met its per-term target
};

struct CdfResult {
  long long x = 0;
  double value = 0.0;          // Re of the accumulated series; never clamped
  double imag_residual = 0.0;
  double tail_estimate = 0.0;  // |last series term|
  bool series_converged = false;
  bool quadrature_converged = false;
  std::vector<TermDiagnostics> terms;
};

namespace detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* s = std::getenv("ASEPDIST_THREADS")) {
    const int v = std::atoi(s);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct NodeBundle {
  std::vector<Complex> xi;    // nodes
  std::vector<Complex> wfac;  // (xi/M) e^{eps(xi) t} / (1 - xi)
  std::vector<Complex> inv;   // 1/xi
  std::vector<Complex> pair;  // f(xi_a, xi_b), row-major; built on demand
  std::vector<Complex> pows;  // profile power table; built on demand
};

inline NodeBundle make_node_bundle(const ContourSpec& spec, double t,
                                   const Params<double>& pr) {
  NodeBundle b;
  const auto nodes = contour_nodes(spec);
  b.xi.resize(nodes.size());
  b.wfac.resize(nodes.size());
  b.inv.resize(nodes.size());
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const Complex xi = nodes[j].node;
    const Complex eps = pr.p / xi + pr.q * xi - 1.0;
    b.xi[j] = xi;
    b.wfac[j] = nodes[j].weight * std::exp(eps * t) / (1.0 - xi);
    b.inv[j] = 1.0 / xi;
  }
  return b;
}

inline void build_pair_table(NodeBundle& b, const Params<double>& pr) {
  if (!b.pair.empty()) return;
  const int n = static_cast<int>(b.xi.size());
  b.pair.resize(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c) {
      const Complex denom = pr.p + pr.q * b.xi[a] * b.xi[c] - b.xi[a];
      if (denom == Complex(0.0, 0.0))
        throw PoleError("quadrature: pair-factor pole on the contour");
      b.pair[static_cast<std::size_t>(a) * n + c] = (b.xi[c] - b.xi[a]) / denom;
    }
}

// Transfer-matrix weight of an m-periodic profile, for one term order k.
// The phi range products depend only on (i, mu, nu) and are real, so a stage
// reduces to two small real-coefficient dot products and one complex
// division per node.
class PeriodicWeight {
 public:
  static constexpr int kMaxPeriod = 64;

  PeriodicWeight(const PeriodicProfile<double>& rho, int k,
                 const Params<double>& pr)
      : k_(k), m_(rho.period()) {
    if (m_ > kMaxPeriod)
      throw ResourceError("quadrature: profile period > 64 unsupported");
    rho_.resize(m_);
    for (int nu = 0; nu < m_; ++nu) rho_[nu] = rho.at_residue(nu);
    phi_all_.assign(k_ + 1, 1.0);
    upper_.assign(static_cast<std::size_t>(k_ + 1) * m_ * m_, 0.0);
    lower_.assign(static_cast<std::size_t>(k_ + 1) * m_ * m_, 0.0);
    for (int i = 1; i <= k_; ++i) {
      std::vector<double> phi(2 * m_);
      for (int n = 1; n <= 2 * m_ - 1; ++n)
        phi[n] = gap_weight<double>(i, n, k_, rho, pr);
      double all = 1.0;
      for (int n = 1; n <= m_; ++n) all *= phi[n];
      phi_all_[i] = all;
      for (int mu = 0; mu < m_; ++mu)
        for (int nu = 0; nu < m_; ++nu) {
          double range = 1.0;
          if (mu < nu) {
            for (int n = mu + 1; n <= nu - 1; ++n) range *= phi[n];
            upper_[idx(i, mu, nu)] = range;
          } else {
            for (int n = mu + 1; n <= nu + m_ - 1; ++n) range *= phi[n];
            lower_[idx(i, mu, nu)] = range;
          }
        }
    }
  }

  int state_size() const { return m_; }
  int power_count() const { return m_; }

  // pows[j * m + nu] = xi_j^{-nu}
  static void fill_node_powers(int m, const NodeBundle& b,
                               std::vector<Complex>& pows) {
    const int n_nodes = static_cast<int>(b.xi.size());
    pows.resize(static_cast<std::size_t>(n_nodes) * m);
    for (int j = 0; j < n_nodes; ++j) {
      Complex p = 1.0;
      for (int nu = 0; nu < m; ++nu) {
        pows[static_cast<std::size_t>(j) * m + nu] = p;
        p *= b.inv[j];
      }
    }
  }

  void init_state(Complex* v) const {
    for (int nu = 0; nu < m_; ++nu) v[nu] = 1.0;
  }

  void stage(int i, Complex pi, const Complex* node_pows, const Complex* v_in,
             Complex* v_out) const {
    Complex g[kMaxPeriod];
    for (int nu = 0; nu < m_; ++nu) g[nu] = node_pows[nu] * rho_[nu] * v_in[nu];
    const Complex pi_m = pow_int(pi, static_cast<long long>(m_));
    const Complex inv_d = 1.0 / (pi_m - phi_all_[i]);
    for (int mu = 0; mu < m_; ++mu) {
      Complex hi = 0.0, lo = 0.0;
      for (int nu = mu + 1; nu < m_; ++nu) hi += upper_[idx(i, mu, nu)] * g[nu];
      for (int nu = 0; nu <= mu; ++nu) lo += lower_[idx(i, mu, nu)] * g[nu];
      v_out[mu] = (pi_m * hi + lo) * inv_d;
    }
  }

  Complex first_row(Complex pi, const Complex* node_pows,
                    const Complex* v_in) const {
    Complex hi = 0.0;
    for (int nu = 1; nu < m_; ++nu)
      hi += upper_[idx(1, 0, nu)] * (node_pows[nu] * rho_[nu] * v_in[nu]);
    const Complex lo = lower_[idx(1, 0, 0)] * (rho_[0] * v_in[0]);
    const Complex pi_m = pow_int(pi, static_cast<long long>(m_));
    return (pi_m * hi + lo) / (pi_m - phi_all_[1]);
  }

 private:
  std::size_t idx(int i, int mu, int nu) const {
    return (static_cast<std::size_t>(i) * m_ + mu) * m_ + nu;
  }
  int k_, m_;
  std::vector<double> rho_;
  std::vector<double> phi_all_;
  std::vector<double> upper_, lower_;
};

// Chain weight over the support of a general (or 0/1 deterministic) profile,
// for one term order k.  Sites with rho = 0 contribute unit gap weights, so
// only the support sites y_1 < ... < y_n enter; a stage is the backward
// recurrence
//   v_out[j] = xi_i^{-y_{j+1}} rho_{j+1} v_in[j+1] + phi_i(y_{j+1}) v_out[j+1]
// whose anchor value v_out[0] is the top-row sum.
class ChainWeight {
 public:
  ChainWeight(const std::vector<long long>& sites,
              const std::vector<double>& rho, int k, const Params<double>& pr)
      : k_(k), n_(static_cast<int>(sites.size())), rho_(rho) {
    phi_.assign(static_cast<std::size_t>(k_ + 1) * (n_ + 1), 1.0);
    for (int i = 1; i <= k_; ++i) {
      const double tau_pow = pow_int(pr.tau, static_cast<long long>(k_ - i + 1));
      for (int j = 1; j <= n_; ++j)
        phi_[static_cast<std::size_t>(i) * (n_ + 1) + j] =
            1.0 - rho_[j - 1] + rho_[j - 1] * tau_pow;
    }
  }

  static std::vector<long long> support_sites(const GeneralProfile<double>& g) {
    std::vector<long long> sites;
    for (long long s = 1; s <= g.horizon(); ++s)
      if (g.rho(s) > 0.0) sites.push_back(s);
    return sites;
  }
  static std::vector<double> support_rho(const GeneralProfile<double>& g) {
    std::vector<double> rho;
    for (long long s = 1; s <= g.horizon(); ++s)
      if (g.rho(s) > 0.0) rho.push_back(g.rho(s));
    return rho;
  }

  int state_size() const { return n_ + 1; }
  int power_count() const { return n_ + 1; }

  // pows[j * (n+1) + jj] = xi_j^{-y_jj} for jj >= 1; entry 0 unused.
  static void fill_node_powers(const std::vector<long long>& sites,
                               const NodeBundle& b,
                               std::vector<Complex>& pows) {
    const int n_nodes = static_cast<int>(b.xi.size());
    const int n = static_cast<int>(sites.size());
    pows.assign(static_cast<std::size_t>(n_nodes) * (n + 1), Complex(0.0));
    for (int j = 0; j < n_nodes; ++j) {
      Complex p = 1.0;
      long long done = 0;
      for (int jj = 1; jj <= n; ++jj) {
        p *= pow_int(b.inv[j], sites[jj - 1] - done);
        done = sites[jj - 1];
        pows[static_cast<std::size_t>(j) * (n + 1) + jj] = p;
      }
    }
  }

  void init_state(Complex* v) const {
    for (int j = 0; j <= n_; ++j) v[j] = 1.0;
  }

  void stage(int i, Complex /*pi*/, const Complex* node_pows,
             const Complex* v_in, Complex* v_out) const {
    const double* phi = &phi_[static_cast<std::size_t>(i) * (n_ + 1)];
    Complex carry = 0.0;
    v_out[n_] = 0.0;
    for (int j = n_ - 1; j >= 0; --j) {
      carry = node_pows[j + 1] * rho_[j] * v_in[j + 1] + phi[j + 1] * carry;
      v_out[j] = carry;
    }
  }

  Complex first_row(Complex /*pi*/, const Complex* node_pows,
                    const Complex* v_in) const {
    const double* phi = &phi_[static_cast<std::size_t>(1) * (n_ + 1)];
    Complex carry = 0.0;
    for (int j = n_ - 1; j >= 0; --j)
      carry = node_pows[j + 1] * rho_[j] * v_in[j + 1] + phi[j + 1] * carry;
    return carry;
  }

 private:
  int k_, n_;
  std::vector<double> rho_;
  std::vector<double> phi_;
};

// One tensor-product quadrature pass at fixed term order k and grid size M,
// evaluated simultaneously on the x grid [x_min, x_min + nx).  Returns the
// raw quadrature sums (no series prefactor applied).
template <class W>
class TermSweep {
 public:
  TermSweep(int k, const NodeBundle& bundle, const W& weight, long long x_min,
            int nx)
      : k_(k),
        points_(static_cast<int>(bundle.xi.size())),
        bundle_(bundle),
        weight_(weight),
        x_min_(x_min),
        nx_(nx) {}

  std::vector<Complex> run(int threads) const {
    std::vector<Complex> acc(static_cast<std::size_t>(points_) * nx_,
                             Complex(0.0));
    threads = std::min(threads, points_);
    if (threads <= 1) {
      run_slice(0, points_, acc);
    } else {
      std::vector<std::thread> pool;
      const int chunk = (points_ + threads - 1) / threads;
      for (int t = 0; t < threads; ++t) {
        const int begin = t * chunk;
        const int end = std::min(points_, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(
            [this, begin, end, &acc] { run_slice(begin, end, acc); });
      }
      for (auto& th : pool) th.join();
    }
    // Fixed-order compensated reduction over the outer node index.
    std::vector<Complex> out(nx_, Complex(0.0));
    std::vector<Complex> comp(nx_, Complex(0.0));
    for (int j = 0; j < points_; ++j)
      for (int ix = 0; ix < nx_; ++ix) {
        const Complex y = acc[static_cast<std::size_t>(j) * nx_ + ix] - comp[ix];
        const Complex s = out[ix] + y;
        comp[ix] = (s - out[ix]) - y;
        out[ix] = s;
      }
    return out;
  }

 private:
  struct Workspace {
    std::vector<Complex> state;     // (k+2) x state_size
    std::vector<Complex> rowprod;   // k x points
    std::vector<Complex> pi, wf, pp;
  };

  void run_slice(int j_begin, int j_end, std::vector<Complex>& acc) const {
    const int ss = weight_.state_size();
    Workspace ws;
    ws.state.assign(static_cast<std::size_t>(k_ + 2) * ss, Complex(0.0));
    ws.rowprod.assign(static_cast<std::size_t>(std::max(k_ - 1, 1)) * points_,
                      Complex(0.0));
    ws.pi.assign(k_ + 2, Complex(1.0));
    ws.wf.assign(k_ + 2, Complex(1.0));
    ws.pp.assign(k_ + 2, Complex(1.0));
    weight_.init_state(&ws.state[static_cast<std::size_t>(k_ + 1) * ss]);

    if (k_ == 1) {
      const Complex* v_in = &ws.state[static_cast<std::size_t>(2) * ss];
      for (int j = j_begin; j < j_end; ++j)
        leaf(j, bundle_.xi[j], bundle_.wfac[j], Complex(1.0), v_in,
             &acc[static_cast<std::size_t>(j) * nx_]);
      return;
    }

    const int pc = weight_.power_count();
    for (int j = j_begin; j < j_end; ++j) {
      const Complex pi_d = bundle_.xi[j];
      ws.pi[k_] = pi_d;
      ws.wf[k_] = bundle_.wfac[j];
      ws.pp[k_] = 1.0;
      weight_.stage(k_, pi_d, &bundle_.pows[static_cast<std::size_t>(j) * pc],
                    &ws.state[static_cast<std::size_t>(k_ + 1) * ss],
                    &ws.state[static_cast<std::size_t>(k_) * ss]);
      Complex* row = &ws.rowprod[static_cast<std::size_t>(k_ - 2) * points_];
      for (int a = 0; a < points_; ++a)
        row[a] = bundle_.pair[static_cast<std::size_t>(a) * points_ + j];
      descend(k_ - 1, ws, &acc[static_cast<std::size_t>(j) * nx_]);
    }
  }

  void descend(int depth, Workspace& ws, Complex* acc_row) const {
    const int ss = weight_.state_size();
    const int pc = weight_.power_count();
    const Complex* v_in = &ws.state[static_cast<std::size_t>(depth + 1) * ss];
    Complex* v_out = &ws.state[static_cast<std::size_t>(depth) * ss];
    const Complex* row =
        &ws.rowprod[static_cast<std::size_t>(depth - 1) * points_];

    if (depth == 1) {
      for (int j = 0; j < points_; ++j) {
        const Complex pi_d = bundle_.xi[j] * ws.pi[2];
        const Complex wf = ws.wf[2] * bundle_.wfac[j];
        const Complex pp = ws.pp[2] * row[j];
        leaf(j, pi_d, wf, pp, v_in, acc_row);
      }
      return;
    }

    Complex* next_row =
        &ws.rowprod[static_cast<std::size_t>(depth - 2) * points_];
    for (int j = 0; j < points_; ++j) {
      ws.pi[depth] = bundle_.xi[j] * ws.pi[depth + 1];
      ws.wf[depth] = ws.wf[depth + 1] * bundle_.wfac[j];
      ws.pp[depth] = ws.pp[depth + 1] * row[j];
      weight_.stage(depth, ws.pi[depth],
                    &bundle_.pows[static_cast<std::size_t>(j) * pc], v_in,
                    v_out);
      const Complex* col = &bundle_.pair[static_cast<std::size_t>(j)];
      for (int a = 0; a < points_; ++a)
        next_row[a] =
            row[a] * bundle_.pair[static_cast<std::size_t>(a) * points_ + j];
      (void)col;
      descend(depth - 1, ws, acc_row);
    }
  }

  void leaf(int j, Complex pi_d, Complex wf, Complex pp, const Complex* v_in,
            Complex* acc_row) const {
    const int pc = weight_.power_count();
    const Complex head = weight_.first_row(
        pi_d, &bundle_.pows[static_cast<std::size_t>(j) * pc], v_in);
    const Complex contrib = wf * pp * head;
    Complex px = pow_int(pi_d, x_min_);
    for (int ix = 0; ix < nx_; ++ix) {
      acc_row[ix] += contrib * px;
      px *= pi_d;
    }
  }

  int k_, points_;
  const NodeBundle& bundle_;
  const W& weight_;
  long long x_min_;
  int nx_;
};

}  // namespace detail

// Adaptive evaluator for one request over a contiguous x grid.  All series
// terms share node tables; the x sweep reuses each integrand evaluation for
// every x (the x dependence enters only through (xi_1...xi_k)^x).
class QuadratureEngine {
 public:
  QuadratureEngine(const EvalRequest& req, long long x_min, long long x_max,
                   const std::optional<ContourSpec>& spec = std::nullopt)
      : req_(req),
        pr_(req.params.as<double>()),
        x_min_(x_min),
        nx_(static_cast<int>(x_max - x_min + 1)) {
    if (req_.l < 1) throw DomainError("evaluate: need l >= 1");
    if (x_max < x_min) throw DomainError("evaluate: empty x range");
    k_max_ = req_.k_max > 0 ? req_.k_max : req_.l + 4;
    if (k_max_ < req_.l) throw DomainError("evaluate: k_max < l");
    if (!(req_.tolerance > 0)) throw DomainError("evaluate: tolerance <= 0");
    radius_ = spec && spec->radius > 0
                  ? spec->radius
                  : (req_.radius > 0 ? req_.radius : choose_radius(pr_));
    m0_ = spec && spec->points > 0 ? spec->points : req_.quad_points;
    check_contour(ContourSpec{radius_, std::max(m0_, 8)}, pr_);
    threads_ = detail::resolve_threads(req_.threads);

    if (std::holds_alternative<std::monostate>(req_.initial))
      throw DomainError("evaluate: no initial data in the request");
    if (const auto* p = std::get_if<PeriodicInit>(&req_.initial)) {
      periodic_profile_.emplace(p->profile.cast<double>());
    } else {
      GeneralProfile<double> g = [&] {
        if (const auto* gen = std::get_if<GeneralInit>(&req_.initial))
          return gen->profile.cast<double>();
        const auto& y = std::get<DeterministicInit>(req_.initial).y;
        y_size_ = y.size();
        return GeneralProfile<double>::from_sites(y,
                                                  y.empty() ? 1 : y.max_site());
      }();
      support_sites_ = detail::ChainWeight::support_sites(g);
      support_rho_ = detail::ChainWeight::support_rho(g);
    }
  }

  // Single fixed-grid series term (prefactor included), at x = x_min.
  Complex term(int k, int points) {
    const double pref = series_prefactor<double>(req_.l, k, pr_);
    if (pref == 0.0 || skip_term(k)) return Complex(0.0);
    return quad_sums(k, clamp_points(k, points))[0] * pref;
  }

  std::vector<CdfResult> evaluate_grid() {
    std::vector<std::vector<Complex>> term_values;
    std::vector<std::vector<double>> term_errors;
    std::vector<TermDiagnostics> diag;
    const int n_terms = k_max_ - req_.l + 1;
    const double term_tol = req_.tolerance / (n_terms + 1);

    for (int k = req_.l; k <= k_max_; ++k) {
      const double pref = series_prefactor<double>(req_.l, k, pr_);
      int points = clamp_points(k, schedule_points(k));
      std::vector<Complex> values(nx_, Complex(0.0));
      std::vector<double> errors(nx_, 0.0);
      bool refined = true;

      if (pref != 0.0 && !skip_term(k)) {
        // Grid-halving/doubling changes decay geometrically for the analytic
        // integrand; once two consecutive changes are seen, the error left
        // after the finer grid is bounded by d * rho / (1 - rho) with
        // rho = d/d_prev (Aitken).  The first estimate comes from the cheap
        // embedded half grid.
        values = quad_sums(k, points);
        const auto half = quad_sums(k, std::max(8, points / 2));
        double change = 0.0;
        for (int ix = 0; ix < nx_; ++ix) {
          errors[ix] = std::abs(pref) * std::abs(values[ix] - half[ix]);
          change = std::max(change, errors[ix]);
        }
        double prev_change = -1.0;
        double est = change;
        int rounds = 0;
        while (est >= term_tol && rounds < req_.max_refine_rounds &&
               tuple_count(2 * points, k) <=
                   static_cast<double>(req_.refine_budget) &&
               2 * points <= dim_cap(k)) {
          const auto next = quad_sums(k, 2 * points);
          prev_change = change;
          change = 0.0;
          for (int ix = 0; ix < nx_; ++ix) {
            errors[ix] = std::abs(pref) * std::abs(next[ix] - values[ix]);
            change = std::max(change, errors[ix]);
          }
          values = next;
          points *= 2;
          ++rounds;
          double contraction = 1.0;
          if (prev_change > 0.0 && change < 0.5 * prev_change) {
            const double rho = change / prev_change;
            contraction = rho / (1.0 - rho);
          }
          est = change * contraction;
          for (int ix = 0; ix < nx_; ++ix) errors[ix] *= contraction;
        }
        refined = est < term_tol;
        for (auto& v : values) v *= pref;
      }

      term_values.push_back(std::move(values));
      term_errors.push_back(std::move(errors));
      diag.push_back(TermDiagnostics{k, Complex(0.0), 0.0, points, refined});
    }

    std::vector<CdfResult> out(nx_);
    for (int ix = 0; ix < nx_; ++ix) {
      CdfResult r;
      r.x = x_min_ + ix;
      r.terms = diag;
      Complex sum = 0.0;
      double quad_err = 0.0;
      for (std::size_t tix = 0; tix < term_values.size(); ++tix) {
        sum += term_values[tix][ix];
        quad_err += term_errors[tix][ix];
        r.terms[tix].value = term_values[tix][ix];
        r.terms[tix].quad_error = term_errors[tix][ix];
      }
      r.value = sum.real();
      r.imag_residual = std::abs(sum.imag());
      r.tail_estimate = std::abs(term_values.back()[ix]);
      r.series_converged =
          r.tail_estimate < req_.tolerance * std::max(1.0, std::abs(r.value));
      r.quadrature_converged = quad_err < req_.tolerance;
      out[ix] = r;
    }
    return out;
  }

  double radius() const { return radius_; }

 private:
  bool skip_term(int k) const { return y_size_ >= 0 && k > y_size_; }

  int schedule_points(int k) const {
    return std::max(req_.min_points, m0_ >> (k - req_.l));
  }
  int clamp_points(int k, int points) const {
    return std::min(std::max(points, 8), dim_cap(k));
  }
  int dim_cap(int k) const { return k == 1 ? 4096 : 768; }
  static double tuple_count(int points, int k) {
    return std::pow(static_cast<double>(points), k);
  }

  detail::NodeBundle& bundle_for(int points, bool needs_pairs) {
    auto it = bundles_.find(points);
    if (it == bundles_.end()) {
      it = bundles_
               .emplace(points, detail::make_node_bundle(
                                    ContourSpec{radius_, points}, req_.t, pr_))
               .first;
      auto& b = it->second;
      if (periodic_profile_)
        detail::PeriodicWeight::fill_node_powers(periodic_profile_->period(),
                                                 b, b.pows);
      else
        detail::ChainWeight::fill_node_powers(support_sites_, b, b.pows);
    }
    if (needs_pairs) detail::build_pair_table(it->second, pr_);
    return it->second;
  }

  std::vector<Complex> quad_sums(int k, int points) {
    auto& bundle = bundle_for(points, k >= 2);
    if (periodic_profile_) {
      detail::PeriodicWeight w(*periodic_profile_, k, pr_);
      return detail::TermSweep(k, bundle, w, x_min_, nx_).run(threads_);
    }
    detail::ChainWeight w(support_sites_, support_rho_, k, pr_);
    return detail::TermSweep(k, bundle, w, x_min_, nx_).run(threads_);
  }

  EvalRequest req_;
  Params<double> pr_;
  long long x_min_;
  int nx_;
  int k_max_ = 0;
  double radius_ = 0.0;
  int m0_ = 48;
  int threads_ = 1;
  int y_size_ = -1;  // >= 0 for deterministic Y: terms with k > |Y| vanish
  std::optional<PeriodicProfile<double>> periodic_profile_;
  std::vector<long long> support_sites_;
  std::vector<double> support_rho_;
  std::map<int, detail::NodeBundle> bundles_;
};

// The k-th series term at fixed contour spec (no adaptivity), prefactor
// included.  Exactly zero whenever the prefactor vanishes (tau = 0, k > l) or
// a deterministic Y has fewer than k sites.
inline Complex series_term(const EvalRequest& req, int k,
                           const ContourSpec& spec) {
  if (k < req.l) throw DomainError("series_term: need k >= l");
  QuadratureEngine engine(req, req.x, req.x, spec);
  return engine.term(k, spec.points);
}

inline std::vector<CdfResult> evaluate_cdf_grid(
    const EvalRequest& req, long long x_min, long long x_max,
    const std::optional<ContourSpec>& spec = std::nullopt) {
  QuadratureEngine engine(req, x_min, x_max, spec);
  return engine.evaluate_grid();
}

inline CdfResult evaluate_cdf(const EvalRequest& req,
                              const std::optional<ContourSpec>& spec =
                                  std::nullopt) {
  return evaluate_cdf_grid(req, req.x, req.x, spec).front();
}

// CDF difference P(x_l = x) = F(x) - F(x-1); may be slightly negative within
// tolerance and is reported raw.
inline CdfResult evaluate_pmf(const EvalRequest& req,
                              const std::optional<ContourSpec>& spec =
                                  std::nullopt) {
  const auto pair = evaluate_cdf_grid(req, req.x - 1, req.x, spec);
  const CdfResult& lo = pair[0];
  const CdfResult& hi = pair[1];
  CdfResult r;
  r.x = req.x;
  r.value = hi.value - lo.value;
  r.imag_residual = std::max(lo.imag_residual, hi.imag_residual);
  r.tail_estimate = std::max(lo.tail_estimate, hi.tail_estimate);
  r.series_converged = lo.series_converged && hi.series_converged;
  r.quadrature_converged = lo.quadrature_converged && hi.quadrature_converged;
  r.terms = hi.terms;
  for (std::size_t i = 0; i < r.terms.size(); ++i) {
    r.terms[i].value -= lo.terms[i].value;
    r.terms[i].quad_error += lo.terms[i].quad_error;
  }
  return r;
}

}  // namespace asepdist

#endif  // ASEPDIST_QUADRATURE_HPP
