#include "warpflow/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "detail/spec_string.hpp"
#include "warpflow/error.hpp"

namespace warpflow {

using std::numbers::pi;

DeficitReport make_deficit(std::string name, double lhs, double rhs) {
  DeficitReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.deficit = lhs - rhs;
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  r.relative_deficit = scale > 0.0 ? r.deficit / scale : 0.0;
  return r;
}

bool is_round(const RadialGraph& graph) {
  return std::all_of(graph.u.begin(), graph.u.end(), [&](double x) { return x == graph.u.front(); });
}

namespace {

void require_euclidean(const WarpedSpace& space, const std::string& what) {
  if (space.kind() != SpaceKind::euclidean) {
    throw UnsupportedError(what + " is only defined in the euclidean ambient");
  }
}

void require_space_form(const WarpedSpace& space, const std::string& what) {
  if (!space.is_space_form()) throw UnsupportedError(what + " needs a space-form ambient");
}

std::map<std::string, bool> flags_of(const WarpedSpace& space, const RadialGraph& graph,
                                     const GeometryFields& fields) {
  const auto c = convexity_class(fields, space, graph, fields.n);
  std::map<std::string, bool> f{{"mean_convex", c.mean_convex()},
                                {"k_convex", c.k_convex()},
                                {"convex", c.convex()}};
  if (auto s = c.static_convex()) f["static_convex"] = *s;
  return f;
}

DeficitReport finish(DeficitReport r, const WarpedSpace& space, const RadialGraph& graph,
                     const GeometryFields& fields) {
  r.equality_expected = is_round(graph);
  r.class_flags = flags_of(space, graph, fields);
  return r;
}

}  // namespace

double q_imcf(const QuantityReport& r, double k) {
  const int n = r.n;
  return std::pow(r.area, -(n + k) / n) *
         (r.boundary_momenta.at(k) - k * r.weighted_volumes.at(k) - k / (n + k) * r.gamma_term.at(k));
}

double q_imcf(const WarpedSpace& space, const RadialGraph& graph, double k) {
  return q_imcf(full_report(space, graph, {k}), k);
}

double q_imcf_limit(const WarpedSpace& space, int n, double k) {
  return n / (n + k) * std::pow(space.fiber_area(n), -k / n);
}

DeficitReport deficit_boundary_momentum(const WarpedSpace& space, const RadialGraph& graph, double k) {
  const auto fields = geometry(space, graph);
  const auto r = full_report(space, graph, fields, {k});
  const int n = r.n;
  const double rhs = n / (n + k) * std::pow(space.fiber_area(n), -k / n) * std::pow(r.area, (n + k) / n) +
                     k * r.weighted_volumes.at(k) + k / (n + k) * r.gamma_term.at(k);
  auto d = make_deficit("boundary-momentum", r.boundary_momenta.at(k), rhs);
  d.k = k;
  return finish(std::move(d), space, graph, fields);
}

DeficitReport deficit_divergence(const WarpedSpace& space, const RadialGraph& graph, double k) {
  const auto fields = geometry(space, graph);
  const auto r = full_report(space, graph, fields, {k});
  auto d = make_deficit("divergence", r.boundary_momenta.at(k),
                        (r.n + k) * r.weighted_volumes.at(k) + r.gamma_term.at(k));
  d.k = k;
  return finish(std::move(d), space, graph, fields);
}

DeficitReport deficit_weinstock_iso(const WarpedSpace& space, const RadialGraph& graph) {
  require_euclidean(space, "weinstock");
  const auto fields = geometry(space, graph);
  const auto r = full_report(space, graph, fields, {1.0, 2.0});
  const int n = r.n;
  const double omega = sphere_area(n);
  const double b = omega / (n + 1);
  const double m1 = r.boundary_momenta.at(1.0), m2 = r.boundary_momenta.at(2.0);
  auto d = make_deficit("weinstock", m2,
                        std::pow(b, -2.0 / (n + 1)) * r.area * std::pow(r.volume, 2.0 / (n + 1)));
  d.auxiliary.push_back(make_deficit("holder", r.area * m2, m1 * m1));
  d.auxiliary.push_back(make_deficit(
      "young",
      r.volume + static_cast<double>(n) / (n + 1) * std::pow(omega, -1.0 / n) *
                     std::pow(r.area, (n + 1.0) / n),
      std::pow((n + 1) * r.volume, 1.0 / (n + 1)) * r.area * std::pow(omega, -1.0 / (n + 1))));
  d.auxiliary.push_back(make_deficit(
      "first-momentum", m1,
      static_cast<double>(n) / (n + 1) * std::pow(omega, -1.0 / n) * std::pow(r.area, (n + 1.0) / n) + r.volume));
  return finish(std::move(d), space, graph, fields);
}

double q_k_euclidean(const QuantityReport& r, int k) {
  const int n = r.n;
  const double wk = r.W.at(k);
  if (!(wk > 0.0)) throw DomainError("q_k requires W_k > 0, got " + detail::format_double(wk));
  const double p = static_cast<double>(n + 2 - k) / (n + 1 - k);
  return std::pow(wk, -p) * (r.phi_curvature_integrals.at(k) + k * r.W.at(k - 1));
}

double q_k_euclidean(const WarpedSpace& space, const RadialGraph& graph, int k) {
  require_euclidean(space, "Q_k");
  if (k < 1 || k > graph.grid.dim()) throw DomainError("Q_k: k must lie in 1..n");
  return q_k_euclidean(full_report(space, graph, {}), k);
}

double q_k_euclidean_limit(int n, int k) {
  const double omega = sphere_area(n);
  const double p = static_cast<double>(n + 2 - k) / (n + 1 - k);
  return (n + 2.0 + k) / (2.0 * (n + 2 - k)) * omega * std::pow((n + 1.0 - k) / omega, p);
}

DeficitReport deficit_phi_quermass_euclidean(const WarpedSpace& space, const RadialGraph& graph, int k) {
  require_euclidean(space, "phi-quermass");
  const int n = graph.grid.dim();
  if (k < 1 || k > n) throw DomainError("phi-quermass: k must lie in 1..n");
  const auto fields = geometry(space, graph);
  const auto r = full_report(space, graph, fields, {});
  const double wk = r.W.at(k);
  if (!(wk > 0.0)) throw DomainError("phi-quermass requires W_k > 0");
  const double p = static_cast<double>(n + 2 - k) / (n + 1 - k);
  auto d = make_deficit("phi-quermass", r.phi_curvature_integrals[k] + k * r.W[k - 1],
                        q_k_euclidean_limit(n, k) * std::pow(wk, p));
  d.k = k;
  return finish(std::move(d), space, graph, fields);
}

double minkowski_residual(const WarpedSpace& space, const GeometryFields& f, int k) {
  require_space_form(space, "minkowski");
  if (k < 1 || k > f.n) throw DomainError("minkowski: k must lie in 1..n");
  std::vector<double> a(f.nodes), b(f.nodes);
  for (std::size_t i = 0; i < f.nodes; ++i) {
    a[i] = f.dlambda[i] * f.E_at(i, k - 1);
    b[i] = f.support[i] * f.E_at(i, k);
  }
  const double lhs = surface_integral(f, a), rhs = surface_integral(f, b);
  const double denom = std::abs(lhs) + std::abs(rhs);
  return denom > 0.0 ? std::abs(lhs - rhs) / denom : 0.0;
}

DeficitReport kwong_miao_deficit(const WarpedSpace& space, const RadialGraph& graph, int k) {
  require_euclidean(space, "kwong-miao");
  const int n = graph.grid.dim();
  if (k < 1 || k > n) throw DomainError("kwong-miao: k must lie in 1..n");
  const auto fields = geometry(space, graph);
  const auto r = full_report(space, graph, fields, {});
  auto d = make_deficit("kwong-miao", r.phi_curvature_integrals[k], (n + 2.0 - k) / 2.0 * r.W[k - 1]);
  d.k = k;
  return finish(std::move(d), space, graph, fields);
}

// ---------------------------------------------------------------------------
// Geodesic balls

namespace {

void check_ball(const WarpedSpace& space, int n, double r) {
  require_space_form(space, "ball reference functions");
  if (n < 1) throw DomainError("ball reference functions need n >= 1");
  if (!(r > 0.0)) throw DomainError("ball radius must be positive");
  if (space.kind() == SpaceKind::sphere && !(r < pi)) {
    throw DomainError("ball radius must be below pi in the sphere");
  }
}

// Integral of lambda^n from 0 to r in closed form.
double ball_volume_integral(const WarpedSpace& space, int n, double r) {
  if (space.kind() == SpaceKind::euclidean) return std::pow(r, n + 1) / (n + 1);
  const bool hyp = space.kind() == SpaceKind::hyperbolic;
  const double s = hyp ? std::sinh(r) : std::sin(r);
  const double c = hyp ? std::cosh(r) : std::cos(r);
  // I_m = s^{m-1} c / m -+ (m-1)/m I_{m-2}
  double prev = r;                    // I_0
  double cur = hyp ? c - 1.0 : 1.0 - c;  // I_1
  if (n == 0) return prev;
  for (int m = 2; m <= n; ++m) {
    const double next = hyp ? std::pow(s, m - 1) * c / m - (m - 1.0) / m * prev
                            : -std::pow(s, m - 1) * c / m + (m - 1.0) / m * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

}  // namespace

double ball_xi(const WarpedSpace& space, int n, int k, double r) {
  check_ball(space, n, r);
  if (k < 0 || k > n) throw DomainError("ball_xi: k must lie in 0..n");
  const auto w = space.warp(r);
  return sphere_area(n) * space.potential(r) * std::pow(w.lambda, n - k) * std::pow(w.dlambda, k);
}

double ball_chi(const WarpedSpace& space, int n, int l, double r) {
  check_ball(space, n, r);
  if (l < 0 || l > n + 1) throw DomainError("ball_chi: l must lie in 0..n+1");
  const double omega = sphere_area(n);
  const double K = *space.curvature();
  const auto w = space.warp(r);
  std::vector<double> W(n + 2);
  W[0] = omega * ball_volume_integral(space, n, r);
  W[1] = omega * std::pow(w.lambda, n) / n;
  for (int j = 1; j <= n - 1; ++j) {
    const double curv = omega * std::pow(w.lambda, n - j) * std::pow(w.dlambda, j);
    W[j + 1] = (curv + j * K * W[j - 1]) / (n - j);
  }
  W[n + 1] = omega / (n + 1);
  return W[l];
}

double ball_chi_monotone_limit(const WarpedSpace& space, int n, int l) {
  (void)n;
  require_space_form(space, "ball reference functions");
  if (space.kind() != SpaceKind::sphere) return std::numeric_limits<double>::infinity();
  // d chi_l / dr = omega_n lambda^{n-l} lambda'^l changes sign at pi/2 for odd l.
  return l % 2 == 0 ? pi : pi / 2;
}

double ball_chi_inverse(const WarpedSpace& space, int n, int l, double w) {
  require_space_form(space, "ball reference functions");
  if (l < 0 || l > n) throw DomainError("ball_chi_inverse: l must lie in 0..n");
  double lo = 1e-8;
  double hi;
  if (space.kind() == SpaceKind::sphere) {
    hi = std::min(ball_chi_monotone_limit(space, n, l), std::nextafter(pi, 0.0));
  } else {
    hi = 1.0;
    while (ball_chi(space, n, l, hi) < w) {
      hi *= 2.0;
      if (hi > 1e6) throw DomainError("ball_chi_inverse: value " + detail::format_double(w) + " out of range");
    }
  }
  const double flo = ball_chi(space, n, l, lo), fhi = ball_chi(space, n, l, hi);
  if (!(w >= flo && w <= fhi)) {
    throw DomainError("ball_chi_inverse: value " + detail::format_double(w) + " outside [" +
                      detail::format_double(flo) + ", " + detail::format_double(fhi) + "]");
  }
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (ball_chi(space, n, l, mid) < w) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

DeficitReport reference_deficit(std::string name, const WarpedSpace& space, const RadialGraph& graph,
                                 int k, int l) {
  const int n = graph.grid.dim();
  const auto fields = geometry(space, graph);
  const auto r = full_report(space, graph, fields, {});
  const double radius = ball_chi_inverse(space, n, l, r.W.at(l));
  const double rhs = ball_xi(space, n, k, radius) + k * ball_chi(space, n, k - 1, radius);
  auto d = make_deficit(std::move(name), r.phi_curvature_integrals[k] + k * r.W[k - 1], rhs);
  d.k = k;
  d.ell = l;
  return finish(std::move(d), space, graph, fields);
}

}  // namespace

DeficitReport deficit_hyperbolic_ref(const WarpedSpace& space, const RadialGraph& graph, int k, int l) {
  if (space.kind() != SpaceKind::hyperbolic) throw UnsupportedError("hyperbolic-ref needs the hyperbolic ambient");
  const int n = graph.grid.dim();
  if (k < 1 || k > n) throw DomainError("hyperbolic-ref: k must lie in 1..n");
  if (l < 0 || l > k) throw DomainError("hyperbolic-ref: l must lie in 0..k");
  return reference_deficit("hyperbolic-ref", space, graph, k, l);
}

DeficitReport deficit_sphere_ref(const WarpedSpace& space, const RadialGraph& graph, int l) {
  if (space.kind() != SpaceKind::sphere) throw UnsupportedError("sphere-ref needs the sphere ambient");
  const int n = graph.grid.dim();
  if (l < 0 || l > n) throw DomainError("sphere-ref: l must lie in 0..n");
  return reference_deficit("sphere-ref", space, graph, n, l);
}

DeficitReport curve_kwww_deficit(const WarpedSpace& space, const RadialGraph& graph) {
  require_space_form(space, "curve inequality");
  if (graph.grid.dim() != 1) throw DomainError("curve inequality needs n = 1");
  const auto fields = geometry(space, graph);
  for (std::size_t i = 0; i < fields.nodes; ++i) {
    if (!(fields.kappa_at(i, 0) > 0.0)) {
      throw DomainError("curve inequality needs a convex curve; kappa = " +
                        detail::format_double(fields.kappa_at(i, 0)) + " at node " + std::to_string(i));
    }
  }
  const auto r = full_report(space, graph, fields, {});
  auto d = make_deficit("curve", r.phi_curvature_integrals[1],
                        (r.area * r.area - 2 * pi * r.volume) / (2 * pi));
  d.k = 1;
  return finish(std::move(d), space, graph, fields);
}

double newton_maclaurin_margin(const GeometryFields& f, int k) {
  if (k < 1 || k > f.n) throw DomainError("newton-maclaurin: k must lie in 1..n");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.nodes; ++i) {
    const double next = k < f.n ? f.E_at(i, k + 1) : 0.0;
    m = std::min(m, f.E_at(i, k) * f.E_at(i, k) - next * f.E_at(i, k - 1));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Monotone quantities

namespace {

std::string order_tag(double k) { return "k" + detail::format_double(k); }

// Volume, area and curvature integrals needed by the trackers.
struct Pieces {
  double area = 0.0;
  std::vector<double> W;
  std::vector<double> phi;
};

Pieces pieces(const WarpedSpace& space, const RadialGraph& graph, const GeometryFields& f) {
  Pieces p;
  const auto q = quermassintegrals(space, graph, f);
  p.W = q.W;
  p.area = f.n * p.W[1];
  for (int k = 0; k <= f.n; ++k) {
    std::vector<double> integrand(f.nodes);
    for (std::size_t i = 0; i < f.nodes; ++i) integrand[i] = f.potential[i] * f.E_at(i, k);
    p.phi.push_back(surface_integral(f, integrand));
  }
  return p;
}

}  // namespace

MonotoneTracker make_monotone_tracker(const FlowSpec& spec, const WarpedSpace& space,
                                      std::vector<double> imcf_orders) {
  (void)space;
  if (imcf_orders.empty()) imcf_orders = {static_cast<double>(spec.k)};
  const int nm_k = spec.kind == FlowKind::imcf ? 1 : spec.k;
  return [spec, imcf_orders, nm_k](const WarpedSpace& sp, const RadialGraph& graph,
                                   const GeometryFields& f) {
    std::vector<MonotoneSample> out;
    const int n = f.n;
    const int k = spec.k;
    switch (spec.kind) {
      case FlowKind::imcf: {
        std::vector<double> integrand(f.nodes);
        const double area = surface_integral(f, std::vector<double>(f.nodes, 1.0));
        const double lambda_a = sp.lambda(sp.inner_radius());
        const double gamma = std::pow(lambda_a, n) * sp.fiber_area(n);
        for (double q : imcf_orders) {
          for (std::size_t i = 0; i < f.nodes; ++i) integrand[i] = std::pow(f.lambda[i], q);
          const double mom = surface_integral(f, integrand);
          const double wv = weighted_volume(sp, graph, q);
          const double gt = lambda_a > 0.0 ? std::pow(lambda_a, q) * gamma : 0.0;
          const double value = std::pow(area, -(n + q) / n) * (mom - q * wv - q / (n + q) * gt);
          out.push_back({"Q_imcf_" + order_tag(q), -1, value});
        }
        break;
      }
      case FlowKind::euclidean_inverse: {
        const auto p = pieces(sp, graph, f);
        const double e = static_cast<double>(n + 2 - k) / (n + 1 - k);
        out.push_back({"Qk_euclid_" + order_tag(k), -1, std::pow(p.W[k], -e) * (p.phi[k] + k * p.W[k - 1])});
        break;
      }
      case FlowKind::hyperbolic_sx: {
        const auto p = pieces(sp, graph, f);
        out.push_back({"monotone_hyp_" + order_tag(k), -1, p.phi[k] + k * p.W[k - 1]});
        for (int l = 0; l <= k; ++l) out.push_back({"monotone_hyp_W" + std::to_string(l), 1, p.W[l]});
        break;
      }
      case FlowKind::sphere_bgl: {
        const auto p = pieces(sp, graph, f);
        out.push_back({"monotone_sph_" + order_tag(n), -1, p.phi[n] + n * p.W[n - 1]});
        break;
      }
    }
    out.push_back({"newton_maclaurin_" + order_tag(nm_k), 0, newton_maclaurin_margin(f, nm_k)});
    return out;
  };
}

bool MonotoneSeries::monotone(double eps) const {
  for (std::size_t q = 0; q < worst_wrong_way.size(); ++q) {
    if (directions[q] != 0 && worst_wrong_way[q] > eps) return false;
  }
  return true;
}

MonotoneSeries monotone_series(const WarpedSpace& space, const FlowTrace& trace) {
  MonotoneSeries s;
  MonotoneTracker tracker;
  for (const auto& sample : trace.samples) {
    std::vector<MonotoneSample> values = sample.monotone;
    if (values.empty()) {
      if (!tracker) {
        tracker = make_monotone_tracker(trace.spec, space, trace.spec.momentum_orders);
      }
      values = tracker(space, sample.graph, geometry(space, sample.graph));
    }
    if (s.names.empty()) {
      for (const auto& v : values) {
        s.names.push_back(v.name);
        s.directions.push_back(v.direction);
      }
      s.worst_wrong_way.assign(values.size(), 0.0);
    }
    if (values.size() != s.names.size()) throw DomainError("monotone_series: inconsistent samples");
    std::vector<double> row;
    for (const auto& v : values) row.push_back(v.value);
    if (!s.values.empty()) {
      const auto& prev = s.values.back();
      for (std::size_t q = 0; q < row.size(); ++q) {
        const double delta = (row[q] - prev[q]) * s.directions[q];
        if (delta < 0.0 && prev[q] != 0.0) {
          s.worst_wrong_way[q] = std::max(s.worst_wrong_way[q], -delta / std::abs(prev[q]));
        }
      }
    }
    s.values.push_back(std::move(row));
  }
  return s;
}

nlohmann::json to_json(const DeficitReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["k"] = r.k ? nlohmann::json(*r.k) : nlohmann::json(nullptr);
  j["ell"] = r.ell ? nlohmann::json(*r.ell) : nlohmann::json(nullptr);
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["deficit"] = r.deficit;
  j["relative_deficit"] = r.relative_deficit;
  j["equality_expected"] = r.equality_expected;
  j["class_flags"] = r.class_flags;
  if (!r.auxiliary.empty()) {
    j["auxiliary"] = nlohmann::json::array();
    for (const auto& a : r.auxiliary) j["auxiliary"].push_back(to_json(a));
  }
  return j;
}

}  // namespace warpflow
