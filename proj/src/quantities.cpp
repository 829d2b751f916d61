#include "warpflow/quantities.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "detail/spec_string.hpp"
#include "warpflow/error.hpp"
#include "warpflow/parallel.hpp"

namespace warpflow {

double surface_integral(const GeometryFields& fields, std::span<const double> integrand) {
  if (integrand.size() != fields.nodes) throw DomainError("surface_integral: size mismatch");
  std::vector<double> terms(fields.nodes);
  for (std::size_t i = 0; i < fields.nodes; ++i) {
    if (!std::isfinite(integrand[i])) {
      throw DomainError("surface_integral: non-finite integrand at node " + std::to_string(i));
    }
    terms[i] = integrand[i] * fields.area_weight[i];
  }
  return pairwise_sum(terms);
}

double weighted_volume(const WarpedSpace& space, const RadialGraph& graph, double k) {
  if (!(k >= 1.0)) throw DomainError("weighted_volume requires k >= 1");
  const int n = graph.grid.dim();
  const double p = n + k;
  const double base = std::pow(space.lambda(space.inner_radius()), p);
  const auto w = graph.grid.weights();
  std::vector<double> terms(graph.u.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    terms[i] = w[i] * (std::pow(space.lambda(graph.u[i]), p) - base);
  }
  return pairwise_sum(terms) / p;
}

double volume(const WarpedSpace& space, const RadialGraph& graph) {
  const int n = graph.grid.dim();
  const double a = space.inner_radius();
  const auto w = graph.grid.weights();
  std::vector<double> terms(graph.u.size());
  parallel_for(terms.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const double radial = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
          [&](double s) { return std::pow(space.lambda(s), n); }, a, graph.u[i], 15, 1e-10);
      terms[i] = w[i] * radial;
    }
  });
  return pairwise_sum(terms);
}

namespace {

std::vector<double> curvature_integrals(const GeometryFields& f) {
  std::vector<double> out;
  for (int k = 0; k <= f.n; ++k) out.push_back(surface_integral(f, f.E_field(k)));
  return out;
}

Quermass quermass_from(const WarpedSpace& space, const GeometryFields& f, double vol,
                       const std::vector<double>& curv) {
  if (!space.is_space_form()) {
    throw UnsupportedError("quermassintegrals beyond W_1 are only defined in space forms");
  }
  const int n = f.n;
  const double K = *space.curvature();
  Quermass q;
  q.W.assign(n + 2, 0.0);
  q.W[0] = vol;
  q.W[1] = curv[0] / n;
  for (int k = 1; k <= n - 1; ++k) q.W[k + 1] = (curv[k] + k * K * q.W[k - 1]) / (n - k);
  q.W[n + 1] = unit_ball_volume(n);
  q.gauss_bonnet_residual = curv[n] - (sphere_area(n) - n * K * q.W[n - 1]);
  return q;
}

}  // namespace

Quermass quermassintegrals(const WarpedSpace& space, const RadialGraph& graph,
                           const GeometryFields& fields) {
  if (!space.is_space_form()) {
    throw UnsupportedError("quermassintegrals beyond W_1 are only defined in space forms");
  }
  return quermass_from(space, fields, volume(space, graph), curvature_integrals(fields));
}

QuantityReport full_report(const WarpedSpace& space, const RadialGraph& graph,
                           const GeometryFields& fields, const std::vector<double>& ks) {
  const int n = fields.n;
  QuantityReport r;
  r.n = n;
  r.curvature_integrals = curvature_integrals(fields);
  r.area = r.curvature_integrals[0];
  r.volume = volume(space, graph);
  for (int k = 0; k <= n; ++k) {
    std::vector<double> integrand(fields.nodes);
    for (std::size_t i = 0; i < fields.nodes; ++i) integrand[i] = fields.potential[i] * fields.E_at(i, k);
    r.phi_curvature_integrals.push_back(surface_integral(fields, integrand));
  }
  const double lambda_a = space.lambda(space.inner_radius());
  r.gamma_area = std::pow(lambda_a, n) * space.fiber_area(n);
  for (double k : ks) {
    if (!(k >= 1.0)) throw DomainError("boundary momentum order k must be >= 1");
    std::vector<double> integrand(fields.nodes);
    for (std::size_t i = 0; i < fields.nodes; ++i) integrand[i] = std::pow(fields.lambda[i], k);
    r.boundary_momenta[k] = surface_integral(fields, integrand);
    r.weighted_volumes[k] = weighted_volume(space, graph, k);
    r.gamma_term[k] = lambda_a > 0.0 ? std::pow(lambda_a, k) * r.gamma_area : 0.0;
  }
  if (space.is_space_form()) {
    auto q = quermass_from(space, fields, r.volume, r.curvature_integrals);
    r.W = std::move(q.W);
    r.gauss_bonnet_residual = q.gauss_bonnet_residual;
  } else {
    r.W = {r.volume, r.area / n};
  }
  return r;
}

QuantityReport full_report(const WarpedSpace& space, const RadialGraph& graph,
                           const std::vector<double>& ks) {
  return full_report(space, graph, geometry(space, graph), ks);
}

QuantityReport rescale_euclidean(const QuantityReport& report, double s) {
  QuantityReport r = report;
  const int n = report.n;
  r.area *= std::pow(s, n);
  r.volume *= std::pow(s, n + 1);
  for (auto& [k, v] : r.boundary_momenta) v *= std::pow(s, n + k);
  for (auto& [k, v] : r.weighted_volumes) v *= std::pow(s, n + k);
  for (int k = 0; k <= n; ++k) {
    r.curvature_integrals[k] *= std::pow(s, n - k);
    r.phi_curvature_integrals[k] *= std::pow(s, n + 2 - k);
  }
  for (std::size_t k = 0; k < r.W.size(); ++k) r.W[k] *= std::pow(s, n + 1 - static_cast<int>(k));
  return r;
}

namespace {

nlohmann::json keyed(const std::map<double, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[detail::format_double(k)] = v;
  return j;
}

}  // namespace

nlohmann::json to_json(const QuantityReport& r) {
  nlohmann::json j;
  j["n"] = r.n;
  j["area"] = r.area;
  j["volume"] = r.volume;
  j["W"] = r.W;
  j["momenta"] = keyed(r.boundary_momenta);
  j["weighted_volumes"] = keyed(r.weighted_volumes);
  j["gamma_area"] = r.gamma_area;
  j["gamma_term"] = keyed(r.gamma_term);
  j["curvature_integrals"] = r.curvature_integrals;
  j["phi_curvature_integrals"] = r.phi_curvature_integrals;
  j["gauss_bonnet_residual"] =
      r.gauss_bonnet_residual ? nlohmann::json(*r.gauss_bonnet_residual) : nlohmann::json(nullptr);
  return j;
}

}  // namespace warpflow
