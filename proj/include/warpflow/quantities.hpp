#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "warpflow/ambient.hpp"
#include "warpflow/surface.hpp"

namespace warpflow {

/// Sum over nodes of integrand * area_weight, pairwise and deterministic.
/// Throws DomainError on a non-finite integrand value.
double surface_integral(const GeometryFields& fields, std::span<const double> integrand);

/// Integral over Omega of lambda^{k-1} lambda' dv, via the exact radial antiderivative
/// (lambda(u)^{n+k} - lambda(a)^{n+k}) / (n + k). Requires k >= 1.
double weighted_volume(const WarpedSpace& space, const RadialGraph& graph, double k);

/// |Omega| with the radial integral of lambda^n done by adaptive Gauss-Kronrod.
double volume(const WarpedSpace& space, const RadialGraph& graph);

struct Quermass {
  std::vector<double> W;  ///< W_0..W_{n+1}
  double gauss_bonnet_residual = 0.0;
};

/// Quermassintegrals by the curvature-integral recursion (space forms only;
/// UnsupportedError otherwise).
Quermass quermassintegrals(const WarpedSpace& space, const RadialGraph& graph,
                           const GeometryFields& fields);

struct QuantityReport {
  int n = 0;
  double area = 0.0;
  double volume = 0.0;
  std::map<double, double> boundary_momenta;  ///< k -> integral of lambda^k
  std::map<double, double> weighted_volumes;  ///< k -> integral over Omega of lambda^{k-1} lambda'
  double gamma_area = 0.0;                    ///< lambda(a)^n |N|
  std::map<double, double> gamma_term;        ///< k -> lambda(a)^k |Gamma|
  std::vector<double> curvature_integrals;      ///< integral of E_k, k = 0..n
  std::vector<double> phi_curvature_integrals;  ///< integral of Phi E_k, k = 0..n
  /// W_0..W_{n+1} for space forms; only W_0, W_1 for custom spaces.
  std::vector<double> W;
  std::optional<double> gauss_bonnet_residual;
};

/// Assembles every scalar of one surface. ks must lie in [1, inf).
QuantityReport full_report(const WarpedSpace& space, const RadialGraph& graph,
                           const GeometryFields& fields, const std::vector<double>& ks);
QuantityReport full_report(const WarpedSpace& space, const RadialGraph& graph,
                           const std::vector<double>& ks);

/// Report of the euclidean surface scaled by s, using homogeneity in lambda = r.
QuantityReport rescale_euclidean(const QuantityReport& report, double s);

nlohmann::json to_json(const QuantityReport& report);

}  // namespace warpflow
