#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "warpflow/ambient.hpp"
#include "warpflow/flows.hpp"
#include "warpflow/quantities.hpp"
#include "warpflow/surface.hpp"

namespace warpflow {

/// One inequality evaluated as lhs - rhs (expected >= 0).
struct DeficitReport {
  std::string name;
  std::optional<double> k;
  std::optional<int> ell;
  double lhs = 0.0;
  double rhs = 0.0;
  double deficit = 0.0;
  double relative_deficit = 0.0;  ///< deficit / max(|lhs|, |rhs|)
  bool equality_expected = false;  ///< input is a round graph
  std::map<std::string, bool> class_flags;
  std::vector<DeficitReport> auxiliary;
};

DeficitReport make_deficit(std::string name, double lhs, double rhs);

/// True if all nodal values of u are equal (a slice / geodesic sphere).
bool is_round(const RadialGraph& graph);

/// |Sigma|^{-(n+k)/n} (int lambda^k - k int_Omega lambda^{k-1} lambda' - k/(n+k) lambda(a)^k |Gamma|).
double q_imcf(const WarpedSpace& space, const RadialGraph& graph, double k);
double q_imcf(const QuantityReport& report, double k);
/// Value of q_imcf on slices: n/(n+k) |N|^{-k/n}.
double q_imcf_limit(const WarpedSpace& space, int n, double k);

DeficitReport deficit_boundary_momentum(const WarpedSpace& space, const RadialGraph& graph, double k);

/// int lambda^k >= (n+k) int_Omega lambda^{k-1} lambda' + lambda(a)^k |Gamma|, equality on slices.
DeficitReport deficit_divergence(const WarpedSpace& space, const RadialGraph& graph, double k);

/// Weinstock-type isoperimetric inequality with the Holder, first-momentum and Young links as
/// auxiliary deficits (euclidean only).
DeficitReport deficit_weinstock_iso(const WarpedSpace& space, const RadialGraph& graph);

/// W_k^{-(n+2-k)/(n+1-k)} (int Phi E_k + k W_{k-1}) (euclidean only).
double q_k_euclidean(const WarpedSpace& space, const RadialGraph& graph, int k);
double q_k_euclidean(const QuantityReport& report, int k);
/// Value of q_k_euclidean on round spheres.
double q_k_euclidean_limit(int n, int k);
DeficitReport deficit_phi_quermass_euclidean(const WarpedSpace& space, const RadialGraph& graph, int k);

/// Relative mismatch of int lambda' E_{k-1} and int u_s E_k.
double minkowski_residual(const WarpedSpace& space, const GeometryFields& fields, int k);

DeficitReport kwong_miao_deficit(const WarpedSpace& space, const RadialGraph& graph, int k);

/// Weighted curvature integral of the geodesic sphere of radius r.
double ball_xi(const WarpedSpace& space, int n, int k, double r);
/// W_l of the geodesic ball of radius r.
double ball_chi(const WarpedSpace& space, int n, int l, double r);
/// Radius at which ball_chi equals w, by bisection to 1e-12 in r.
double ball_chi_inverse(const WarpedSpace& space, int n, int l, double w);
/// Largest radius on which ball_chi(l, .) is strictly increasing.
double ball_chi_monotone_limit(const WarpedSpace& space, int n, int l);

/// lhs = int Phi E_k + k W_{k-1}; rhs = (xi_k + k chi_{k-1})(chi_l^{-1}(W_l)).
DeficitReport deficit_hyperbolic_ref(const WarpedSpace& space, const RadialGraph& graph, int k, int l);
DeficitReport deficit_sphere_ref(const WarpedSpace& space, const RadialGraph& graph, int l);

/// Convex closed curve: int Phi kappa ds >= (L^2 - 2 pi A) / (2 pi).
DeficitReport curve_kwww_deficit(const WarpedSpace& space, const RadialGraph& graph);

/// min over nodes of E_k^2 - E_{k+1} E_{k-1} (E_{n+1} = 0).
double newton_maclaurin_margin(const GeometryFields& fields, int k);

/// Monotone quantities of a flow, in the order they are reported:
/// imcf: Q_imcf_k<k> for each order; euclidean-inverse: Qk_euclid_k<k>;
/// hyperbolic-sx: monotone_hyp_k<k> (nonincreasing) and monotone_hyp_W<l>,
/// l = 0..k (nondecreasing); sphere-bgl: monotone_sph_k<n>. A recorded-only
/// newton_maclaurin_k<k> entry follows.
MonotoneTracker make_monotone_tracker(const FlowSpec& spec, const WarpedSpace& space,
                                      std::vector<double> imcf_orders = {});

struct MonotoneSeries {
  std::vector<std::string> names;
  std::vector<int> directions;
  std::vector<std::vector<double>> values;  ///< [sample][quantity]
  /// Largest relative wrong-way move between consecutive samples, per quantity.
  std::vector<double> worst_wrong_way;
  bool monotone(double eps) const;
};

/// Monotone quantities along the stored samples of a trace.
MonotoneSeries monotone_series(const WarpedSpace& space, const FlowTrace& trace);

nlohmann::json to_json(const DeficitReport& report);

}  // namespace warpflow
