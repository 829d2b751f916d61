#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "warpflow/ambient.hpp"

namespace warpflow {

/// Node layout on the fiber S^n (n = 1 or 2), scaled by the fiber scale c.
///
/// n = 1: m equally spaced angles theta_j = 2 pi j / m.
/// n = 2: shifted equiangular rings theta_i = (i + 1/2) pi / M (poles
/// excluded) times P longitudes phi_j = 2 pi j / P; nodes are row-major in
/// (i, j). Quadrature is Fejer's first rule in cos(theta) and the trapezoidal
/// rule in phi, so the weights integrate band-limited data exactly.
class SphereGrid {
 public:
  static SphereGrid circle(int m, double fiber_scale = 1.0);
  static SphereGrid sphere(int rings, int columns, double fiber_scale = 1.0);
  /// "512" for n = 1, "64x128" for n = 2.
  static SphereGrid parse(int n, std::string_view dims, double fiber_scale = 1.0);

  int dim() const;
  std::size_t size() const;
  /// M for n = 2; 1 for n = 1.
  int rings() const;
  /// P for n = 2; m for n = 1.
  int columns() const;
  double fiber_scale() const;
  /// Angular spacing in theta (pi / M, or 2 pi / m).
  double spacing() const;

  double theta(std::size_t node) const;
  double phi(std::size_t node) const;
  /// Polar angle of ring i (n = 2) or angle of node i (n = 1).
  double ring_theta(int ring) const;
  /// Quadrature weights of the scaled fiber measure; they sum to |N|.
  std::span<const double> weights() const;

  std::string dims_string() const;

  bool operator==(const SphereGrid& other) const;

  struct Data;
  const Data& data() const { return *data_; }

 private:
  explicit SphereGrid(std::shared_ptr<const Data> data) : data_(std::move(data)) {}
  std::shared_ptr<const Data> data_;
};

/// Star-shaped hypersurface r = u(theta) over the fiber grid.
struct RadialGraph {
  SphereGrid grid;
  std::vector<double> u;
  std::string space_id;
};

/// Builds a graph, checking a < u < b and finiteness at every node.
RadialGraph make_graph(const WarpedSpace& space, SphereGrid grid, std::vector<double> u);

/// Covariant derivatives of a nodal function with respect to the round
/// metric c^2 g_{S^n}, in coordinate components (theta, phi).
struct Derivatives {
  std::vector<double> u_t;   ///< d/dtheta
  std::vector<double> u_p;   ///< d/dphi (n = 2 only)
  std::vector<double> h_tt;  ///< Hessian theta-theta
  std::vector<double> h_tp;  ///< Hessian theta-phi (n = 2 only)
  std::vector<double> h_pp;  ///< Hessian phi-phi (n = 2 only)

  /// |Du|^2 measured in the scaled round metric.
  double gradient_norm2(const SphereGrid& grid, std::size_t node) const;
};

/// n = 1: periodic fourth-order centred differences.
/// n = 2: spectral in phi, fourth-order centred differences in theta with the
/// antipodal ghost rule u(-theta, phi) = u(theta, phi + pi).
Derivatives differentiate(const SphereGrid& grid, std::span<const double> u);

/// Ring-wise damping in phi: Fourier mode m is scaled by min(1, (kc / m)^2) with
/// kc = max(1, M sin(theta) / 2). Used on flow tendencies to lift the polar
/// time-step restriction without changing which states are stationary.
void apply_polar_filter(const SphereGrid& grid, std::span<double> values);

/// Per-node extrinsic geometry of a radial graph (structure of arrays).
struct GeometryFields {
  int n = 0;
  std::size_t nodes = 0;
  Derivatives derivs;
  std::vector<double> lambda;       ///< lambda(u)
  std::vector<double> dlambda;      ///< lambda'(u)
  std::vector<double> potential;    ///< Phi(u)
  std::vector<double> v;            ///< sqrt(1 + |Du|^2 / lambda^2)
  std::vector<double> shape;        ///< h^i_j in a sigma-orthonormal frame, n*n per node
  std::vector<double> kappa;        ///< principal curvatures, descending, n per node
  std::vector<double> E;            ///< E_0..E_n, n+1 per node
  std::vector<double> support;      ///< <lambda d_r, nu> = lambda / v
  std::vector<double> area_weight;  ///< lambda^n v * fiber weight

  double kappa_at(std::size_t node, int i) const { return kappa[node * n + i]; }
  double E_at(std::size_t node, int k) const { return E[node * (n + 1) + k]; }
  std::vector<double> E_field(int k) const;
};

/// Outward normal (towards increasing r); round graphs have kappa > 0.
/// Throws DomainError naming the node if an intermediate is not finite.
GeometryFields geometry(const WarpedSpace& space, const RadialGraph& graph);

/// sigma_0..sigma_n of the given values.
std::vector<double> elementary_symmetric(std::span<const double> kappa);
/// E_0..E_n: sigma_k / binomial(n, k).
std::vector<double> normalized_mean_curvatures(std::span<const double> kappa);
/// dE_k / dkappa_i for i = 0..n-1.
std::vector<double> mean_curvature_gradient(std::span<const double> kappa, int k);

struct ClassReport {
  int k = 1;
  double min_mean_curvature = 0.0;  ///< min H = n E_1
  std::vector<double> min_E;        ///< min E_j for j = 1..k (index j - 1)
  double min_kappa = 0.0;
  std::optional<double> static_margin;  ///< min(kappa_min - u_s / lambda'), hyperbolic only

  bool mean_convex() const { return min_mean_curvature > 0.0; }
  bool k_convex() const;
  bool convex() const { return min_kappa > 0.0; }
  std::optional<bool> static_convex() const;
};

/// Nodal minima of the convexity-class indicators, 1 <= k <= n.
ClassReport convexity_class(const GeometryFields& fields, const WarpedSpace& space,
                            const RadialGraph& graph, int k);

/// min over nodes of the smallest eigenvalue of shape - (u_s / lambda') I.
/// Throws DomainError if lambda' vanishes at a node.
double static_convexity_margin(const GeometryFields& fields);

struct RoundSeed {
  double r0 = 1.0;
};
/// u = r0 (1 + eps P_l(cos theta)) for n = 2, r0 (1 + eps cos(l theta)) for n = 1.
struct LegendreSeed {
  double r0 = 1.0;
  double eps = 0.0;
  int l = 2;
};
/// u = r0 (1 + amp S), S a seeded random combination of Schmidt
/// semi-normalised harmonics of degree 1..lmax scaled so that |S| <= 1.
struct BandlimitedSeed {
  std::uint64_t seed = 0;
  double r0 = 1.0;
  double amp = 0.0;
  int lmax = 4;
};
using SeedFamily = std::variant<RoundSeed, LegendreSeed, BandlimitedSeed>;

/// Parses `round:r0=<f>`, `legendre:r0=<f>,eps=<f>,l=<int>`,
/// `bandlimited:seed=<int>,r0=<f>,amp=<f>,lmax=<int>`.
SeedFamily parse_seed(std::string_view spec);
std::string format_seed(const SeedFamily& family);

RadialGraph make_seed_surface(const WarpedSpace& space, const SphereGrid& grid,
                              const SeedFamily& family);

/// CSV with header `theta,phi,u` (n = 2) or `theta,u` (n = 1), row-major by (i, j).
std::string surface_to_csv(const RadialGraph& graph);
RadialGraph surface_from_csv(std::string_view csv, const WarpedSpace& space);

}  // namespace warpflow
