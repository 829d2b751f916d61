#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace warpflow {

/// Area of the unit round sphere S^n.
double sphere_area(int n);

/// Volume of the unit ball B^{n+1}, i.e. sphere_area(n) / (n + 1).
double unit_ball_volume(int n);

enum class SpaceKind { euclidean, hyperbolic, sphere, custom };

/// Warping function and its first two derivatives at one radius.
struct WarpValues {
  double lambda = 0.0;
  double dlambda = 0.0;
  double ddlambda = 0.0;
};

/// Custom warping families (all with K = none).
struct PowerCubic {
  double beta = 0.0;  ///< lambda(r) = r + beta r^3
};
struct CoshFamily {};  ///< lambda(r) = cosh r, requires a > 0
/// lambda sampled on a uniform radial table starting at the inner radius,
/// evaluated by a cubic B-spline.
struct UserTable {
  double dr = 0.0;
  std::vector<double> values;
};
using CustomFamily = std::variant<PowerCubic, CoshFamily, UserTable>;

/// Warped product ambient [a, b) x N with metric dr^2 + lambda(r)^2 c^2 g_{S^n}.
///
/// Immutable after construction; evaluators are pure and safe to call from
/// any number of threads.
class WarpedSpace {
 public:
  using WarpFn = std::function<WarpValues(double)>;
  using PotentialFn = std::function<double(double)>;

  WarpedSpace(SpaceKind kind, double inner, double outer, std::optional<int> curvature,
              double fiber_scale, WarpFn warp, PotentialFn potential, std::string id);

  SpaceKind kind() const { return kind_; }
  double inner_radius() const { return inner_; }
  double outer_radius() const { return outer_; }
  /// Sectional curvature for the three space forms, nullopt for custom spaces.
  std::optional<int> curvature() const { return curvature_; }
  bool is_space_form() const { return curvature_.has_value(); }
  double fiber_scale() const { return fiber_scale_; }
  bool has_inner_boundary() const { return inner_ > 0.0; }

  WarpValues warp(double r) const { return warp_(r); }
  double lambda(double r) const { return warp_(r).lambda; }
  /// Phi(r) = integral of lambda from 0 to r.
  double potential(double r) const { return potential_(r); }

  /// |N| = c^n omega_n.
  double fiber_area(int n) const;
  /// True if a < r < b.
  bool contains(double r) const { return r > inner_ && r < outer_; }

  /// Spec string this space was parsed from / can be parsed back from.
  const std::string& id() const { return id_; }

 private:
  SpaceKind kind_;
  double inner_;
  double outer_;
  std::optional<int> curvature_;
  double fiber_scale_;
  WarpFn warp_;
  PotentialFn potential_;
  std::string id_;
};

/// Space form of sectional curvature K in {-1, 0, +1}.
WarpedSpace make_space_form(int curvature);

/// Custom warped product. Throws DomainError on invalid parameters.
WarpedSpace make_custom(const CustomFamily& family, double inner, double fiber_scale);

/// Parses `euclidean`, `hyperbolic`, `sphere`,
/// `custom:power_cubic,beta=<f>,a=<f>,c=<f>`, `custom:cosh,a=<f>,c=<f>`.
WarpedSpace parse_space(std::string_view spec);

/// Verdict on one sampled assumption about the warping function.
struct AssumptionVerdict {
  std::string condition;
  bool holds = true;
  std::optional<double> violated_at;  ///< first sample radius where it failed
  double value = 0.0;                 ///< representative sampled value
};

struct AssumptionReport {
  std::vector<double> radii;
  std::vector<double> curvature_ratio;  ///< lambda'' lambda / lambda'^2
  std::vector<double> third_ratio;      ///< lambda''' lambda / (lambda' lambda''), NaN where lambda'' = 0
  bool dlambda_bounded = true;
  double liminf_curvature_ratio = 0.0;
  std::vector<AssumptionVerdict> verdicts;

  const AssumptionVerdict& verdict(std::string_view condition) const;
};

/// Samples the monotonicity/convexity/growth assumptions on a geometric grid
/// in (a, r_max]. Advisory: sampling cannot prove limsup conditions.
AssumptionReport probe_assumptions(const WarpedSpace& space, double r_max, int samples,
                                   int n = 2);

}  // namespace warpflow
