#include "warpflow/ambient.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "detail/spec_string.hpp"
#include "warpflow/error.hpp"

namespace warpflow {

double sphere_area(int n) {
  const double h = 0.5 * (n + 1);
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

double unit_ball_volume(int n) { return sphere_area(n) / (n + 1); }

WarpedSpace::WarpedSpace(SpaceKind kind, double inner, double outer,
                         std::optional<int> curvature, double fiber_scale, WarpFn warp,
                         PotentialFn potential, std::string id)
    : kind_(kind),
      inner_(inner),
      outer_(outer),
      curvature_(curvature),
      fiber_scale_(fiber_scale),
      warp_(std::move(warp)),
      potential_(std::move(potential)),
      id_(std::move(id)) {}

double WarpedSpace::fiber_area(int n) const {
  return std::pow(fiber_scale_, n) * sphere_area(n);
}

WarpedSpace make_space_form(int curvature) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (curvature) {
    case 0:
      return WarpedSpace(
          SpaceKind::euclidean, 0.0, inf, 0, 1.0,
          [](double r) { return WarpValues{r, 1.0, 0.0}; },
          [](double r) { return 0.5 * r * r; }, "euclidean");
    case -1:
      return WarpedSpace(
          SpaceKind::hyperbolic, 0.0, inf, -1, 1.0,
          [](double r) { return WarpValues{std::sinh(r), std::cosh(r), std::sinh(r)}; },
          [](double r) { return std::cosh(r) - 1.0; }, "hyperbolic");
    case 1:
      return WarpedSpace(
          SpaceKind::sphere, 0.0, std::numbers::pi, 1, 1.0,
          [](double r) { return WarpValues{std::sin(r), std::cos(r), -std::sin(r)}; },
          [](double r) { return 1.0 - std::cos(r); }, "sphere");
    default:
      throw DomainError("space form curvature must be -1, 0 or +1, got " +
                        std::to_string(curvature));
  }
}

namespace {

std::string custom_id(const CustomFamily& family, double a, double c) {
  using detail::format_double;
  if (const auto* pc = std::get_if<PowerCubic>(&family)) {
    return "custom:power_cubic,beta=" + format_double(pc->beta) + ",a=" + format_double(a) +
           ",c=" + format_double(c);
  }
  if (std::holds_alternative<CoshFamily>(family)) {
    return "custom:cosh,a=" + format_double(a) + ",c=" + format_double(c);
  }
  return "custom:user_table,a=" + format_double(a) + ",c=" + format_double(c);
}

// Cumulative integral of a cubic spline table, so Phi(r) only integrates the
// last partial cell.
class TableWarp {
 public:
  TableWarp(const UserTable& table, double a)
      : a_(a),
        dr_(table.dr),
        spline_(std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
            table.values.begin(), table.values.end(), a, table.dr)) {
    cumulative_.resize(table.values.size(), 0.0);
    for (std::size_t i = 1; i < table.values.size(); ++i) {
      const double lo = a_ + dr_ * static_cast<double>(i - 1);
      cumulative_[i] = cumulative_[i - 1] + integrate(lo, lo + dr_);
    }
  }

  WarpValues operator()(double r) const {
    return {(*spline_)(r), spline_->prime(r), spline_->double_prime(r)};
  }

  double potential(double r) const {
    const double pos = (r - a_) / dr_;
    const auto last = static_cast<double>(cumulative_.size() - 1);
    const auto cell = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, last));
    const double lo = a_ + dr_ * static_cast<double>(cell);
    return cumulative_[cell] + integrate(lo, r);
  }

 private:
  double integrate(double lo, double hi) const {
    if (hi == lo) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [this](double s) { return (*spline_)(s); }, lo, hi, 15, 1e-12);
  }

  double a_;
  double dr_;
  std::shared_ptr<const boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
  std::vector<double> cumulative_;
};

}  // namespace

WarpedSpace make_custom(const CustomFamily& family, double inner, double fiber_scale) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!(inner >= 0.0) || !std::isfinite(inner)) {
    throw DomainError("inner radius a must be finite and >= 0");
  }
  if (!(fiber_scale > 0.0) || !std::isfinite(fiber_scale)) {
    throw DomainError("fiber scale c must be finite and > 0");
  }
  const std::string id = custom_id(family, inner, fiber_scale);

  if (const auto* pc = std::get_if<PowerCubic>(&family)) {
    const double beta = pc->beta;
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
      throw DomainError("power_cubic requires beta >= 0");
    }
    return WarpedSpace(
        SpaceKind::custom, inner, inf, std::nullopt, fiber_scale,
        [beta](double r) {
          return WarpValues{r + beta * r * r * r, 1.0 + 3.0 * beta * r * r, 6.0 * beta * r};
        },
        [beta](double r) {
          const double r2 = r * r;
          return 0.5 * r2 + 0.25 * beta * r2 * r2;
        },
        id);
  }
  if (std::holds_alternative<CoshFamily>(family)) {
    if (inner <= 0.0) {
      throw DomainError("cosh family requires a > 0 (lambda'(0) = 0)");
    }
    return WarpedSpace(
        SpaceKind::custom, inner, inf, std::nullopt, fiber_scale,
        [](double r) { return WarpValues{std::cosh(r), std::sinh(r), std::cosh(r)}; },
        [](double r) { return std::sinh(r); }, id);
  }

  const auto& table = std::get<UserTable>(family);
  if (table.values.size() < 4 || !(table.dr > 0.0)) {
    throw DomainError("user_table needs at least 4 samples and dr > 0");
  }
  for (double v : table.values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("user_table values must be positive");
  }
  const double outer = inner + table.dr * static_cast<double>(table.values.size() - 1);
  auto warp = std::make_shared<const TableWarp>(table, inner);
  return WarpedSpace(
      SpaceKind::custom, inner, outer, std::nullopt, fiber_scale,
      [warp](double r) { return (*warp)(r); }, [warp](double r) { return warp->potential(r); },
      id);
}

WarpedSpace parse_space(std::string_view spec) {
  spec = detail::trim(spec);
  if (spec == "euclidean") return make_space_form(0);
  if (spec == "hyperbolic") return make_space_form(-1);
  if (spec == "sphere") return make_space_form(1);
  constexpr std::string_view prefix = "custom:";
  if (!spec.starts_with(prefix)) {
    throw ParseError("unknown space '" + std::string(spec) + "'");
  }
  auto items = detail::split(spec.substr(prefix.size()), ',');
  const std::string family(items.front());
  items.erase(items.begin());
  if (family == "power_cubic") {
    auto p = detail::parse_params(items, {"beta", "a", "c"}, "power_cubic");
    const double beta = p.contains("beta") ? detail::to_double(p["beta"], "beta") : 0.0;
    const double a = p.contains("a") ? detail::to_double(p["a"], "a") : 0.0;
    const double c = p.contains("c") ? detail::to_double(p["c"], "c") : 1.0;
    return make_custom(PowerCubic{beta}, a, c);
  }
  if (family == "cosh") {
    auto p = detail::parse_params(items, {"a", "c"}, "cosh");
    if (!p.contains("a")) throw ParseError("cosh: parameter a is required");
    const double a = detail::to_double(p["a"], "a");
    const double c = p.contains("c") ? detail::to_double(p["c"], "c") : 1.0;
    return make_custom(CoshFamily{}, a, c);
  }
  throw ParseError("unknown custom family '" + family + "'");
}

const AssumptionVerdict& AssumptionReport::verdict(std::string_view condition) const {
  for (const auto& v : verdicts) {
    if (v.condition == condition) return v;
  }
  throw DomainError("no verdict named '" + std::string(condition) + "'");
}

AssumptionReport probe_assumptions(const WarpedSpace& space, double r_max, int samples, int n) {
  const double a = space.inner_radius();
  if (!(r_max > a)) throw DomainError("probe requires r_max > a");
  if (samples < 10) throw DomainError("probe requires at least 10 samples");
  r_max = std::min(r_max, std::nextafter(space.outer_radius(), a));

  AssumptionReport report;
  std::vector<WarpValues> w;
  std::vector<double> third_derivative;
  for (int i = 0; i < samples; ++i) {
    // Geometric spacing spanning three decades above a.
    const double frac = static_cast<double>(i) / (samples - 1);
    const double r = a + (r_max - a) * std::pow(10.0, -3.0 * (1.0 - frac));
    WarpValues wv;
    double d3 = 0.0;
    try {
      wv = space.warp(r);
      const double h = 1e-4 * r;
      d3 = (space.warp(r + h).ddlambda - space.warp(r - h).ddlambda) / (2.0 * h);
    } catch (const std::exception& e) {
      throw DomainError("lambda evaluation failed at sample r=" + detail::format_double(r) +
                        ": " + e.what());
    }
    if (!std::isfinite(wv.lambda) || !std::isfinite(wv.dlambda) ||
        !std::isfinite(wv.ddlambda) || !std::isfinite(d3)) {
      throw DomainError("lambda evaluation is not finite at sample r=" +
                        detail::format_double(r));
    }
    report.radii.push_back(r);
    w.push_back(wv);
    third_derivative.push_back(d3);
  }

  auto check = [&](std::string name, auto predicate, auto value_of) {
    AssumptionVerdict v{std::move(name), true, std::nullopt, 0.0};
    for (std::size_t i = 0; i < w.size(); ++i) {
      v.value = value_of(i);
      if (!predicate(i)) {
        v.holds = false;
        v.violated_at = report.radii[i];
        break;
      }
    }
    report.verdicts.push_back(v);
  };

  for (std::size_t i = 0; i < w.size(); ++i) {
    report.curvature_ratio.push_back(w[i].ddlambda * w[i].lambda / (w[i].dlambda * w[i].dlambda));
    report.third_ratio.push_back(w[i].ddlambda > 0.0
                                     ? third_derivative[i] * w[i].lambda / (w[i].dlambda * w[i].ddlambda)
                                     : std::numeric_limits<double>::quiet_NaN());
  }

  check("dlambda_positive", [&](std::size_t i) { return w[i].dlambda > 0.0; },
        [&](std::size_t i) { return w[i].dlambda; });
  check("ddlambda_nonnegative", [&](std::size_t i) { return w[i].ddlambda >= 0.0; },
        [&](std::size_t i) { return w[i].ddlambda; });
  check("curvature_ratio_bounded",
        [&](std::size_t i) { return std::isfinite(report.curvature_ratio[i]); },
        [&](std::size_t i) { return report.curvature_ratio[i]; });
  check("third_ratio_bounded",
        [&](std::size_t i) {
          return w[i].ddlambda <= 0.0 || std::isfinite(report.third_ratio[i]);
        },
        [&](std::size_t i) { return w[i].ddlambda > 0.0 ? report.third_ratio[i] : 0.0; });

  // lambda' counts as unbounded when it has at least doubled past the first half.
  double early_max = 0.0;
  for (std::size_t i = 0; i < w.size() / 2; ++i) early_max = std::max(early_max, w[i].dlambda);
  report.dlambda_bounded = !(w.back().dlambda >= 2.0 * early_max);

  const std::size_t tail = w.size() - w.size() / 4;
  report.liminf_curvature_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = tail; i < w.size(); ++i) {
    report.liminf_curvature_ratio = std::min(report.liminf_curvature_ratio, report.curvature_ratio[i]);
  }

  if (report.dlambda_bounded) {
    // Round fiber of dimension n has Ric = (n - 1) / c^2.
    report.verdicts.push_back({"fiber_ricci_positive", n >= 2, std::nullopt,
                               (n - 1) / (space.fiber_scale() * space.fiber_scale())});
  } else {
    const bool ok = report.liminf_curvature_ratio > 0.0;
    report.verdicts.push_back({"liminf_curvature_ratio_positive", ok,
                               ok ? std::nullopt : std::optional<double>(report.radii.back()),
                               report.liminf_curvature_ratio});
  }
  return report;
}

}  // namespace warpflow
