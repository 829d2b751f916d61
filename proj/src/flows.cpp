#include "warpflow/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "detail/spec_string.hpp"
#include "warpflow/error.hpp"

namespace warpflow {

FlowKind parse_flow_kind(std::string_view name) {
  std::string s(detail::trim(name));
  std::replace(s.begin(), s.end(), '_', '-');
  if (s == "imcf") return FlowKind::imcf;
  if (s == "euclidean-inverse") return FlowKind::euclidean_inverse;
  if (s == "sx" || s == "hyperbolic-sx") return FlowKind::hyperbolic_sx;
  if (s == "bgl" || s == "sphere-bgl") return FlowKind::sphere_bgl;
  throw ParseError("unknown flow '" + std::string(name) + "'");
}

std::string flow_kind_name(FlowKind kind) {
  switch (kind) {
    case FlowKind::imcf: return "imcf";
    case FlowKind::euclidean_inverse: return "euclidean-inverse";
    case FlowKind::hyperbolic_sx: return "hyperbolic-sx";
    case FlowKind::sphere_bgl: return "sphere-bgl";
  }
  return "?";
}

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::reached_t_final: return "reached_t_final";
    case Termination::cone_violation: return "cone_violation";
    case Termination::step_underflow: return "step_underflow";
  }
  return "?";
}

void validate(const FlowSpec& spec, const WarpedSpace& space, int n) {
  const std::string name = flow_kind_name(spec.kind);
  if (n < 1 || n > 2) throw ConfigError("n must be 1 or 2");
  if (spec.k < 1 || spec.k > n) {
    throw ConfigError(name + ": k must lie in 1..n, got " + std::to_string(spec.k));
  }
  if (!(spec.t_final > 0.0) || !(spec.report_dt > 0.0)) {
    throw ConfigError(name + ": t_final and report_dt must be positive");
  }
  if (!(spec.cfl > 0.0 && spec.cfl <= 1.0)) throw ConfigError(name + ": cfl must lie in (0, 1]");
  if (!(spec.max_rel_step > 0.0)) throw ConfigError(name + ": max_rel_step must be positive");
  if (!(spec.eps_mono >= 0.0)) throw ConfigError(name + ": eps_mono must be >= 0");
  if (!(spec.tol > 0.0)) throw ConfigError(name + ": tol must be positive");
  for (double k : spec.momentum_orders) {
    if (!(k >= 1.0)) throw ConfigError(name + ": momentum orders must be >= 1");
  }
  switch (spec.kind) {
    case FlowKind::imcf:
      break;
    case FlowKind::euclidean_inverse:
      if (space.kind() != SpaceKind::euclidean) {
        throw ConfigError("euclidean-inverse requires the euclidean ambient, got " + space.id());
      }
      break;
    case FlowKind::hyperbolic_sx:
      if (space.kind() != SpaceKind::hyperbolic) {
        throw ConfigError("hyperbolic-sx requires the hyperbolic ambient, got " + space.id());
      }
      break;
    case FlowKind::sphere_bgl:
      if (space.kind() != SpaceKind::sphere) {
        throw ConfigError("sphere-bgl requires the sphere ambient, got " + space.id());
      }
      if (spec.k != n) throw ConfigError("sphere-bgl requires k = n");
      break;
  }
}

namespace {

[[noreturn]] void cone_error(const FlowSpec& spec, std::size_t node, const std::string& what,
                             double value) {
  throw ConeViolation(flow_kind_name(spec.kind) + ": " + what + " = " +
                      detail::format_double(value) + " at node " + std::to_string(node));
}

// Speed and, optionally, the nodal diffusion scale max_i |df / dkappa_i|.
std::vector<double> speed_impl(const FlowSpec& spec, const GeometryFields& f,
                               std::vector<double>* diffusion) {
  const int n = f.n;
  const int k = spec.kind == FlowKind::imcf ? 1 : spec.k;
  std::vector<double> out(f.nodes);
  if (diffusion) diffusion->assign(f.nodes, 0.0);
  for (std::size_t i = 0; i < f.nodes; ++i) {
    std::span<const double> kappa(f.kappa.data() + i * n, n);
    if (spec.kind == FlowKind::imcf) {
      const double H = n * f.E_at(i, 1);
      if (!(H > 0.0)) cone_error(spec, i, "H", H);
      out[i] = 1.0 / H;
      if (diffusion) (*diffusion)[i] = 1.0 / (H * H);
      continue;
    }
    const double ek = f.E_at(i, k), ekm = f.E_at(i, k - 1);
    if (!(ek > 0.0)) cone_error(spec, i, "E_" + std::to_string(k), ek);
    if (!(ekm > 0.0)) cone_error(spec, i, "E_" + std::to_string(k - 1), ekm);
    const double ratio = ekm / ek;
    double scale = 1.0;
    switch (spec.kind) {
      case FlowKind::euclidean_inverse:
        out[i] = ratio;
        break;
      case FlowKind::hyperbolic_sx: {
        const double dl = f.dlambda[i];
        if (!(dl > 0.0)) cone_error(spec, i, "lambda'", dl);
        out[i] = ratio - f.support[i] / dl;
        break;
      }
      case FlowKind::sphere_bgl:
        scale = f.dlambda[i];
        out[i] = scale * ratio - f.support[i];
        break;
      case FlowKind::imcf:
        break;
    }
    if (diffusion) {
      double d = 0.0;
      for (int j = 0; j < n; ++j) {
        // dE_k / dkappa_j for n <= 2: E_1 -> 1/n, E_2 -> the other curvature.
        auto grad = [&](int order) {
          if (order == 0) return 0.0;
          if (order == 1) return 1.0 / n;
          return kappa[1 - j];
        };
        d = std::max(d, std::abs((grad(k - 1) * ek - ekm * grad(k)) / (ek * ek)));
      }
      (*diffusion)[i] = std::abs(scale) * d;
    }
  }
  return out;
}

bool uses_renormalization(const FlowSpec& spec, const WarpedSpace& space) {
  return spec.kind == FlowKind::imcf && space.kind() == SpaceKind::euclidean;
}

// Geometry of the graph scaled by s in the euclidean ambient.
GeometryFields scaled_fields(const GeometryFields& f, double s) {
  if (s == 1.0) return f;
  GeometryFields g = f;
  auto mul = [](std::vector<double>& v, double c) {
    for (double& x : v) x *= c;
  };
  mul(g.derivs.u_t, s);
  mul(g.derivs.u_p, s);
  mul(g.derivs.h_tt, s);
  mul(g.derivs.h_tp, s);
  mul(g.derivs.h_pp, s);
  mul(g.lambda, s);
  mul(g.potential, s * s);
  mul(g.shape, 1.0 / s);
  mul(g.kappa, 1.0 / s);
  for (std::size_t i = 0; i < g.nodes; ++i) {
    for (int k = 1; k <= g.n; ++k) g.E[i * (g.n + 1) + k] *= std::pow(s, -k);
  }
  mul(g.support, s);
  mul(g.area_weight, std::pow(s, g.n));
  return g;
}

struct Evaluation {
  GeometryFields fields;
  std::vector<double> speed;  // at the stored scale
  std::vector<double> tendency;
  double dt_cfl = 0.0;
  double dt_rel = 0.0;
};

class Integrator {
 public:
  Integrator(const WarpedSpace& space, const SphereGrid& grid, const FlowSpec& spec)
      : space_(space), grid_(grid), spec_(spec), renorm_(uses_renormalization(spec, space)) {}

  bool renormalized() const { return renorm_; }

  Evaluation evaluate(const std::vector<double>& u) const {
    const RadialGraph g = make_graph(space_, grid_, u);
    Evaluation ev;
    ev.fields = geometry(space_, g);
    std::vector<double> diffusion;
    ev.speed = speed_impl(spec_, ev.fields, &diffusion);
    const int n = grid_.dim();
    ev.tendency.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) ev.tendency[i] = ev.speed[i] * ev.fields.v[i];
    apply_polar_filter(grid_, ev.tendency);
    if (renorm_) {
      for (std::size_t i = 0; i < u.size(); ++i) ev.tendency[i] -= u[i] / n;
    }
    const double h = grid_.spacing() * grid_.fiber_scale();
    ev.dt_cfl = std::numeric_limits<double>::infinity();
    ev.dt_rel = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double hg = ev.fields.lambda[i] * h;
      if (diffusion[i] > 0.0) ev.dt_cfl = std::min(ev.dt_cfl, spec_.cfl * hg * hg / diffusion[i]);
      const double move = std::abs(ev.speed[i] * ev.fields.v[i]);
      if (move > 0.0) ev.dt_rel = std::min(ev.dt_rel, spec_.max_rel_step * u[i] / move);
    }
    return ev;
  }

  static std::vector<double> axpy(const std::vector<double>& u, double a, const std::vector<double>& x) {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + a * x[i];
    return out;
  }

  static std::vector<double> heun(const std::vector<double>& u, double dt, const std::vector<double>& k1,
                                  const std::vector<double>& k2) {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + 0.5 * dt * (k1[i] + k2[i]);
    return out;
  }

 private:
  const WarpedSpace& space_;
  SphereGrid grid_;
  FlowSpec spec_;
  bool renorm_;
};

std::string cone_failure(const FlowSpec& spec, const GeometryFields& f) {
  const int n = f.n;
  for (std::size_t i = 0; i < f.nodes; ++i) {
    switch (spec.kind) {
      case FlowKind::imcf:
        if (!(f.E_at(i, 1) > 0.0)) return "mean convexity lost at node " + std::to_string(i);
        break;
      case FlowKind::euclidean_inverse:
      case FlowKind::hyperbolic_sx:
        for (int j = 1; j <= spec.k; ++j) {
          if (!(f.E_at(i, j) > 0.0)) {
            return std::to_string(spec.k) + "-convexity lost (E_" + std::to_string(j) + ") at node " +
                   std::to_string(i);
          }
        }
        break;
      case FlowKind::sphere_bgl:
        if (!(f.kappa_at(i, n - 1) > 0.0)) return "strict convexity lost at node " + std::to_string(i);
        break;
    }
  }
  return {};
}

}  // namespace

std::vector<double> speed(const FlowSpec& spec, const WarpedSpace& space,
                          const GeometryFields& fields) {
  (void)space;
  return speed_impl(spec, fields, nullptr);
}

RadialGraph step(const WarpedSpace& space, const RadialGraph& graph, const FlowSpec& spec,
                 double dt) {
  std::vector<double> k1, k2;
  {
    const RadialGraph g = make_graph(space, graph.grid, graph.u);
    const auto f = geometry(space, g);
    const auto s = speed(spec, space, f);
    k1.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) k1[i] = s[i] * f.v[i];
    apply_polar_filter(graph.grid, k1);
  }
  const auto mid = Integrator::axpy(graph.u, dt, k1);
  {
    const RadialGraph g = make_graph(space, graph.grid, mid);
    const auto f = geometry(space, g);
    const auto s = speed(spec, space, f);
    k2.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) k2[i] = s[i] * f.v[i];
    apply_polar_filter(graph.grid, k2);
  }
  return make_graph(space, graph.grid, Integrator::heun(graph.u, dt, k1, k2));
}

FlowTrace evolve(const WarpedSpace& space, const RadialGraph& initial, const FlowSpec& spec,
                 const MonotoneTracker& tracker) {
  const SphereGrid& grid = initial.grid;
  const int n = grid.dim();
  validate(spec, space, n);
  Integrator integ(space, grid, spec);
  const bool renorm = integ.renormalized();
  const std::vector<double> ks =
      spec.momentum_orders.empty() ? std::vector<double>{static_cast<double>(spec.k)} : spec.momentum_orders;

  FlowTrace trace;
  trace.spec = spec;
  trace.space_id = space.id();

  std::vector<double> u = initial.u;
  Evaluation cur;
  try {
    cur = integ.evaluate(u);
  } catch (const ConeViolation& e) {
    throw DomainError(std::string("initial surface is outside the flow's admissible class: ") + e.what());
  }
  if (const auto why = cone_failure(spec, cur.fields); !why.empty()) {
    throw DomainError("initial surface is outside the flow's admissible class: " + why);
  }

  auto scale_at = [&](double t) { return renorm ? std::exp(t / n) : 1.0; };
  auto actual = [&](const std::vector<double>& stored, const Evaluation& ev, double t) {
    const double s = scale_at(t);
    std::vector<double> uu = stored;
    if (s != 1.0) {
      for (double& x : uu) x *= s;
    }
    return std::pair{make_graph(space, grid, std::move(uu)), scaled_fields(ev.fields, s)};
  };

  auto record = [&](double t, double last_dt, const Evaluation& ev) {
    auto [graph, fields] = actual(u, ev, t);
    TraceSample sm{.t = t, .graph = graph};
    sm.report = full_report(space, graph, fields, ks);
    if (tracker) sm.monotone = tracker(space, graph, fields);
    sm.margins = convexity_class(fields, space, graph, spec.kind == FlowKind::imcf ? n : spec.k);
    sm.dt = last_dt;
    const double s = scale_at(t);
    std::vector<double> f(fields.nodes);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = s * ev.speed[i];
    sm.max_speed = 0.0;
    for (double x : f) sm.max_speed = std::max(sm.max_speed, std::abs(x));
    const auto [lo, hi] = std::minmax_element(graph.u.begin(), graph.u.end());
    sm.u_min = *lo;
    sm.u_max = *hi;
    for (int k = 0; k <= n; ++k) {
      std::vector<double> a(fields.nodes), b(fields.nodes);
      for (std::size_t i = 0; i < fields.nodes; ++i) {
        a[i] = f[i] * fields.E_at(i, k);
        const double next = k < n ? fields.E_at(i, k + 1) : 0.0;
        b[i] = ((k + 1) * fields.support[i] * fields.E_at(i, k) + (n - k) * fields.potential[i] * next) * f[i];
      }
      sm.flux_E.push_back(surface_integral(fields, a));
      sm.flux_phi.push_back(surface_integral(fields, b));
    }
    trace.samples.push_back(std::move(sm));
  };

  auto tracked = [&](const Evaluation& ev, const std::vector<double>& stored, double t) {
    if (!tracker) return std::vector<MonotoneSample>{};
    auto uu = stored;
    const double s = scale_at(t);
    for (double& x : uu) x *= s;
    const auto graph = make_graph(space, grid, std::move(uu));
    return tracker(space, graph, scaled_fields(ev.fields, s));
  };

  const bool sphere_imcf = spec.kind == FlowKind::imcf && space.kind() == SpaceKind::sphere;
  auto min_H = [&](const Evaluation& ev) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ev.fields.nodes; ++i) m = std::min(m, n * ev.fields.E_at(i, 1));
    return m;
  };

  record(0.0, 0.0, cur);
  std::vector<MonotoneSample> prev = trace.samples.back().monotone;
  double t = 0.0;
  long report_index = 1;
  double dt = std::min({cur.dt_cfl, cur.dt_rel, spec.report_dt, spec.t_final});
  double last_dt = 0.0;
  const double underflow = 1e-12 * spec.t_final;

  auto terminate = [&](Termination kind, std::string reason) {
    trace.termination = kind;
    trace.termination_time = t;
    trace.reason = std::move(reason);
    if (trace.samples.back().t != t) record(t, last_dt, cur);
  };

  if (sphere_imcf && min_H(cur) <= 1e-3) {
    trace.expected_stop = true;
    terminate(Termination::cone_violation, "approaching the equator: min H <= 1e-3");
    return trace;
  }

  while (true) {
    const double target = std::min(static_cast<double>(report_index) * spec.report_dt, spec.t_final);
    dt = std::min({dt, cur.dt_cfl, cur.dt_rel});
    bool hits_target = false;
    if (dt >= target - t) {
      dt = target - t;
      hits_target = true;
    }
    int cone_halvings = 0, mono_halvings = 0;
    bool accepted = false;
    bool stop = false;
    std::vector<double> fine;
    Evaluation next;
    double err = 0.0;
    while (!accepted) {
      if (dt < underflow) {
        terminate(Termination::step_underflow,
                  "step size " + detail::format_double(dt) + " below 1e-12 * t_final");
        stop = true;
        break;
      }
      try {
        const auto coarse_k2 = integ.evaluate(Integrator::axpy(u, dt, cur.tendency));
        const auto coarse = Integrator::heun(u, dt, cur.tendency, coarse_k2.tendency);
        const auto half_k2 = integ.evaluate(Integrator::axpy(u, 0.5 * dt, cur.tendency));
        const auto half = Integrator::heun(u, 0.5 * dt, cur.tendency, half_k2.tendency);
        const auto half_ev = integ.evaluate(half);
        const auto fine_k2 = integ.evaluate(Integrator::axpy(half, 0.5 * dt, half_ev.tendency));
        fine = Integrator::heun(half, 0.5 * dt, half_ev.tendency, fine_k2.tendency);
        double diff = 0.0, size = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
          diff = std::max(diff, std::abs(fine[i] - coarse[i]));
          size = std::max(size, std::abs(fine[i]));
        }
        err = diff / size;
        if (!(err <= spec.tol)) {
          ++trace.rejected_steps;
          dt *= std::clamp(0.9 * std::cbrt(spec.tol / err), 0.2, 0.5);
          hits_target = false;
          continue;
        }
        next = integ.evaluate(fine);
      } catch (const Error& e) {
        ++trace.rejected_steps;
        if (++cone_halvings > 20) {
          terminate(Termination::cone_violation, e.what());
          stop = true;
          break;
        }
        dt *= 0.5;
        hits_target = false;
        continue;
      }
      if (const auto why = cone_failure(spec, next.fields); !why.empty()) {
        ++trace.rejected_steps;
        if (++cone_halvings > 20) {
          terminate(Termination::cone_violation, why);
          stop = true;
          break;
        }
        dt *= 0.5;
        hits_target = false;
        continue;
      }
      const double t_new = hits_target ? target : t + dt;
      auto values = tracked(next, fine, t_new);
      std::string wrong;
      for (std::size_t q = 0; q < values.size() && q < prev.size(); ++q) {
        const double delta = values[q].value - prev[q].value;
        const double limit = spec.eps_mono * std::abs(prev[q].value);
        if ((values[q].direction < 0 && delta > limit) || (values[q].direction > 0 && -delta > limit)) {
          wrong = values[q].name + " moved the wrong way by " + detail::format_double(delta) +
                  " at t=" + detail::format_double(t_new);
          break;
        }
      }
      if (!wrong.empty() && mono_halvings < 20) {
        ++mono_halvings;
        ++trace.rejected_steps;
        dt *= 0.5;
        hits_target = false;
        continue;
      }
      if (!wrong.empty()) trace.findings.push_back(wrong);
      accepted = true;
      ++trace.accepted_steps;
      u = std::move(fine);
      last_dt = dt;
      t = t_new;
      cur = std::move(next);
      prev = std::move(values);
    }
    if (stop) return trace;

    // Growth is capped at 2x; the local estimate scales like dt^3.
    dt = last_dt * std::clamp(0.9 * std::cbrt(spec.tol / std::max(err, 1e-300)), 0.2, 2.0);
    if (hits_target) {
      record(t, last_dt, cur);
      ++report_index;
      if (t >= spec.t_final) {
        trace.termination = Termination::reached_t_final;
        trace.termination_time = t;
        return trace;
      }
    }
    if (sphere_imcf && min_H(cur) <= 1e-3) {
      trace.expected_stop = true;
      terminate(Termination::cone_violation, "approaching the equator: min H <= 1e-3");
      return trace;
    }
  }
}

VariationalResidual variational_check(const WarpedSpace& space, const FlowTrace& trace, int k) {
  if (!space.is_space_form()) throw UnsupportedError("variational_check needs a space-form ambient");
  const auto& s = trace.samples;
  if (s.size() < 3) throw DomainError("variational_check needs at least 3 samples");
  const int n = s.front().report.n;
  if (k < 0 || k > n) throw DomainError("variational_check: k must lie in 0..n");

  auto derivative = [&](std::size_t i, auto value) {
    const double h1 = s[i].t - s[i - 1].t, h2 = s[i + 1].t - s[i].t;
    return -h2 / (h1 * (h1 + h2)) * value(i - 1) + (h2 - h1) / (h1 * h2) * value(i) +
           h1 / (h2 * (h1 + h2)) * value(i + 1);
  };
  auto residual = [&](auto value, auto flux) {
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) scale = std::max(scale, std::abs(value(i)));
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      const double d = derivative(i, value);
      const double f = flux(i);
      const double denom = std::max(std::abs(f), std::abs(d)) + 1e-12 * scale;
      worst = std::max(worst, std::abs(d - f) / denom);
    }
    return worst;
  };

  VariationalResidual r;
  r.quermass = residual([&](std::size_t i) { return s[i].report.W[k]; },
                        [&](std::size_t i) { return s[i].flux_E[k]; });
  if (k == n) {
    r.phi = residual(
        [&](std::size_t i) { return s[i].report.phi_curvature_integrals[n] + n * s[i].report.W[n - 1]; },
        [&](std::size_t i) { return s[i].flux_phi[n]; });
  }
  return r;
}

}  // namespace warpflow
