#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "warpflow/error.hpp"
#include "warpflow/flows.hpp"
#include "warpflow/parallel.hpp"

using namespace warpflow;
using std::numbers::pi;

namespace {

RadialGraph seed(const WarpedSpace& s, int m, const SeedFamily& f) {
  return make_seed_surface(s, SphereGrid::sphere(m, 2 * m, s.fiber_scale()), f);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

FlowSpec spec_of(FlowKind kind, int k, double t_final, double report_dt) {
  FlowSpec s;
  s.kind = kind;
  s.k = k;
  s.t_final = t_final;
  s.report_dt = report_dt;
  return s;
}

}  // namespace

TEST_CASE("flow kind names") {
  CHECK(parse_flow_kind("imcf") == FlowKind::imcf);
  CHECK(parse_flow_kind("euclidean_inverse") == FlowKind::euclidean_inverse);
  CHECK(parse_flow_kind("sx") == FlowKind::hyperbolic_sx);
  CHECK(parse_flow_kind("sphere-bgl") == FlowKind::sphere_bgl);
  CHECK_THROWS(parse_flow_kind("mcf"));
  for (auto k : {FlowKind::imcf, FlowKind::euclidean_inverse, FlowKind::hyperbolic_sx, FlowKind::sphere_bgl}) {
    CHECK(parse_flow_kind(flow_kind_name(k)) == k);
  }
}

TEST_CASE("spec validation") {
  const auto e = make_space_form(0), h = make_space_form(-1), s = make_space_form(1);
  CHECK_NOTHROW(validate(spec_of(FlowKind::imcf, 1, 1, 0.1), s, 2));
  CHECK_THROWS_AS(validate(spec_of(FlowKind::euclidean_inverse, 1, 1, 0.1), h, 2), ConfigError);
  CHECK_THROWS_AS(validate(spec_of(FlowKind::hyperbolic_sx, 1, 1, 0.1), e, 2), ConfigError);
  CHECK_THROWS_AS(validate(spec_of(FlowKind::sphere_bgl, 1, 1, 0.1), s, 2), ConfigError);
  CHECK_NOTHROW(validate(spec_of(FlowKind::sphere_bgl, 2, 1, 0.1), s, 2));
  CHECK_THROWS_AS(validate(spec_of(FlowKind::euclidean_inverse, 3, 1, 0.1), e, 2), ConfigError);
  CHECK_THROWS_AS(validate(spec_of(FlowKind::imcf, 1, -1, 0.1), e, 2), ConfigError);
  CHECK_THROWS_AS(validate(spec_of(FlowKind::imcf, 1, 1, 0.0), e, 2), ConfigError);
}

TEST_CASE("speeds on round spheres") {
  const auto e = make_space_form(0);
  const auto f = geometry(e, seed(e, 16, RoundSeed{1.0}));
  for (double x : speed(spec_of(FlowKind::imcf, 1, 1, 0.1), e, f)) CHECK(x == doctest::Approx(0.5).epsilon(1e-12));

  const auto h = make_space_form(-1);
  for (int k : {1, 2}) {
    const auto fh = geometry(h, seed(h, 16, RoundSeed{1.0}));
    CHECK(max_abs(speed(spec_of(FlowKind::hyperbolic_sx, k, 1, 0.1), h, fh)) <= 1e-12);
  }
  const auto s = make_space_form(1);
  for (double r : {0.5, 1.0, 1.4}) {
    const auto fs = geometry(s, seed(s, 16, RoundSeed{r}));
    CHECK(max_abs(speed(spec_of(FlowKind::sphere_bgl, 2, 1, 0.1), s, fs)) <= 1e-12);
  }
}

TEST_CASE("speed refuses to leave the cone") {
  const auto e = make_space_form(0);
  // A deep dimple has negative mean curvature near the pole.
  const auto g = seed(e, 16, LegendreSeed{1.0, -0.6, 6});
  const auto f = geometry(e, g);
  CHECK_THROWS_AS(speed(spec_of(FlowKind::imcf, 1, 1, 0.1), e, f), ConeViolation);
  CHECK_THROWS_AS(evolve(e, g, spec_of(FlowKind::imcf, 1, 1, 0.1)), DomainError);
}

TEST_CASE("single steps") {
  const auto e = make_space_form(0);
  const auto g = seed(e, 16, RoundSeed{1.0});
  const auto next = step(e, g, spec_of(FlowKind::imcf, 1, 1, 0.1), 1e-3);
  const double exact = std::exp(0.5e-3);
  for (double u : next.u) CHECK(std::abs(u - (1 + 0.5e-3)) < 1e-6);
  for (double u : next.u) CHECK(std::abs(u - exact) < 1e-9);

  const auto h = make_space_form(-1);
  const auto gh = seed(h, 16, RoundSeed{1.0});
  const auto nh = step(h, gh, spec_of(FlowKind::hyperbolic_sx, 1, 1, 0.1), 0.37);
  for (double u : nh.u) CHECK(std::abs(u - 1.0) <= 1e-12);
}

TEST_CASE("imcf on round spheres is exponential") {
  const auto e = make_space_form(0);
  const auto trace = evolve(e, seed(e, 16, RoundSeed{1.3}), spec_of(FlowKind::imcf, 1, 1.0, 0.25));
  CHECK(trace.termination == Termination::reached_t_final);
  REQUIRE(trace.samples.size() == 5);
  for (const auto& s : trace.samples) {
    CHECK(oracle::rel(s.report.area, 4 * pi * 1.69 * std::exp(s.t)) < 1e-6);
    CHECK(std::abs(s.u_max - 1.3 * std::exp(s.t / 2)) < 1e-6);
  }
  CHECK(trace.samples.back().t == 1.0);
}

TEST_CASE("imcf area law on a perturbed surface in every space form") {
  for (int K : {0, -1, 1}) {
    const auto sp = make_space_form(K);
    const auto g = seed(sp, 32, LegendreSeed{0.8, 0.1, 2});
    CAPTURE(K);
    const auto trace = evolve(sp, g, spec_of(FlowKind::imcf, 1, 0.3, 0.1));
    CHECK(trace.termination == Termination::reached_t_final);
    const double a0 = trace.samples.front().report.area;
    for (const auto& s : trace.samples) {
      CHECK(std::abs(std::log(s.report.area / a0) - s.t) < 1e-5);
    }
    for (std::size_t i = 1; i < trace.samples.size(); ++i) {
      CHECK(trace.samples[i].t > trace.samples[i - 1].t);
    }
  }
}

TEST_CASE("euclidean inverse flow grows W_k exponentially") {
  const auto e = make_space_form(0);
  const auto trace = evolve(e, seed(e, 16, LegendreSeed{1.0, 0.1, 2}),
                            spec_of(FlowKind::euclidean_inverse, 1, 0.5, 0.1));
  REQUIRE(trace.termination == Termination::reached_t_final);
  const double w0 = trace.samples.front().report.W[1];
  for (const auto& s : trace.samples) CHECK(oracle::rel(s.report.W[1], w0 * std::exp(2 * s.t)) < 1e-4);
}

TEST_CASE("geodesic spheres are fixed points") {
  const auto h = make_space_form(-1);
  const auto th = evolve(h, seed(h, 16, RoundSeed{1.0}), spec_of(FlowKind::hyperbolic_sx, 2, 0.5, 0.25));
  CHECK(th.termination == Termination::reached_t_final);
  for (const auto& s : th.samples) {
    CHECK(s.max_speed <= 1e-10);
    CHECK(std::abs(s.u_max - 1.0) <= 1e-10);
  }
  const auto s = make_space_form(1);
  const auto ts = evolve(s, seed(s, 16, RoundSeed{0.9}), spec_of(FlowKind::sphere_bgl, 2, 0.5, 0.25));
  CHECK(ts.termination == Termination::reached_t_final);
  for (const auto& x : ts.samples) CHECK(x.max_speed <= 1e-10);
}

TEST_CASE("sphere imcf stops before the equator") {
  const auto s = make_space_form(1);
  const auto trace = evolve(s, seed(s, 16, RoundSeed{1.2}), spec_of(FlowKind::imcf, 1, 5.0, 0.5));
  CHECK(trace.termination == Termination::cone_violation);
  CHECK(trace.expected_stop);
  CHECK(trace.termination_time < 5.0);
  CHECK(trace.samples.back().margins.min_mean_curvature > 0.0);
}

TEST_CASE("traces are identical for any worker count") {
  const auto h = make_space_form(-1);
  const auto g = seed(h, 16, BandlimitedSeed{7, 1.0, 0.05, 3});
  const auto spec = spec_of(FlowKind::hyperbolic_sx, 1, 0.2, 0.1);
  const int saved = workers();
  set_workers(1);
  const auto a = evolve(h, g, spec);
  set_workers(4);
  const auto b = evolve(h, g, spec);
  set_workers(saved);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].t == b.samples[i].t);
    CHECK(a.samples[i].graph.u == b.samples[i].graph.u);
    CHECK(a.samples[i].report.area == b.samples[i].report.area);
  }
  CHECK(a.accepted_steps == b.accepted_steps);
}

TEST_CASE("variational formula along traces") {
  const auto e = make_space_form(0);
  const auto round = evolve(e, seed(e, 16, RoundSeed{1.0}), spec_of(FlowKind::imcf, 1, 0.1, 0.01));
  CHECK(variational_check(e, round, 0).quermass <= 1e-4);

  const auto t = evolve(e, seed(e, 16, LegendreSeed{1.0, 0.1, 2}),
                        spec_of(FlowKind::euclidean_inverse, 1, 0.1, 0.01));
  CHECK(variational_check(e, t, 1).quermass <= 1e-3);

  const auto t2 = evolve(e, seed(e, 16, LegendreSeed{1.0, 0.1, 2}),
                         spec_of(FlowKind::euclidean_inverse, 2, 0.1, 0.01));
  const auto r2 = variational_check(e, t2, 2);
  REQUIRE(r2.phi);
  CHECK(r2.quermass <= 1e-3);
  CHECK(*r2.phi <= 1e-3);

  auto short_trace = t;
  short_trace.samples.erase(short_trace.samples.begin() + 2, short_trace.samples.end());
  CHECK_THROWS(variational_check(e, short_trace, 1));
}
