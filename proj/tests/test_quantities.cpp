#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "warpflow/error.hpp"
#include "warpflow/quantities.hpp"

using namespace warpflow;
using std::numbers::pi;

namespace {

RadialGraph seed(const WarpedSpace& s, int m, const SeedFamily& f) {
  return make_seed_surface(s, SphereGrid::sphere(m, 2 * m, s.fiber_scale()), f);
}

}  // namespace

TEST_CASE("surface integrals on the unit sphere") {
  const auto e = make_space_form(0);
  const auto g = seed(e, 64, RoundSeed{1.0});
  const auto f = geometry(e, g);
  CHECK(oracle::rel(surface_integral(f, std::vector<double>(f.nodes, 1.0)), 4 * pi) < 1e-10);
  CHECK(oracle::rel(surface_integral(f, f.E_field(1)), 4 * pi) < 1e-10);
  std::vector<double> bad(f.nodes, 1.0);
  bad[3] = NAN;
  CHECK_THROWS_AS(surface_integral(f, bad), DomainError);
}

TEST_CASE("Phi integral self-converges on a legendre surface") {
  const auto e = make_space_form(0);
  std::vector<double> vals;
  for (int m : {16, 32, 64, 128}) {
    const auto g = seed(e, m, LegendreSeed{1.0, 0.2, 2});
    const auto f = geometry(e, g);
    vals.push_back(surface_integral(f, f.potential));
  }
  const double d1 = std::abs(vals[1] - vals[0]), d2 = std::abs(vals[2] - vals[1]),
               d3 = std::abs(vals[3] - vals[2]);
  MESSAGE("differences " << d1 << " " << d2 << " " << d3);
  CHECK(d3 < 1e-6 * vals[3]);
  CHECK(std::log2(d1 / d2) > 3.7);
  CHECK(std::log2(d2 / d3) > 3.7);
}

TEST_CASE("weighted volume closed forms") {
  const auto e = make_space_form(0);
  const auto ball = seed(e, 32, RoundSeed{1.0});
  CHECK(oracle::rel(weighted_volume(e, ball, 2.0), pi) < 1e-12);
  CHECK(oracle::rel(weighted_volume(e, ball, 1.0), 4 * pi / 3) < 1e-12);
  CHECK_THROWS_AS(weighted_volume(e, ball, 0.5), DomainError);

  const auto h = make_space_form(-1);
  const auto hb = seed(h, 32, RoundSeed{1.0});
  const double radial = oracle::integrate([](double s) { return std::cosh(s) * std::sinh(s) * std::sinh(s); }, 0, 1);
  CHECK(oracle::rel(weighted_volume(h, hb, 1.0), 4 * pi * radial) < 1e-12);
  CHECK(weighted_volume(h, hb, 1.0) == doctest::Approx(6.7980).epsilon(1e-4));
}

TEST_CASE("volume closed forms") {
  const auto e = make_space_form(0);
  CHECK(oracle::rel(volume(e, seed(e, 16, RoundSeed{2.0})), 32 * pi / 3) < 1e-10);
  const auto s = make_space_form(1);
  CHECK(oracle::rel(volume(s, seed(s, 16, RoundSeed{pi / 2})), pi * pi) < 1e-10);
  const auto h = make_space_form(-1);
  CHECK(oracle::rel(volume(h, seed(h, 16, RoundSeed{1.0})), pi * (std::sinh(2.0) - 2)) < 1e-10);
  CHECK(volume(h, seed(h, 16, RoundSeed{1.0})) == doctest::Approx(5.1107).epsilon(1e-4));
}

TEST_CASE("weighted volume with k = 1 is the euclidean volume") {
  const auto e = make_space_form(0);
  const auto g = seed(e, 64, LegendreSeed{1.0, 0.2, 2});
  CHECK(oracle::rel(weighted_volume(e, g, 1.0), volume(e, g)) < 1e-8);
}

TEST_CASE("quermassintegrals of round spheres") {
  const auto e = make_space_form(0);
  const auto g = seed(e, 32, RoundSeed{1.0});
  const auto q = quermassintegrals(e, g, geometry(e, g));
  REQUIRE(q.W.size() == 4);
  CHECK(oracle::rel(q.W[0], 4 * pi / 3) < 1e-10);
  CHECK(oracle::rel(q.W[1], 2 * pi) < 1e-12);
  CHECK(oracle::rel(q.W[2], 4 * pi) < 1e-12);
  CHECK(q.W[3] == 4 * pi / 3);
  CHECK(std::abs(q.gauss_bonnet_residual) < 1e-12);

  const auto h = make_space_form(-1);
  const auto hg = seed(h, 32, RoundSeed{1.0});
  const auto qh = quermassintegrals(h, hg, geometry(h, hg));
  const double s = std::sinh(1.0), c = std::cosh(1.0);
  const double w0 = pi * (std::sinh(2.0) - 2);
  CHECK(oracle::rel(qh.W[1], 2 * pi * s * s) < 1e-12);
  CHECK(oracle::rel(qh.W[2], 4 * pi * s * c - w0) < 1e-10);
  CHECK(std::abs(qh.gauss_bonnet_residual) < 1e-8);

  const auto cu = parse_space("custom:cosh,a=0.1,c=1");
  const auto cg = seed(cu, 16, RoundSeed{1.0});
  CHECK_THROWS_AS(quermassintegrals(cu, cg, geometry(cu, cg)), UnsupportedError);
}

TEST_CASE("curve quermassintegrals") {
  const auto s = make_space_form(1);
  const auto g = make_seed_surface(s, SphereGrid::circle(256), RoundSeed{0.8});
  const auto r = full_report(s, g, {});
  REQUIRE(r.W.size() == 3);
  CHECK(r.W[2] == pi);
  CHECK(std::abs(*r.gauss_bonnet_residual) < 1e-12);
  CHECK(oracle::rel(r.W[1], 2 * pi * std::sin(0.8)) < 1e-12);
}

TEST_CASE("Gauss-Bonnet closure converges at fourth order") {
  for (int K : {-1, 0, 1}) {
    const auto space = make_space_form(K);
    std::vector<double> res;
    for (int m : {32, 64, 128}) {
      const auto g = seed(space, m, LegendreSeed{1.0, 0.2, 2});
      res.push_back(std::abs(*full_report(space, g, {}).gauss_bonnet_residual));
    }
    MESSAGE("K=" << K << " residuals " << res[0] << " " << res[1] << " " << res[2]);
    CHECK(res[2] <= 1e-6 * 4 * pi);
    CHECK((res[2] < 1e-12 || std::log2(res[1] / res[2]) > 3.5));
  }
}

TEST_CASE("full report examples") {
  const auto e = make_space_form(0);
  const auto r = full_report(e, seed(e, 32, RoundSeed{1.0}), {1.0, 2.0});
  CHECK(oracle::rel(r.boundary_momenta.at(1.0), 4 * pi) < 1e-12);
  CHECK(oracle::rel(r.boundary_momenta.at(2.0), 4 * pi) < 1e-12);
  CHECK(r.gamma_term.at(1.0) == 0.0);
  CHECK(r.gamma_area == 0.0);

  const auto cu = parse_space("custom:cosh,a=0.1,c=1");
  const auto rc = full_report(cu, seed(cu, 16, RoundSeed{1.0}), {1.0});
  CHECK(oracle::rel(rc.gamma_area, std::pow(std::cosh(0.1), 2) * 4 * pi) < 1e-14);
  CHECK(rc.gamma_area == doctest::Approx(4 * pi * 1.01003).epsilon(1e-5));
  CHECK(oracle::rel(rc.gamma_term.at(1.0), std::cosh(0.1) * rc.gamma_area) < 1e-14);
  CHECK(rc.W.size() == 2);
  CHECK_FALSE(rc.gauss_bonnet_residual.has_value());

  const auto s = make_space_form(1);
  const auto rs = full_report(s, seed(s, 16, RoundSeed{1.0}), {1.0});
  CHECK(oracle::rel(rs.boundary_momenta.at(1.0), 4 * pi * std::pow(std::sin(1.0), 3)) < 1e-12);
  CHECK(rs.boundary_momenta.at(1.0) == doctest::Approx(7.4873).epsilon(1e-4));
  CHECK_THROWS_AS(full_report(s, seed(s, 16, RoundSeed{1.0}), {0.5}), DomainError);
}

TEST_CASE("round graphs reproduce closed forms in every ambient") {
  for (const char* spec : {"euclidean", "hyperbolic", "sphere", "custom:cosh,a=0.1,c=1.3",
                           "custom:power_cubic,beta=0.5,a=0.2,c=0.7"}) {
    const auto space = parse_space(spec);
    const double r0 = 1.1;
    const auto r = full_report(space, seed(space, 16, RoundSeed{r0}), {1.0, 2.5});
    const double lam = space.lambda(r0), N = space.fiber_area(2);
    CHECK(oracle::rel(r.area, lam * lam * N) < 1e-10);
    CHECK(oracle::rel(r.boundary_momenta.at(2.5), std::pow(lam, 4.5) * N) < 1e-10);
    const double la = space.lambda(space.inner_radius());
    CHECK(oracle::rel(r.weighted_volumes.at(1.0), (std::pow(lam, 3) - std::pow(la, 3)) * N / 3) < 1e-10);
    const double radial = oracle::integrate([&](double s) { return std::pow(space.lambda(s), 2); },
                                            space.inner_radius(), r0);
    CHECK(oracle::rel(r.volume, radial * N) < 1e-10);
    CHECK(oracle::rel(r.W[1], r.area / 2) < 1e-14);
  }
}

TEST_CASE("divergence inequality: equality on round graphs, strict otherwise") {
  for (const char* spec : {"euclidean", "hyperbolic", "sphere", "custom:cosh,a=0.1,c=1"}) {
    const auto space = parse_space(spec);
    for (double k : {1.0, 2.0, 3.5}) {
      auto gap = [&](const RadialGraph& g) {
        const auto r = full_report(space, g, {k});
        return r.boundary_momenta.at(k) - (2 + k) * r.weighted_volumes.at(k) - r.gamma_term.at(k);
      };
      const auto round = seed(space, 32, RoundSeed{1.0});
      const auto bumpy = seed(space, 32, LegendreSeed{1.0, 0.2, 2});
      const double scale = full_report(space, round, {k}).boundary_momenta.at(k);
      CHECK(std::abs(gap(round)) <= 1e-8 * scale);
      CHECK(gap(bumpy) > 1e-3 * scale);
    }
  }
}

TEST_CASE("euclidean rescaling matches direct evaluation") {
  const auto e = make_space_form(0);
  const auto g = seed(e, 32, LegendreSeed{1.0, 0.15, 2});
  auto scaled = g;
  for (double& u : scaled.u) u *= 1.7;
  const auto a = rescale_euclidean(full_report(e, g, {1.5}), 1.7);
  const auto b = full_report(e, scaled, {1.5});
  CHECK(oracle::rel(a.area, b.area) < 1e-12);
  CHECK(oracle::rel(a.volume, b.volume) < 1e-9);
  CHECK(oracle::rel(a.boundary_momenta.at(1.5), b.boundary_momenta.at(1.5)) < 1e-12);
  CHECK(oracle::rel(a.weighted_volumes.at(1.5), b.weighted_volumes.at(1.5)) < 1e-12);
  for (int k = 0; k <= 2; ++k) {
    CHECK(oracle::rel(a.curvature_integrals[k], b.curvature_integrals[k]) < 1e-10);
    CHECK(oracle::rel(a.phi_curvature_integrals[k], b.phi_curvature_integrals[k]) < 1e-10);
  }
  for (int k = 0; k <= 3; ++k) CHECK(oracle::rel(a.W[k], b.W[k]) < 1e-9);
}

TEST_CASE("report JSON field names") {
  const auto e = make_space_form(0);
  const auto j = to_json(full_report(e, seed(e, 16, RoundSeed{1.0}), {1.0, 1.5}));
  for (const char* key : {"area", "volume", "W", "momenta", "weighted_volumes", "gamma_area", "gamma_term",
                          "curvature_integrals", "phi_curvature_integrals", "gauss_bonnet_residual"}) {
    CHECK_MESSAGE(j.contains(key), key);
  }
  CHECK(j["momenta"].contains("1.5"));
  CHECK(j["W"].size() == 4);
}
