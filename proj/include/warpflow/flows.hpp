#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "warpflow/ambient.hpp"
#include "warpflow/quantities.hpp"
#include "warpflow/surface.hpp"

namespace warpflow {

enum class FlowKind { imcf, euclidean_inverse, hyperbolic_sx, sphere_bgl };

/// Accepts `imcf`, `euclidean-inverse`, `sx` / `hyperbolic-sx`, `bgl` / `sphere-bgl`
/// (underscores allowed in place of dashes).
FlowKind parse_flow_kind(std::string_view name);
std::string flow_kind_name(FlowKind kind);

struct FlowSpec {
  FlowKind kind = FlowKind::imcf;
  int k = 1;
  double t_final = 1.0;
  double report_dt = 0.1;
  double cfl = 0.2;
  double max_rel_step = 1e-3;
  double eps_mono = 1e-6;
  /// Local error tolerance of the step-doubling control, relative to max u.
  double tol = 1e-9;
  /// Orders of the boundary momenta recorded in each sample; empty means {k}.
  std::vector<double> momentum_orders;
};

/// Throws ConfigError on out-of-range parameters or a flow/ambient mismatch.
void validate(const FlowSpec& spec, const WarpedSpace& space, int n);

/// Normal speed f at every node. Throws ConeViolation naming the flow, node
/// and offending quantity when the speed leaves its admissible cone.
std::vector<double> speed(const FlowSpec& spec, const WarpedSpace& space,
                          const GeometryFields& fields);

/// One Heun step of u_t = f v (tendency polar-filtered).
RadialGraph step(const WarpedSpace& space, const RadialGraph& graph, const FlowSpec& spec,
                 double dt);

/// Monotone quantity value with its expected direction (-1 nonincreasing,
/// +1 nondecreasing, 0 recorded only).
struct MonotoneSample {
  std::string name;
  int direction = -1;
  double value = 0.0;
};

/// Evaluates the monotone quantities of one surface (actual scale).
using MonotoneTracker = std::function<std::vector<MonotoneSample>(
    const WarpedSpace&, const RadialGraph&, const GeometryFields&)>;

struct TraceSample {
  double t = 0.0;
  RadialGraph graph;
  QuantityReport report;
  std::vector<MonotoneSample> monotone;
  ClassReport margins;
  double dt = 0.0;  ///< last accepted step before the sample (0 at t = 0)
  double max_speed = 0.0;
  double u_min = 0.0;
  double u_max = 0.0;
  std::vector<double> flux_E;    ///< k -> integral of f E_k
  std::vector<double> flux_phi;  ///< k -> integral of ((k+1) u_s E_k + (n-k) Phi E_{k+1}) f
};

enum class Termination { reached_t_final, cone_violation, step_underflow };
std::string termination_name(Termination t);

struct FlowTrace {
  FlowSpec spec;
  std::string space_id;
  std::vector<TraceSample> samples;
  Termination termination = Termination::reached_t_final;
  double termination_time = 0.0;
  std::string reason;
  /// True when the run stopped at a singular time the theory predicts
  /// (IMCF in the sphere reaching the equator).
  bool expected_stop = false;
  /// Persistent wrong-way moves of tracked quantities.
  std::vector<std::string> findings;
  long accepted_steps = 0;
  long rejected_steps = 0;
};

/// Adaptive Heun integration with step doubling until t_final or failure.
/// Throws DomainError if the initial surface is outside the flow's class.
FlowTrace evolve(const WarpedSpace& space, const RadialGraph& initial, const FlowSpec& spec,
                 const MonotoneTracker& tracker = {});

struct VariationalResidual {
  double quermass = 0.0;  ///< max relative residual of dW_k/dt vs integral of f E_k
  std::optional<double> phi;  ///< k = n: d/dt(int Phi E_n + n W_{n-1}) vs flux
};

/// Centred finite differences of the sampled W_k against the sampled fluxes
/// over interior samples. Requires >= 3 samples and a space-form ambient.
VariationalResidual variational_check(const WarpedSpace& space, const FlowTrace& trace, int k);

}  // namespace warpflow
