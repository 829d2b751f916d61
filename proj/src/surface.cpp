#include "warpflow/surface.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "detail/spec_string.hpp"
#include "warpflow/error.hpp"
#include "warpflow/parallel.hpp"

namespace warpflow {

using std::numbers::pi;

struct SphereGrid::Data {
  int n = 1;
  int rings = 1;
  int cols = 0;
  double c = 1.0;
  double dtheta = 0.0;
  std::vector<double> theta;  // per ring (n = 2) or per node (n = 1)
  std::vector<double> sin_t;
  std::vector<double> cos_t;
  std::vector<double> weights;
  // Circulant spectral kernels in phi: (D u)_j = sum_s d[s] u_{(j + s) mod P}.
  std::vector<double> d1;
  std::vector<double> d2;
  mutable std::once_flag filter_once;
  mutable std::vector<std::vector<double>> filters;  // empty entry = identity
};

namespace {

void require_grid(bool ok, const std::string& msg) {
  if (!ok) throw DomainError("invalid grid: " + msg);
}

}  // namespace

SphereGrid SphereGrid::circle(int m, double fiber_scale) {
  require_grid(m >= 16 && m % 2 == 0, "n=1 needs m >= 16 and even");
  require_grid(fiber_scale > 0.0, "fiber scale must be positive");
  auto d = std::make_shared<Data>();
  d->n = 1;
  d->rings = 1;
  d->cols = m;
  d->c = fiber_scale;
  d->dtheta = 2.0 * pi / m;
  for (int j = 0; j < m; ++j) {
    const double t = d->dtheta * j;
    d->theta.push_back(t);
    d->sin_t.push_back(std::sin(t));
    d->cos_t.push_back(std::cos(t));
    d->weights.push_back(fiber_scale * d->dtheta);
  }
  return SphereGrid(std::move(d));
}

SphereGrid SphereGrid::sphere(int rings, int columns, double fiber_scale) {
  require_grid(rings >= 16, "n=2 needs M >= 16");
  require_grid(columns >= 32 && columns % 2 == 0, "n=2 needs P >= 32 and even");
  require_grid(fiber_scale > 0.0, "fiber scale must be positive");
  auto d = std::make_shared<Data>();
  d->n = 2;
  d->rings = rings;
  d->cols = columns;
  d->c = fiber_scale;
  d->dtheta = pi / rings;
  const double dphi = 2.0 * pi / columns;
  for (int i = 0; i < rings; ++i) {
    const double t = (i + 0.5) * d->dtheta;
    d->theta.push_back(t);
    d->sin_t.push_back(std::sin(t));
    d->cos_t.push_back(std::cos(t));
  }
  // Fejer's first rule in x = cos(theta); the nodes are Chebyshev points.
  d->weights.resize(static_cast<std::size_t>(rings) * columns);
  for (int i = 0; i < rings; ++i) {
    double s = 0.0;
    for (int j = 1; j <= rings / 2; ++j) {
      s += std::cos(2.0 * j * d->theta[i]) / (4.0 * j * j - 1.0);
    }
    const double w = 2.0 / rings * (1.0 - 2.0 * s) * dphi * fiber_scale * fiber_scale;
    std::fill_n(d->weights.begin() + static_cast<std::ptrdiff_t>(i) * columns, columns, w);
  }
  d->d1.assign(columns, 0.0);
  d->d2.assign(columns, 0.0);
  d->d2[0] = -pi * pi / (3.0 * dphi * dphi) - 1.0 / 6.0;
  for (int s = 1; s < columns; ++s) {
    const double sign = (s % 2 == 0) ? 1.0 : -1.0;
    const double half = 0.5 * s * dphi;
    d->d1[s] = -0.5 * sign / std::tan(half);
    d->d2[s] = -0.5 * sign / (std::sin(half) * std::sin(half));
  }
  return SphereGrid(std::move(d));
}

SphereGrid SphereGrid::parse(int n, std::string_view dims, double fiber_scale) {
  if (n == 1) {
    return circle(static_cast<int>(detail::to_int(dims, "grid")), fiber_scale);
  }
  if (n == 2) {
    const auto parts = detail::split(dims, 'x');
    if (parts.size() != 2) throw ParseError("n=2 grid must look like MxP, got '" + std::string(dims) + "'");
    return sphere(static_cast<int>(detail::to_int(parts[0], "grid M")),
                  static_cast<int>(detail::to_int(parts[1], "grid P")), fiber_scale);
  }
  throw DomainError("only n = 1 and n = 2 are supported");
}

int SphereGrid::dim() const { return data_->n; }
std::size_t SphereGrid::size() const { return static_cast<std::size_t>(data_->rings) * data_->cols; }
int SphereGrid::rings() const { return data_->rings; }
int SphereGrid::columns() const { return data_->cols; }
double SphereGrid::fiber_scale() const { return data_->c; }
double SphereGrid::spacing() const { return data_->dtheta; }

double SphereGrid::theta(std::size_t node) const {
  return data_->n == 1 ? data_->theta[node] : data_->theta[node / data_->cols];
}

double SphereGrid::phi(std::size_t node) const {
  if (data_->n == 1) return 0.0;
  return 2.0 * pi * static_cast<double>(node % data_->cols) / data_->cols;
}

double SphereGrid::ring_theta(int ring) const { return data_->theta[ring]; }

std::span<const double> SphereGrid::weights() const { return data_->weights; }

std::string SphereGrid::dims_string() const {
  if (data_->n == 1) return std::to_string(data_->cols);
  return std::to_string(data_->rings) + "x" + std::to_string(data_->cols);
}

bool SphereGrid::operator==(const SphereGrid& other) const {
  return data_->n == other.data_->n && data_->rings == other.data_->rings &&
         data_->cols == other.data_->cols && data_->c == other.data_->c;
}

RadialGraph make_graph(const WarpedSpace& space, SphereGrid grid, std::vector<double> u) {
  if (u.size() != grid.size()) {
    throw DomainError("graph has " + std::to_string(u.size()) + " values for " +
                      std::to_string(grid.size()) + " grid nodes");
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i]) || !space.contains(u[i])) {
      throw DomainError("graph value u=" + detail::format_double(u[i]) + " at node " +
                        std::to_string(i) + " lies outside the ambient domain (" +
                        detail::format_double(space.inner_radius()) + ", " +
                        detail::format_double(space.outer_radius()) + ")");
    }
  }
  return RadialGraph{std::move(grid), std::move(u), space.id()};
}

// ---------------------------------------------------------------------------
// Differentiation

namespace {

// `ext` holds the row twice.
void circulant(std::span<const double> kernel, const double* ext, double* out, int p) {
  for (int j = 0; j < p; ++j) {
    const double* in = ext + j;
    double s = 0.0;
    for (int k = 0; k < p; ++k) s += kernel[k] * in[k];
    out[j] = s;
  }
}

// The derivative kernels are applied in paired-offset form, which depends only
// on offsets (rotation equivariant) and annihilates constants exactly. `ext`
// holds the row twice so that indices never wrap.
void spectral_d1(std::span<const double> d1, const double* ext, double* out, int p) {
  const int half = p / 2;
  for (int j = 0; j < p; ++j) {
    const double* fwd = ext + j + p;
    double s = 0.0;
    for (int k = 1; k < half; ++k) s += d1[k] * (fwd[k] - fwd[-k]);
    out[j] = s;
  }
}

void spectral_d2(std::span<const double> d2, const double* ext, double* out, int p) {
  const int half = p / 2;
  for (int j = 0; j < p; ++j) {
    const double* fwd = ext + j + p;
    const double c = fwd[0];
    double s = 0.0;
    for (int k = 1; k < half; ++k) s += d2[k] * ((fwd[k] - c) + (fwd[-k] - c));
    out[j] = s + d2[half] * (fwd[half] - c);
  }
}

inline double fd1(double fm2, double fm1, double fp1, double fp2, double h) {
  return (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
}

inline double fd2(double fm2, double fm1, double f0, double fp1, double fp2, double h) {
  return (16.0 * ((fp1 - f0) + (fm1 - f0)) - ((fp2 - f0) + (fm2 - f0))) / (12.0 * h * h);
}

// Value at ring i (possibly a ghost ring across a pole), column j.
inline double ring_value(const std::vector<double>& f, int i, int j, int m, int p) {
  if (i < 0) return f[static_cast<std::size_t>(-1 - i) * p + (j + p / 2) % p];
  if (i >= m) return f[static_cast<std::size_t>(2 * m - 1 - i) * p + (j + p / 2) % p];
  return f[static_cast<std::size_t>(i) * p + j];
}

Derivatives differentiate_circle(const SphereGrid& grid, std::span<const double> u) {
  const int m = grid.columns();
  const double h = grid.spacing();
  Derivatives d;
  d.u_t.resize(m);
  d.h_tt.resize(m);
  auto at = [&](int j) { return u[static_cast<std::size_t>((j % m + m) % m)]; };
  for (int j = 0; j < m; ++j) {
    const double fm2 = at(j - 2), fm1 = at(j - 1), f0 = at(j), fp1 = at(j + 1), fp2 = at(j + 2);
    d.u_t[j] = fd1(fm2, fm1, fp1, fp2, h);
    d.h_tt[j] = fd2(fm2, fm1, f0, fp1, fp2, h);
  }
  return d;
}

Derivatives differentiate_sphere(const SphereGrid& grid, std::span<const double> u) {
  const auto& g = grid.data();
  const int m = g.rings;
  const int p = g.cols;
  const double h = g.dtheta;
  const std::size_t count = grid.size();
  std::vector<double> uu(u.begin(), u.end());
  std::vector<double> up(count), upp(count);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t b, std::size_t e) {
    std::vector<double> ext(3 * static_cast<std::size_t>(p));
    for (std::size_t i = b; i < e; ++i) {
      const double* row = uu.data() + i * p;
      for (int r = 0; r < 3; ++r) std::copy(row, row + p, ext.begin() + r * p);
      spectral_d1(g.d1, ext.data(), up.data() + i * p, p);
      spectral_d2(g.d2, ext.data(), upp.data() + i * p, p);
    }
  });

  Derivatives d;
  d.u_t.resize(count);
  d.u_p = up;
  d.h_tt.resize(count);
  d.h_tp.resize(count);
  d.h_pp.resize(count);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t b, std::size_t e) {
    for (std::size_t ii = b; ii < e; ++ii) {
      const int i = static_cast<int>(ii);
      const double cot = g.cos_t[i] / g.sin_t[i];
      const double sc = g.sin_t[i] * g.cos_t[i];
      for (int j = 0; j < p; ++j) {
        const double fm2 = ring_value(uu, i - 2, j, m, p), fm1 = ring_value(uu, i - 1, j, m, p);
        const double f0 = uu[ii * p + j];
        const double fp1 = ring_value(uu, i + 1, j, m, p), fp2 = ring_value(uu, i + 2, j, m, p);
        const double gm2 = ring_value(up, i - 2, j, m, p), gm1 = ring_value(up, i - 1, j, m, p);
        const double gp1 = ring_value(up, i + 1, j, m, p), gp2 = ring_value(up, i + 2, j, m, p);
        const std::size_t node = ii * p + j;
        const double ut = fd1(fm2, fm1, fp1, fp2, h);
        const double utt = fd2(fm2, fm1, f0, fp1, fp2, h);
        const double utp = fd1(gm2, gm1, gp1, gp2, h);
        d.u_t[node] = ut;
        d.h_tt[node] = utt;
        // Christoffel symbols of the round metric (scale-independent):
        // Gamma^theta_{phi phi} = -sin cos, Gamma^phi_{theta phi} = cot.
        d.h_tp[node] = utp - cot * up[node];
        d.h_pp[node] = upp[node] + sc * ut;
      }
    }
  });
  return d;
}

// Mode m on ring i is scaled by min(1, (kc / m)^2), kc = max(1, M sin(theta) / 2).
// The scaled stiffness of every mode is then at most that of mode kc, and no
// mode is removed outright, so filtered tendencies vanish only where the
// unfiltered ones do.
void build_filters(const SphereGrid::Data& g) {
  const int p = g.cols;
  const double dphi = 2.0 * pi / p;
  g.filters.resize(g.rings);
  for (int i = 0; i < g.rings; ++i) {
    const double kc = std::max(1.0, 0.5 * g.rings * g.sin_t[i]);
    if (kc >= p / 2) continue;
    std::vector<double> kernel(p);
    for (int s = 0; s < p; ++s) {
      double acc = 1.0;
      for (int mode = 1; mode <= p / 2; ++mode) {
        const double sigma = std::min(1.0, (kc / mode) * (kc / mode));
        acc += (mode == p / 2 ? 1.0 : 2.0) * sigma * std::cos(mode * s * dphi);
      }
      kernel[s] = acc / p;
    }
    g.filters[i] = std::move(kernel);
  }
}

}  // namespace

double Derivatives::gradient_norm2(const SphereGrid& grid, std::size_t node) const {
  const double c2 = grid.fiber_scale() * grid.fiber_scale();
  if (grid.dim() == 1) return u_t[node] * u_t[node] / c2;
  const double s = std::sin(grid.theta(node));
  return (u_t[node] * u_t[node] + u_p[node] * u_p[node] / (s * s)) / c2;
}

Derivatives differentiate(const SphereGrid& grid, std::span<const double> u) {
  if (u.size() != grid.size()) throw DomainError("differentiate: size mismatch");
  return grid.dim() == 1 ? differentiate_circle(grid, u) : differentiate_sphere(grid, u);
}

void apply_polar_filter(const SphereGrid& grid, std::span<double> values) {
  if (grid.dim() != 2) return;
  const auto& g = grid.data();
  std::call_once(g.filter_once, [&g] { build_filters(g); });
  const int p = g.cols;
  parallel_for(static_cast<std::size_t>(g.rings), [&](std::size_t b, std::size_t e) {
    std::vector<double> ring(2 * static_cast<std::size_t>(p));
    for (std::size_t i = b; i < e; ++i) {
      if (g.filters[i].empty()) continue;
      double* row = values.data() + i * p;
      std::copy(row, row + p, ring.begin());
      std::copy(row, row + p, ring.begin() + p);
      circulant(g.filters[i], ring.data(), row, p);
    }
  });
}

// ---------------------------------------------------------------------------
// Symmetric functions of principal curvatures

std::vector<double> elementary_symmetric(std::span<const double> kappa) {
  std::vector<double> sigma(kappa.size() + 1, 0.0);
  sigma[0] = 1.0;
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    for (std::size_t k = i + 1; k >= 1; --k) sigma[k] += kappa[i] * sigma[k - 1];
  }
  return sigma;
}

namespace {

double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

}  // namespace

std::vector<double> normalized_mean_curvatures(std::span<const double> kappa) {
  auto e = elementary_symmetric(kappa);
  const int n = static_cast<int>(kappa.size());
  for (int k = 1; k <= n; ++k) e[k] /= binomial(n, k);
  return e;
}

std::vector<double> mean_curvature_gradient(std::span<const double> kappa, int k) {
  const int n = static_cast<int>(kappa.size());
  std::vector<double> grad(n, 0.0);
  if (k == 0) return grad;
  std::vector<double> rest;
  for (int i = 0; i < n; ++i) {
    rest.clear();
    for (int j = 0; j < n; ++j) {
      if (j != i) rest.push_back(kappa[j]);
    }
    grad[i] = elementary_symmetric(rest)[k - 1] / binomial(n, k);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Geometry

std::vector<double> GeometryFields::E_field(int k) const {
  std::vector<double> out(nodes);
  for (std::size_t i = 0; i < nodes; ++i) out[i] = E_at(i, k);
  return out;
}

GeometryFields geometry(const WarpedSpace& space, const RadialGraph& graph) {
  const auto& grid = graph.grid;
  const int n = grid.dim();
  const std::size_t count = grid.size();
  const double c = grid.fiber_scale();
  GeometryFields f;
  f.n = n;
  f.nodes = count;
  f.derivs = differentiate(grid, graph.u);
  f.lambda.resize(count);
  f.dlambda.resize(count);
  f.potential.resize(count);
  f.v.resize(count);
  f.shape.resize(count * n * n);
  f.kappa.resize(count * n);
  f.E.resize(count * (n + 1));
  f.support.resize(count);
  f.area_weight.resize(count);
  const auto weights = grid.weights();

  parallel_for(count, [&](std::size_t b, std::size_t e) {
    for (std::size_t node = b; node < e; ++node) {
      const double r = graph.u[node];
      const WarpValues w = space.warp(r);
      const double lam = w.lambda;
      const double dlam = w.dlambda;
      f.lambda[node] = lam;
      f.dlambda[node] = dlam;
      f.potential[node] = space.potential(r);

      double kap[2] = {0.0, 0.0};
      double v = 1.0;
      if (n == 1) {
        const double p1 = f.derivs.u_t[node] / c;
        const double hess = f.derivs.h_tt[node] / (c * c);
        const double q2 = p1 * p1 / (lam * lam);
        v = std::sqrt(1.0 + q2);
        const double h11 = (-hess + lam * dlam + 2.0 * (dlam / lam) * p1 * p1) / v;
        kap[0] = h11 / (lam * lam * v * v);
        f.shape[node] = kap[0];
      } else {
        const double s = grid.data().sin_t[node / grid.columns()];
        // Components in the sigma-orthonormal frame (d_theta / c, d_phi / (c sin theta)).
        const double p[2] = {f.derivs.u_t[node] / c, f.derivs.u_p[node] / (c * s)};
        const double hs[2][2] = {
            {f.derivs.h_tt[node] / (c * c), f.derivs.h_tp[node] / (c * c * s)},
            {f.derivs.h_tp[node] / (c * c * s), f.derivs.h_pp[node] / (c * c * s * s)}};
        const double q[2] = {p[0] / lam, p[1] / lam};
        const double q2 = q[0] * q[0] + q[1] * q[1];
        v = std::sqrt(1.0 + q2);
        double h[2][2];
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            h[i][j] = (-hs[i][j] + (i == j ? lam * dlam : 0.0) + 2.0 * (dlam / lam) * p[i] * p[j]) / v;
          }
        }
        // Mixed tensor g^{-1} h with g^{-1} = lambda^-2 (I - q q^T / v^2).
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 2; ++k) {
              const double ginv = ((i == k ? 1.0 : 0.0) - q[i] * q[k] / (v * v)) / (lam * lam);
              acc += ginv * h[k][j];
            }
            f.shape[node * 4 + i * 2 + j] = acc;
          }
        }
        // Symmetrise with g^{-1/2} = lambda^-1 (I - q q^T / (v (1 + v))).
        double sroot[2][2];
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            sroot[i][j] = ((i == j ? 1.0 : 0.0) - q[i] * q[j] / (v * (1.0 + v))) / lam;
          }
        }
        double tmp[2][2], a[2][2];
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) tmp[i][j] = sroot[i][0] * h[0][j] + sroot[i][1] * h[1][j];
        }
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) a[i][j] = tmp[i][0] * sroot[0][j] + tmp[i][1] * sroot[1][j];
        }
        const double off = 0.5 * (a[0][1] + a[1][0]);
        const double mean = 0.5 * (a[0][0] + a[1][1]);
        const double rad = std::hypot(0.5 * (a[0][0] - a[1][1]), off);
        kap[0] = mean + rad;
        kap[1] = mean - rad;
      }

      f.v[node] = v;
      f.support[node] = lam / v;
      f.area_weight[node] = std::pow(lam, n) * v * weights[node];
      for (int i = 0; i < n; ++i) f.kappa[node * n + i] = kap[i];
      double* e_out = f.E.data() + node * (n + 1);
      e_out[0] = 1.0;
      if (n == 1) {
        e_out[1] = kap[0];
      } else {
        e_out[1] = 0.5 * (kap[0] + kap[1]);
        e_out[2] = kap[0] * kap[1];
      }

      bool finite = std::isfinite(v) && std::isfinite(lam) && std::isfinite(f.potential[node]);
      for (int i = 0; i < n; ++i) finite = finite && std::isfinite(kap[i]);
      if (!finite || !(lam > 0.0)) {
        throw DomainError("geometry: non-finite or degenerate value at node " +
                          std::to_string(node) + " (theta=" +
                          detail::format_double(grid.theta(node)) + ", phi=" +
                          detail::format_double(grid.phi(node)) + ")");
      }
    }
  });
  return f;
}

// ---------------------------------------------------------------------------
// Convexity classes

bool ClassReport::k_convex() const {
  return std::all_of(min_E.begin(), min_E.end(), [](double e) { return e > 0.0; });
}

std::optional<bool> ClassReport::static_convex() const {
  if (!static_margin) return std::nullopt;
  return *static_margin > 0.0;
}

double static_convexity_margin(const GeometryFields& fields) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t node = 0; node < fields.nodes; ++node) {
    if (std::abs(fields.dlambda[node]) <= 1e-14 * fields.lambda[node]) {
      throw DomainError("static convexity undefined: lambda' = 0 at node " + std::to_string(node));
    }
    const double kmin = fields.kappa_at(node, fields.n - 1);
    margin = std::min(margin, kmin - fields.support[node] / fields.dlambda[node]);
  }
  return margin;
}

ClassReport convexity_class(const GeometryFields& fields, const WarpedSpace& space,
                            const RadialGraph& graph, int k) {
  if (k < 1 || k > fields.n) {
    throw DomainError("convexity_class: k must lie in 1..n");
  }
  (void)graph;
  ClassReport r;
  r.k = k;
  r.min_E.assign(k, std::numeric_limits<double>::infinity());
  r.min_mean_curvature = std::numeric_limits<double>::infinity();
  r.min_kappa = std::numeric_limits<double>::infinity();
  for (std::size_t node = 0; node < fields.nodes; ++node) {
    r.min_mean_curvature = std::min(r.min_mean_curvature, fields.n * fields.E_at(node, 1));
    for (int j = 1; j <= k; ++j) r.min_E[j - 1] = std::min(r.min_E[j - 1], fields.E_at(node, j));
    r.min_kappa = std::min(r.min_kappa, fields.kappa_at(node, fields.n - 1));
  }
  if (space.kind() == SpaceKind::hyperbolic) r.static_margin = static_convexity_margin(fields);
  return r;
}

// ---------------------------------------------------------------------------
// Seeds

SeedFamily parse_seed(std::string_view spec) {
  spec = detail::trim(spec);
  const auto colon = spec.find(':');
  const std::string name(spec.substr(0, colon));
  const auto items = colon == std::string_view::npos
                         ? std::vector<std::string_view>{}
                         : detail::split(spec.substr(colon + 1), ',');
  if (name == "round") {
    auto p = detail::parse_params(items, {"r0"}, "round");
    if (!p.contains("r0")) throw ParseError("round: r0 is required");
    return RoundSeed{detail::to_double(p["r0"], "r0")};
  }
  if (name == "legendre") {
    auto p = detail::parse_params(items, {"r0", "eps", "l"}, "legendre");
    for (const char* key : {"r0", "eps", "l"}) {
      if (!p.contains(key)) throw ParseError(std::string("legendre: ") + key + " is required");
    }
    const long l = detail::to_int(p["l"], "l");
    if (l < 0) throw ParseError("legendre: l must be >= 0");
    return LegendreSeed{detail::to_double(p["r0"], "r0"), detail::to_double(p["eps"], "eps"),
                        static_cast<int>(l)};
  }
  if (name == "bandlimited") {
    auto p = detail::parse_params(items, {"seed", "r0", "amp", "lmax"}, "bandlimited");
    for (const char* key : {"seed", "r0", "amp", "lmax"}) {
      if (!p.contains(key)) throw ParseError(std::string("bandlimited: ") + key + " is required");
    }
    const long seed = detail::to_int(p["seed"], "seed");
    const long lmax = detail::to_int(p["lmax"], "lmax");
    if (seed < 0 || lmax < 1) throw ParseError("bandlimited: seed >= 0 and lmax >= 1 required");
    return BandlimitedSeed{static_cast<std::uint64_t>(seed), detail::to_double(p["r0"], "r0"),
                           detail::to_double(p["amp"], "amp"), static_cast<int>(lmax)};
  }
  throw ParseError("unknown surface family '" + name + "'");
}

std::string format_seed(const SeedFamily& family) {
  using detail::format_double;
  if (const auto* s = std::get_if<RoundSeed>(&family)) return "round:r0=" + format_double(s->r0);
  if (const auto* s = std::get_if<LegendreSeed>(&family)) {
    return "legendre:r0=" + format_double(s->r0) + ",eps=" + format_double(s->eps) +
           ",l=" + std::to_string(s->l);
  }
  const auto& s = std::get<BandlimitedSeed>(family);
  return "bandlimited:seed=" + std::to_string(s.seed) + ",r0=" + format_double(s.r0) +
         ",amp=" + format_double(s.amp) + ",lmax=" + std::to_string(s.lmax);
}

namespace {

// Uniform in [-1, 1] from the raw 64-bit engine output (portable across
// standard libraries, unlike std::uniform_real_distribution).
double symmetric_unit(std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

double factorial_ratio(int l, int m) {
  // (l - m)! / (l + m)!
  double r = 1.0;
  for (int i = l - m + 1; i <= l + m; ++i) r /= i;
  return r;
}

std::vector<double> bandlimited_shape(const SphereGrid& grid, const BandlimitedSeed& seed) {
  std::mt19937_64 rng(seed.seed);
  std::vector<double> shape(grid.size(), 0.0);
  double norm = 0.0;
  if (grid.dim() == 1) {
    for (int m = 1; m <= seed.lmax; ++m) {
      const double a = symmetric_unit(rng);
      const double b = symmetric_unit(rng);
      norm += std::abs(a) + std::abs(b);
      for (std::size_t node = 0; node < grid.size(); ++node) {
        const double t = grid.theta(node);
        shape[node] += a * std::cos(m * t) + b * std::sin(m * t);
      }
    }
  } else {
    for (int l = 1; l <= seed.lmax; ++l) {
      for (int m = 0; m <= l; ++m) {
        const double a = symmetric_unit(rng);
        const double b = m > 0 ? symmetric_unit(rng) : 0.0;
        norm += std::abs(a) + std::abs(b);
        const double schmidt = std::sqrt((m == 0 ? 1.0 : 2.0) * factorial_ratio(l, m));
        for (std::size_t node = 0; node < grid.size(); ++node) {
          const double plm = schmidt * std::assoc_legendre(l, m, std::cos(grid.theta(node)));
          const double ph = grid.phi(node);
          shape[node] += plm * (a * std::cos(m * ph) + b * std::sin(m * ph));
        }
      }
    }
  }
  if (norm > 0.0) {
    for (double& s : shape) s /= norm;
  }
  return shape;
}

}  // namespace

RadialGraph make_seed_surface(const WarpedSpace& space, const SphereGrid& grid,
                              const SeedFamily& family) {
  std::vector<double> u(grid.size());
  if (const auto* s = std::get_if<RoundSeed>(&family)) {
    std::fill(u.begin(), u.end(), s->r0);
  } else if (const auto* s = std::get_if<LegendreSeed>(&family)) {
    for (std::size_t node = 0; node < grid.size(); ++node) {
      const double t = grid.theta(node);
      const double shape = grid.dim() == 1 ? std::cos(s->l * t)
                                           : std::legendre(static_cast<unsigned>(s->l), std::cos(t));
      u[node] = s->r0 * (1.0 + s->eps * shape);
    }
  } else {
    const auto& b = std::get<BandlimitedSeed>(family);
    const auto shape = bandlimited_shape(grid, b);
    for (std::size_t node = 0; node < grid.size(); ++node) u[node] = b.r0 * (1.0 + b.amp * shape[node]);
  }
  return make_graph(space, grid, std::move(u));
}

// ---------------------------------------------------------------------------
// CSV

std::string surface_to_csv(const RadialGraph& graph) {
  std::string out = graph.grid.dim() == 1 ? "theta,u\n" : "theta,phi,u\n";
  char buf[128];
  for (std::size_t node = 0; node < graph.grid.size(); ++node) {
    if (graph.grid.dim() == 1) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", graph.grid.theta(node), graph.u[node]);
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", graph.grid.theta(node),
                    graph.grid.phi(node), graph.u[node]);
    }
    out += buf;
  }
  return out;
}

RadialGraph surface_from_csv(std::string_view csv, const WarpedSpace& space) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("surface CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int n = 0;
  if (line == "theta,u") {
    n = 1;
  } else if (line == "theta,phi,u") {
    n = 2;
  } else {
    throw ParseError("surface CSV header must be 'theta,u' or 'theta,phi,u'");
  }
  std::vector<double> thetas, u;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = detail::split(line, ',');
    if (static_cast<int>(cols.size()) != n + 1) throw ParseError("surface CSV: bad row '" + line + "'");
    thetas.push_back(detail::to_double(cols[0], "theta"));
    u.push_back(detail::to_double(cols.back(), "u"));
  }
  const double c = space.fiber_scale();
  SphereGrid grid = [&] {
    if (n == 1) return SphereGrid::circle(static_cast<int>(u.size()), c);
    std::size_t p = 0;
    while (p < thetas.size() && thetas[p] == thetas[0]) ++p;
    if (p == 0 || u.size() % p != 0) throw ParseError("surface CSV: rows are not a full grid");
    return SphereGrid::sphere(static_cast<int>(u.size() / p), static_cast<int>(p), c);
  }();
  for (std::size_t node = 0; node < grid.size(); ++node) {
    if (std::abs(grid.theta(node) - thetas[node]) > 1e-12) {
      throw ParseError("surface CSV: theta column does not match the grid at row " +
                       std::to_string(node + 1));
    }
  }
  return make_graph(space, std::move(grid), std::move(u));
}

}  // namespace warpflow
