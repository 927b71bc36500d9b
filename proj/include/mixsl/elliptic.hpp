#pragma once

// Embedded-boundary elliptic solves: -div(a grad phi) + b phi = rhs with
// phi = g on the boundary, ghosts eliminated by normal extrapolation;
// Newton for the nonlinear steady state; the average / fluctuation split
// of the quasi-neutrality equation; discrete gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "mixsl/errors.hpp"
#include "mixsl/geometry.hpp"
#include "mixsl/grid.hpp"
#include "mixsl/parallel.hpp"

namespace mixsl {

enum class FaceMean { kArithmetic, kHarmonic };

using BoundaryFunction = std::function<double(Vec2)>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Square system over the interior nodes.
struct EllipticProblem {
  std::shared_ptr<const EmbeddedDomain> domain;
  std::vector<std::ptrdiff_t> unknown;  // per grid node, -1 if not interior
  std::vector<std::size_t> node;        // per unknown
  SparseMatrix matrix;
  std::vector<double> boundary_rhs;  // g_D terms moved to the right-hand side
  BoundaryFunction dirichlet;

  std::size_t size() const { return node.size(); }
};

namespace detail {
inline double face_coefficient(double a0, double a1, FaceMean mean) {
  return mean == FaceMean::kArithmetic ? 0.5 * (a0 + a1) : 2.0 * a0 * a1 / (a0 + a1);
}
}  // namespace detail

/// Five-point discretization of -div(a grad phi) + b phi on the interior of
/// `dom`. `a` and `b` are 2D node fields (b may be empty: b = 0).
inline EllipticProblem assemble(std::shared_ptr<const EmbeddedDomain> dom, const Field& a,
                                const Field* b = nullptr, FaceMean mean = FaceMean::kArithmetic,
                                BoundaryFunction g = nullptr) {
  if (!dom->stencils_built()) throw ConfigError("assemble: ghost stencils not built");
  const Grid& grid = dom->grid();
  if (!(a.grid() == grid)) throw ConfigError("assemble: coefficient grid mismatch");
  if (b && !(b->grid() == grid)) throw ConfigError("assemble: zeroth-order coefficient grid mismatch");
  EllipticProblem p;
  p.domain = dom;
  p.dirichlet = g ? std::move(g) : BoundaryFunction([](Vec2) { return 0.0; });
  p.unknown.assign(grid.size(), -1);
  for (std::size_t f = 0; f < grid.size(); ++f) {
    if (!dom->is_interior(f)) continue;
    p.unknown[f] = static_cast<std::ptrdiff_t>(p.node.size());
    p.node.push_back(f);
  }
  std::vector<const GhostPoint*> ghost_of(grid.size(), nullptr);
  for (const auto& gp : dom->ghosts()) ghost_of[gp.node] = &gp;

  const std::size_t n = p.size();
  const Axis& ax = grid.axis(0);
  const Axis& ay = grid.axis(1);
  const double hx2 = ax.spacing() * ax.spacing(), hy2 = ay.spacing() * ay.spacing();
  p.boundary_rhs.assign(n, 0.0);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * 12);
  for (std::size_t row = 0; row < n; ++row) {
    const std::size_t f = p.node[row];
    const auto i = static_cast<std::ptrdiff_t>(f / grid.n(1));
    const auto j = static_cast<std::ptrdiff_t>(f % grid.n(1));
    if (!(a[f] > 0.0)) throw ConfigError("assemble: diffusion coefficient must be positive");
    double diag = b ? (*b)[f] : 0.0;
    const std::array<std::array<std::ptrdiff_t, 2>, 4> nb{{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto [ni, nj] = nb[k];
      const Axis& axis = k < 2 ? ax : ay;
      const std::ptrdiff_t along = k < 2 ? ni : nj;
      if (!axis.is_periodic() && (along < 0 || along >= static_cast<std::ptrdiff_t>(axis.n())))
        throw ConfigError("assemble: interior node on the edge of the grid box");
      const std::size_t g2 = dom->flat(ax.resolve(ni), ay.resolve(nj));
      if (!(a[g2] > 0.0)) throw ConfigError("assemble: diffusion coefficient must be positive");
      const double c = detail::face_coefficient(a[f], a[g2], mean) / (k < 2 ? hx2 : hy2);
      diag += c;
      if (p.unknown[g2] >= 0) {
        trip.emplace_back(static_cast<int>(row), static_cast<int>(p.unknown[g2]), -c);
        continue;
      }
      const GhostPoint* gp = ghost_of[g2];
      if (!gp) throw GeometryError("assemble: exterior neighbour without a ghost record");
      p.boundary_rhs[row] += c * gp->boundary_weight() * p.dirichlet(gp->boundary_point);
      for (const auto& [node, w] : gp->composed)
        trip.emplace_back(static_cast<int>(row), static_cast<int>(p.unknown[node]), -c * w);
    }
    trip.emplace_back(static_cast<int>(row), static_cast<int>(row), diag);
  }
  p.matrix.resize(static_cast<int>(n), static_cast<int>(n));
  p.matrix.setFromTriplets(trip.begin(), trip.end());
  p.matrix.makeCompressed();
  return p;
}

inline EllipticProblem assemble(const EmbeddedDomain& dom, const Field& a, const Field* b = nullptr,
                                FaceMean mean = FaceMean::kArithmetic, BoundaryFunction g = nullptr) {
  return assemble(std::make_shared<const EmbeddedDomain>(dom), a, b, mean, std::move(g));
}

/// Sparse LU factorization of an assembled (or modified) operator.
class LinearSolver {
 public:
  explicit LinearSolver(const SparseMatrix& m) : matrix_(m) {
    lu_.analyzePattern(matrix_);
    lu_.factorize(matrix_);
    if (lu_.info() != Eigen::Success) throw SolverError("sparse LU factorization failed");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success) throw SolverError("sparse LU solve failed");
    const double rn = rhs.norm();
    const double res = (matrix_ * x - rhs).norm();
    if (rn > 0.0 && res > 1e-10 * rn)
      throw SolverError("linear solve residual " + std::to_string(res / rn) + " above 1e-10");
    return x;
  }

  const SparseMatrix& matrix() const { return matrix_; }

 private:
  SparseMatrix matrix_;
  mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

/// Interior vector -> full 2D field with ghost/band values extrapolated
/// (Dirichlet data g) and far-exterior nodes at 0.
inline Field to_field(const EllipticProblem& p, const Eigen::VectorXd& x) {
  Field phi(p.domain->grid(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) phi[p.node[k]] = x[static_cast<Eigen::Index>(k)];
  p.domain->extend(phi.data(), p.dirichlet);
  return phi;
}

inline Eigen::VectorXd interior_vector(const EllipticProblem& p, std::span<const double> field,
                                       std::size_t offset = 0, std::size_t stride = 1) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(p.size()));
  for (std::size_t k = 0; k < p.size(); ++k)
    v[static_cast<Eigen::Index>(k)] = field[offset + p.node[k] * stride];
  return v;
}

/// Solves the assembled problem for a 2D right-hand side field.
inline Field solve_linear(const EllipticProblem& p, const Field& rhs) {
  const LinearSolver solver(p.matrix);
  Eigen::VectorXd r = interior_vector(p, rhs.data());
  for (std::size_t k = 0; k < p.size(); ++k) r[static_cast<Eigen::Index>(k)] += p.boundary_rhs[k];
  return to_field(p, solver.solve(r));
}

/// Coordinate-format dump "row col value" (0-based unknown indices).
inline void write_matrix_coo(const std::string& path, const EllipticProblem& p) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write matrix dump: " + path);
  out << std::setprecision(17);
  for (int c = 0; c < p.matrix.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(p.matrix, c); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
  int max_halvings = 30;
  bool linear_test = false;  // drop the e^{-phi} - 1 term
};

struct NewtonResult {
  Field phi;
  std::vector<double> residuals;  // ||F||_inf before each iteration, then final
  int iterations = 0;
};

/// Newton iteration for -div(a grad phi) = (e^{-phi} - 1) - rho0 with
/// phi = 0 on the boundary.
inline NewtonResult solve_newton_steady(std::shared_ptr<const EmbeddedDomain> dom, const Field& a,
                                        double rho0, const NewtonOptions& opt = {},
                                        const Field* initial = nullptr) {
  const EllipticProblem p = assemble(dom, a);
  const auto n = static_cast<Eigen::Index>(p.size());
  Eigen::VectorXd phi = initial ? interior_vector(p, initial->data()) : Eigen::VectorXd::Zero(n);
  auto residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd F = p.matrix * x;
    for (Eigen::Index k = 0; k < n; ++k)
      F[k] -= (opt.linear_test ? 0.0 : std::exp(-x[k]) - 1.0) - rho0;
    return F;
  };
  NewtonResult res;
  Eigen::VectorXd F = residual(phi);
  double norm = F.lpNorm<Eigen::Infinity>();
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  SparseMatrix J = p.matrix;
  lu.analyzePattern(J);
  for (int it = 0;; ++it) {
    res.residuals.push_back(norm);
    if (norm <= opt.tol) break;
    if (it >= opt.max_iter) {
      std::string hist;
      for (double r : res.residuals) hist += " " + std::to_string(r);
      throw SolverError("Newton did not converge in " + std::to_string(opt.max_iter) +
                        " iterations; residual history:" + hist);
    }
    J = p.matrix;
    if (!opt.linear_test)
      for (Eigen::Index k = 0; k < n; ++k) J.coeffRef(k, k) += std::exp(-phi[k]);
    lu.factorize(J);
    if (lu.info() != Eigen::Success) throw SolverError("Newton Jacobian factorization failed");
    const Eigen::VectorXd delta = lu.solve(-F);
    double lambda = 1.0;
    int halvings = 0;
    for (;;) {
      Eigen::VectorXd trial = phi + lambda * delta;
      Eigen::VectorXd Ft = residual(trial);
      const double nt = Ft.lpNorm<Eigen::Infinity>();
      if (nt <= norm || halvings >= opt.max_halvings) {
        phi = std::move(trial);
        F = std::move(Ft);
        norm = nt;
        break;
      }
      lambda *= 0.5;
      ++halvings;
    }
    res.iterations = it + 1;
  }
  res.phi = to_field(p, phi);
  return res;
}

/// Average / fluctuation solver for
///   -div(rho0 grad phi) + rho0/Te (phi - <phi>_z) = rho - rho0
/// on D x periodic z. Both 2D operators are factorized once.
class QuasiNeutralitySolver {
 public:
  QuasiNeutralitySolver(std::shared_ptr<const EmbeddedDomain> dom, const Field& rho0,
                        const Field& te)
      : rho0_(rho0), b_(rho0.grid(), 0.0) {
    for (std::size_t k = 0; k < b_.size(); ++k)
      b_[k] = dom->is_interior(k) ? rho0[k] / te[k] : 0.0;
    average_ = assemble(dom, rho0);
    fluct_ = assemble(dom, rho0, &b_);
    avg_solver_ = std::make_unique<LinearSolver>(average_.matrix);
    fl_solver_ = std::make_unique<LinearSolver>(fluct_.matrix);
  }

  const EllipticProblem& average_problem() const { return average_; }
  const EllipticProblem& fluctuation_problem() const { return fluct_; }

  /// rho is (x, y, z) with z fastest; returns phi on the same grid with
  /// ghosts/band extrapolated per slice.
  Field solve(const Field& rho) const {
    const Grid& g = rho.grid();
    if (g.dim() != 3) throw ConfigError("quasi-neutrality needs a 3D density");
    const std::size_t nz = g.n(2);
    const auto& p = average_;
    // z-average of rho on interior nodes.
    Eigen::VectorXd rbar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size()));
    for (std::size_t k = 0; k < p.size(); ++k) {
      CompensatedSum s;
      for (std::size_t iz = 0; iz < nz; ++iz) s.add(rho[p.node[k] * nz + iz]);
      rbar[static_cast<Eigen::Index>(k)] = s.value() / static_cast<double>(nz);
    }
    Eigen::VectorXd rhs_avg = rbar;
    for (std::size_t k = 0; k < p.size(); ++k) rhs_avg[static_cast<Eigen::Index>(k)] -= rho0_[p.node[k]];
    const Eigen::VectorXd phibar = avg_solver_->solve(rhs_avg);
    Field phi(g, 0.0);
    parallel_for(nz, [&](std::size_t z0, std::size_t z1) {
      for (std::size_t iz = z0; iz < z1; ++iz) {
        Eigen::VectorXd r = interior_vector(p, rho.data(), iz, nz) - rbar;
        const Eigen::VectorXd fl = fl_solver_->solve(r);
        auto data = phi.data();
        for (std::size_t k = 0; k < p.size(); ++k) {
          const auto e = static_cast<Eigen::Index>(k);
          data[p.node[k] * nz + iz] = phibar[e] + fl[e];
        }
        p.domain->extend(data, iz, nz);
      }
    });
    return phi;
  }

  /// Max-norm residual of the full 3D discrete equation, relative to the
  /// max-norm of its right-hand side.
  double residual(const Field& phi, const Field& rho) const {
    const std::size_t nz = rho.grid().n(2);
    const auto& p = average_;
    std::vector<Eigen::VectorXd> slices(nz);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size()));
    for (std::size_t iz = 0; iz < nz; ++iz) {
      slices[iz] = interior_vector(p, phi.data(), iz, nz);
      mean += slices[iz];
    }
    mean /= static_cast<double>(nz);
    double rmax = 0.0, bmax = 0.0;
    for (std::size_t iz = 0; iz < nz; ++iz) {
      Eigen::VectorXd lhs = p.matrix * slices[iz];
      Eigen::VectorXd rhs = interior_vector(p, rho.data(), iz, nz);
      for (std::size_t k = 0; k < p.size(); ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        const double r0 = rho0_[p.node[k]];
        lhs[e] += b_[p.node[k]] * (slices[iz][e] - mean[e]);
        rhs[e] -= r0;
      }
      rmax = std::max(rmax, (lhs - rhs).lpNorm<Eigen::Infinity>());
      bmax = std::max(bmax, rhs.lpNorm<Eigen::Infinity>());
    }
    return bmax > 0.0 ? rmax / bmax : rmax;
  }

 private:
  Field rho0_, b_;
  EllipticProblem average_, fluct_;
  std::unique_ptr<LinearSolver> avg_solver_, fl_solver_;
};

/// Derivative of a plane along one axis at every node of `support`:
/// fourth-order central where i±2 are in support, else second-order
/// central, else one-sided, else 0. `offset`/`stride` select a plane inside
/// a larger (x, y, z) array.
inline double plane_derivative(std::span<const double> f, const Grid& plane,
                               std::span<const std::uint8_t> support, std::size_t i,
                               std::size_t j, std::size_t axis, std::size_t offset = 0,
                               std::size_t stride = 1) {
  const Axis& a = plane.axis(axis);
  const std::size_t ny = plane.n(1);
  const auto c = static_cast<std::ptrdiff_t>(axis == 0 ? i : j);
  auto node = [&](std::ptrdiff_t k) -> std::ptrdiff_t {
    if (!a.is_periodic() && (k < 0 || k >= static_cast<std::ptrdiff_t>(a.n()))) return -1;
    const std::size_t r = a.resolve(k);
    const std::size_t fl = axis == 0 ? r * ny + j : i * ny + r;
    return support[fl] ? static_cast<std::ptrdiff_t>(fl) : -1;
  };
  auto v = [&](std::ptrdiff_t fl) { return f[offset + static_cast<std::size_t>(fl) * stride]; };
  const double h = a.spacing();
  const auto m2 = node(c - 2), m1 = node(c - 1), p1 = node(c + 1), p2 = node(c + 2), c0 = node(c);
  if (m2 >= 0 && m1 >= 0 && p1 >= 0 && p2 >= 0)
    return (v(m2) - 8.0 * v(m1) + 8.0 * v(p1) - v(p2)) / (12.0 * h);
  if (m1 >= 0 && p1 >= 0) return (v(p1) - v(m1)) / (2.0 * h);
  if (c0 >= 0 && p1 >= 0) return (v(p1) - v(c0)) / h;
  if (c0 >= 0 && m1 >= 0) return (v(c0) - v(m1)) / h;
  return 0.0;
}

struct PlaneVelocity {
  std::vector<double> ux, uy;
};

/// U = (-dphi/dy, dphi/dx) on a 2D potential; nodes outside `support` get 0.
inline PlaneVelocity gradient(const Field& phi, std::span<const std::uint8_t> support) {
  const Grid& g = phi.grid();
  if (g.dim() != 2) throw ConfigError("gradient: expected a 2D potential");
  PlaneVelocity u{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
  const std::size_t nx = g.n(0), ny = g.n(1);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t f = i * ny + j;
      if (!support[f]) continue;
      u.ux[f] = -plane_derivative(phi.data(), g, support, i, j, 1);
      u.uy[f] = plane_derivative(phi.data(), g, support, i, j, 0);
    }
  return u;
}

/// Drift-kinetic velocities from phi(x, y, z): U per slice and
/// E∥ = -dphi/dz (fourth-order periodic), all with z fastest.
inline void gradient_3d(const Field& phi, std::span<const std::uint8_t> support,
                        std::vector<double>& ux, std::vector<double>& uy,
                        std::vector<double>& epar) {
  const Grid& g = phi.grid();
  if (g.dim() != 3) throw ConfigError("gradient_3d: expected a 3D potential");
  const Grid plane({g.axis(0), g.axis(1)});
  const std::size_t nx = g.n(0), ny = g.n(1), nz = g.n(2);
  ux.assign(g.size(), 0.0);
  uy.assign(g.size(), 0.0);
  epar.assign(g.size(), 0.0);
  const double dz = g.spacing(2);
  parallel_for(nx, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        const std::size_t f = i * ny + j;
        if (!support[f]) continue;
        for (std::size_t iz = 0; iz < nz; ++iz) {
          const std::size_t k = f * nz + iz;
          ux[k] = -plane_derivative(phi.data(), plane, support, i, j, 1, iz, nz);
          uy[k] = plane_derivative(phi.data(), plane, support, i, j, 0, iz, nz);
          auto at = [&](std::ptrdiff_t d) {
            const auto m = static_cast<std::ptrdiff_t>(nz);
            const auto z = ((static_cast<std::ptrdiff_t>(iz) + d) % m + m) % m;
            return phi[f * nz + static_cast<std::size_t>(z)];
          };
          epar[k] = -(at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * dz);
        }
      }
  });
}

}  // namespace mixsl
