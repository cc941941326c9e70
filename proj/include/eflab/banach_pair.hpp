#pragma once

// Banach-pair geometry over (A, (A)_1): gauge norms, 2-norm subspaces,
// linear bijections between them, epsilon-containment of unit-ball slices
// and epsilon-nets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "eflab/algebra.hpp"
#include "eflab/random.hpp"

namespace eflab {

class DependenceError : public AlgebraError {
 public:
  DependenceError(std::size_t index, double eigenvalue)
      : AlgebraError("vectors are linearly dependent at index " + std::to_string(index) +
                     " (smallest Gram eigenvalue " + std::to_string(eigenvalue) + ")"),
        index_(index),
        eigenvalue_(eigenvalue) {}
  std::size_t index() const { return index_; }
  double eigenvalue() const { return eigenvalue_; }

 private:
  std::size_t index_;
  double eigenvalue_;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// The pair (A, C) with C the operator-norm unit ball.
struct BanachPairView {
  AlgebraRef algebra;
  double membership_tol = 0.0;

  bool contains(const Element& x) const { return op_norm(x) <= 1.0 + membership_tol; }
};

/// ||x||_C = inf{t > 0 : x in t C}, by bisection on the membership oracle.
inline double gauge_norm(const Element& x, const BanachPairView& pair, double rel_precision = 1e-9) {
  auto member_at = [&](double t) { return pair.contains(x * (1.0 / t)); };
  if (two_norm(x) == 0.0) return 0.0;
  double hi = 1.0;
  while (!member_at(hi)) hi *= 2.0;
  double lo = hi / 2.0;
  while (member_at(lo) && lo > 1e-300) {
    hi = lo;
    lo /= 2.0;
  }
  while (hi - lo > rel_precision * hi * 0.25) {
    const double mid = 0.5 * (lo + hi);
    if (member_at(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

/// Finite-dimensional subspace with a 2-norm orthonormal basis.
class Subspace {
 public:
  Subspace(AlgebraRef parent, std::vector<Element> orthonormal_basis)
      : parent_(std::move(parent)), basis_(std::move(orthonormal_basis)) {}

  const AlgebraRef& parent() const { return parent_; }
  const std::vector<Element>& basis() const { return basis_; }
  std::size_t dim() const { return basis_.size(); }

  Eigen::VectorXcd coordinates(const Element& x) const {
    Eigen::VectorXcd c(static_cast<Eigen::Index>(dim()));
    for (std::size_t k = 0; k < dim(); ++k) c(static_cast<Eigen::Index>(k)) = trace_inner(x, basis_[k]);
    return c;
  }
  Element element(const Eigen::VectorXcd& c) const {
    Element x = Element::zero(parent_);
    for (std::size_t k = 0; k < dim(); ++k) x += basis_[k] * c(static_cast<Eigen::Index>(k));
    return x;
  }
  /// Orthogonal projection in the trace inner product.
  Element project(const Element& x) const { return element(coordinates(x)); }

  Eigen::MatrixXcd gram() const {
    Eigen::MatrixXcd g(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i)
      for (std::size_t j = 0; j < dim(); ++j)
        g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = trace_inner(basis_[j], basis_[i]);
    return g;
  }

 private:
  AlgebraRef parent_;
  std::vector<Element> basis_;
};

/// Gram matrix G(i,j) = <v_j, v_i>, so that ||sum a_j v_j||^2 = a* G a.
inline Eigen::MatrixXcd gram_matrix(std::span<const Element> v) {
  const auto n = static_cast<Eigen::Index>(v.size());
  Eigen::MatrixXcd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = trace_inner(v[static_cast<std::size_t>(j)], v[static_cast<std::size_t>(i)]);
  return g;
}

inline double smallest_eigenvalue(const Eigen::MatrixXcd& hermitian) {
  if (hermitian.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(hermitian, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

/// Gram-Schmidt in the 2-norm. Throws DependenceError naming the first
/// vector at which the leading Gram block loses rank.
inline Subspace subspace_span(std::span<const Element> vectors, double threshold = 1e-10) {
  if (vectors.empty()) throw AlgebraError("subspace_span: no vectors");
  const AlgebraRef& parent = vectors.front().parent();
  for (const auto& v : vectors) v.require_same(vectors.front(), "subspace_span");
  for (std::size_t k = 1; k <= vectors.size(); ++k) {
    const double lam = smallest_eigenvalue(gram_matrix(vectors.first(k)));
    if (lam <= threshold) throw DependenceError(k - 1, lam);
  }
  std::vector<Element> basis;
  for (const auto& v : vectors) {
    Element w = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) w -= b * trace_inner(w, b);
    basis.push_back(w * (1.0 / two_norm(w)));
  }
  return Subspace(parent, std::move(basis));
}

inline Subspace subspace_span(std::initializer_list<Element> vectors, double threshold = 1e-10) {
  std::vector<Element> v(vectors);
  return subspace_span(std::span<const Element>(v), threshold);
}

/// Linear bijection between subspaces, T(b_j) = sum_i matrix(i,j) f_i in
/// the orthonormal bases.
struct SubspaceMap {
  Subspace domain;
  Subspace codomain;
  Eigen::MatrixXcd matrix;

  Element apply(const Element& x) const { return codomain.element(matrix * domain.coordinates(x)); }

  SubspaceMap inverse() const {
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(matrix);
    if (!lu.isInvertible()) throw AlgebraError("SubspaceMap is not invertible");
    return {codomain, domain, lu.inverse()};
  }
};

/// The map sending sources[i] to images[i]; both families must be independent.
inline SubspaceMap map_from_pairs(std::span<const Element> sources, std::span<const Element> images) {
  if (sources.size() != images.size()) throw AlgebraError("map_from_pairs: size mismatch");
  Subspace e = subspace_span(sources);
  Subspace f = subspace_span(images);
  const auto n = static_cast<Eigen::Index>(sources.size());
  Eigen::MatrixXcd x(n, n), y(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    x.col(j) = e.coordinates(sources[static_cast<std::size_t>(j)]);
    y.col(j) = f.coordinates(images[static_cast<std::size_t>(j)]);
  }
  Eigen::MatrixXcd m = y * x.inverse();
  return {std::move(e), std::move(f), std::move(m)};
}

inline SubspaceMap scaled(const SubspaceMap& t, double factor) { return {t.domain, t.codomain, t.matrix * factor}; }

/// outer o inner; the codomain of inner must span the domain of outer.
inline SubspaceMap compose(const SubspaceMap& outer, const SubspaceMap& inner) {
  const auto n = static_cast<Eigen::Index>(inner.codomain.dim());
  if (outer.domain.dim() != inner.codomain.dim()) throw AlgebraError("compose: dimension mismatch");
  Eigen::MatrixXcd change(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    change.col(j) = outer.domain.coordinates(inner.codomain.basis()[static_cast<std::size_t>(j)]);
  return {inner.domain, outer.codomain, outer.matrix * change * inner.matrix};
}

struct MapExtremes {
  double norm_T;
  double norm_Tinv;
};

inline MapExtremes map_extremes(const SubspaceMap& t) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(t.matrix);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (!(smin > 0)) throw AlgebraError("map_extremes: singular map");
  return {s(0), 1.0 / smin};
}

// --- nearest point of F cap (A)_1 -------------------------------------------

/// Singular-value clipping: the 2-norm projection onto the operator-norm ball
/// of radius `radius` (exact because the 2-norm is a weighted blockwise
/// Frobenius norm).
inline Element clip_to_ball(const Element& x, double radius = 1.0) {
  std::vector<Matrix> out;
  bool changed = false;
  for (const auto& b : x.blocks()) {
    if (detail::block_op_norm(b) <= radius) {
      out.push_back(b);
      continue;
    }
    changed = true;
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd s = svd.singularValues().cwiseMin(radius);
    out.push_back(svd.matrixU() * s.cast<cplx>().asDiagonal() * svd.matrixV().adjoint());
  }
  if (!changed) return x;
  return Element(x.parent(), std::move(out));
}

struct BallCapOptions {
  double tolerance = 1e-8;
  int max_iterations = 10000;
};

struct BallCapProjection {
  Element point;
  double distance;
  int iterations;
  double residual;
};

/// Dykstra's alternating projections onto F and the operator-norm ball.
inline BallCapProjection project_ball_cap(const Element& y, const Subspace& f, const BallCapOptions& opt = {}) {
  y.require_same(Element::zero(f.parent()), "project_ball_cap");
  {
    Element py = f.project(y);
    if (op_norm(py) <= 1.0) {
      const double d = distance(y, py);
      // y already in F up to rounding: report it unchanged
      if (d <= 1e-14 * std::max(1.0, two_norm(y))) return {y, 0.0, 0, 0.0};
      return {py, d, 0, 0.0};
    }
  }
  Element x = y;
  Element p = Element::zero(y.parent());
  Element q = Element::zero(y.parent());
  Element a = x;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    a = f.project(x + p);
    p = x + p - a;
    Element b = clip_to_ball(a + q);
    q = a + q - b;
    const double step = distance(b, x);
    residual = distance(a, b);
    x = std::move(b);
    if (step <= opt.tolerance * 1e-2 && residual <= opt.tolerance) {
      const double on = op_norm(a);
      Element point = on > 1.0 ? a * (1.0 / on) : a;
      const double d = distance(y, point);
      return {std::move(point), d, it, residual};
    }
  }
  throw ConvergenceError("project_ball_cap: no convergence within " + std::to_string(opt.max_iterations) +
                             " iterations (residual " + std::to_string(residual) + ")",
                         residual);
}

// --- almost isometries --------------------------------------------------------

enum class IsometryVariant { definition, alternate };

inline const char* to_string(IsometryVariant v) { return v == IsometryVariant::definition ? "definition" : "alternate"; }

struct IsometryReport {
  IsometryVariant variant = IsometryVariant::definition;
  double epsilon = 0;
  double net_resolution = 0;  // effective resolution actually used
  double norm_T = 0;
  double norm_Tinv = 0;
  double fwd_defect = 0;
  double bwd_defect = 0;
  bool verdict = false;
  std::size_t net_points = 0;
};

struct IsometryCheckOptions {
  std::size_t max_grid_points = 200000;
  std::size_t random_directions = 512;
  std::uint64_t seed = 0;
  BallCapOptions ball_cap{};
};

namespace detail {

/// Unit directions of C^d modulo the circle action (first coordinate real),
/// from the surface of the cube [-1,1]^{2d-1} plus random directions.
/// Returns the effective covering resolution of the grid part.
inline double sphere_directions(std::size_t d, double resolution, std::size_t max_points, std::size_t extra,
                                std::uint64_t seed, std::vector<Eigen::VectorXcd>& out) {
  const std::size_t k = 2 * d - 1;
  const double face_dim = static_cast<double>(k > 1 ? k - 1 : 1);
  double h = 2.0 * resolution / std::sqrt(face_dim);
  auto count_for = [&](double hh) {
    const double m = std::ceil(2.0 / hh) + 1.0;
    return std::pow(m, static_cast<double>(k)) - std::pow(std::max(0.0, m - 2.0), static_cast<double>(k));
  };
  while (k > 1 && count_for(h) > static_cast<double>(max_points)) h *= 1.1;
  const long m = static_cast<long>(std::ceil(2.0 / h)) + 1;
  const double step = 2.0 / static_cast<double>(m - 1);
  auto to_direction = [&](const std::vector<double>& r) {
    Eigen::VectorXcd c(static_cast<Eigen::Index>(d));
    c(0) = r[0];
    for (std::size_t j = 1; j < d; ++j) c(static_cast<Eigen::Index>(j)) = cplx(r[2 * j - 1], r[2 * j]);
    return Eigen::VectorXcd(c / c.norm());
  };
  if (k == 1) {
    out.push_back(to_direction({1.0}));
  } else {
    std::vector<long> idx(k, 0);
    std::vector<double> r(k);
    while (true) {
      bool on_face = false;
      for (std::size_t i = 0; i < k; ++i) {
        r[i] = -1.0 + step * static_cast<double>(idx[i]);
        if (idx[i] == 0 || idx[i] == m - 1) on_face = true;
      }
      if (on_face) out.push_back(to_direction(r));
      std::size_t i = 0;
      while (i < k && ++idx[i] == m) idx[i++] = 0;
      if (i == k) break;
    }
    Rng rng = make_rng(seed, 0x5eed);
    std::normal_distribution<double> normal;
    for (std::size_t s = 0; s < extra; ++s) {
      for (auto& v : r) v = normal(rng);
      out.push_back(to_direction(r));
    }
  }
  return k == 1 ? 0.0 : step * std::sqrt(face_dim) / 2.0;
}

/// Boundary points x / ||x|| of E cap (A)_1 in coordinates.
inline std::vector<Eigen::VectorXcd> boundary_points(const Subspace& e, const std::vector<Eigen::VectorXcd>& dirs) {
  std::vector<Eigen::VectorXcd> pts;
  pts.reserve(dirs.size());
  for (const auto& c : dirs) {
    const double on = op_norm(e.element(c));
    pts.push_back(c / on);
  }
  return pts;
}

struct SideDefects {
  double kappa = 0;   // sup of ||T x|| over boundary points
  double defect = 0;  // sup of dist(T x, F cap D)
};

inline SideDefects side_defects(const SubspaceMap& t, const std::vector<Eigen::VectorXcd>& boundary,
                                bool need_distance, const BallCapOptions& bc) {
  SideDefects out;
  for (const auto& c : boundary) {
    const Eigen::VectorXcd img = t.matrix * c;
    const Element y = t.codomain.element(img);
    const double on = op_norm(y);
    out.kappa = std::max(out.kappa, on);
    if (!need_distance || on <= 1.0) continue;
    // y / ||y|| is feasible, so the radial gap bounds the distance from above.
    const double radial = two_norm(y) * (1.0 - 1.0 / on);
    if (radial <= out.defect) continue;
    out.defect = std::max(out.defect, project_ball_cap(y, t.codomain, bc).distance);
  }
  return out;
}

}  // namespace detail

/// Decides whether T is an epsilon-almost isometry. The containment sup is
/// taken over a net of boundary points of the unit-ball slice (the distance
/// to a convex set is convex, so the sup sits on the boundary) and is
/// invariant under unimodular scalars, so directions are taken modulo phase.
inline IsometryReport check_almost_isometry(const SubspaceMap& t, double epsilon, double net_resolution,
                                            IsometryVariant variant, const IsometryCheckOptions& opt = {}) {
  if (!(epsilon > 0)) throw AlgebraError("check_almost_isometry: epsilon must be positive");
  if (!(net_resolution > 0)) throw AlgebraError("check_almost_isometry: net_resolution must be positive");
  IsometryReport r;
  r.variant = variant;
  r.epsilon = epsilon;
  const MapExtremes ext = map_extremes(t);
  const SubspaceMap inv = t.inverse();

  std::vector<Eigen::VectorXcd> dirs;
  r.net_resolution = std::max(net_resolution, detail::sphere_directions(t.domain.dim(), net_resolution,
                                                                          opt.max_grid_points,
                                                                          opt.random_directions, opt.seed, dirs));
  const auto e_boundary = detail::boundary_points(t.domain, dirs);
  const auto f_boundary = detail::boundary_points(t.codomain, dirs);
  r.net_points = e_boundary.size() + f_boundary.size();

  const bool need_distance = variant == IsometryVariant::definition;
  const auto fwd = detail::side_defects(t, e_boundary, need_distance, opt.ball_cap);
  const auto bwd = detail::side_defects(inv, f_boundary, need_distance, opt.ball_cap);

  if (variant == IsometryVariant::definition) {
    r.norm_T = ext.norm_T;
    r.norm_Tinv = ext.norm_Tinv;
    r.fwd_defect = fwd.defect;
    r.bwd_defect = bwd.defect;
  } else {
    // Rescale so that T' = T/kappa_T and S = T^{-1}/kappa_S map ball slices
    // into ball slices; then ST - id = TS - id = (1/(kappa_T kappa_S) - 1) id.
    const double kt = std::max(fwd.kappa, std::numeric_limits<double>::min());
    const double ks = std::max(bwd.kappa, std::numeric_limits<double>::min());
    r.norm_T = ext.norm_T / kt;
    r.norm_Tinv = ext.norm_Tinv / ks;
    const auto d = static_cast<Eigen::Index>(t.domain.dim());
    const Eigen::MatrixXcd st = (inv.matrix / ks) * (t.matrix / kt) - Eigen::MatrixXcd::Identity(d, d);
    const Eigen::MatrixXcd ts = (t.matrix / kt) * (inv.matrix / ks) - Eigen::MatrixXcd::Identity(d, d);
    r.fwd_defect = Eigen::JacobiSVD<Eigen::MatrixXcd>(st).singularValues()(0);
    r.bwd_defect = Eigen::JacobiSVD<Eigen::MatrixXcd>(ts).singularValues()(0);
  }
  r.verdict = r.norm_T <= 1.0 + epsilon && r.norm_Tinv <= 1.0 + epsilon && r.fwd_defect <= epsilon &&
              r.bwd_defect <= epsilon;
  return r;
}

/// Smallest epsilon at which the alternate-variant report would pass.
inline double alternate_delta(const IsometryReport& r) {
  return std::max({r.norm_T - 1.0, r.norm_Tinv - 1.0, r.fwd_defect, r.bwd_defect, 0.0});
}

// --- nets ----------------------------------------------------------------------

struct NetOptions {
  std::size_t dimension_cap = 4;
  double min_epsilon = 0.1;
  double max_lattice_points = 2e8;
};

struct Net {
  double epsilon = 0;
  std::vector<Element> points;
  double lattice_spacing = 0;
  double cloud_radius = 0;   // every point of the slice is this close to a candidate
  double greedy_radius = 0;
  /// (1 + 8/epsilon)^{2n}: volumetric bound on the epsilon/4-covering number
  /// of the unit ball of l^2_n.
  double covering_bound = 0;
};

namespace detail {

inline constexpr std::size_t kMaxNetDims = 8;

/// Real coordinates r in R^{2d} -> complex coefficients.
inline Eigen::VectorXcd complexify(const Eigen::VectorXd& r) {
  const auto d = r.size() / 2;
  Eigen::VectorXcd c(d);
  for (Eigen::Index k = 0; k < d; ++k) c(k) = cplx(r(2 * k), r(2 * k + 1));
  return c;
}

inline Eigen::VectorXd realify(const Eigen::VectorXcd& c) {
  Eigen::VectorXd r(2 * c.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    r(2 * k) = c(k).real();
    r(2 * k + 1) = c(k).imag();
  }
  return r;
}

/// Operator norm of sum_k c_k b_k evaluated on the basis blocks without
/// building Elements.
class CoordinateBody {
 public:
  explicit CoordinateBody(const Subspace& e) {
    const auto& basis = e.basis();
    for (std::size_t b = 0; b < e.parent()->blocks.size(); ++b) {
      std::vector<Matrix> per;
      for (const auto& v : basis) per.push_back(v.block(b));
      blocks_.push_back(std::move(per));
      scratch_.push_back(Matrix::Zero(basis[0].block(b).rows(), basis[0].block(b).cols()));
    }
  }

  double op_norm(const Eigen::VectorXd& r) {
    double m = 0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      Matrix& acc = scratch_[b];
      acc.setZero();
      for (std::size_t k = 0; k < blocks_[b].size(); ++k)
        acc += blocks_[b][k] * cplx(r(2 * static_cast<Eigen::Index>(k)), r(2 * static_cast<Eigen::Index>(k) + 1));
      m = std::max(m, block_op_norm(acc));
    }
    return m;
  }

 private:
  std::vector<std::vector<Matrix>> blocks_;
  std::vector<Matrix> scratch_;
};

/// Uniform grid over R^{2d} (2d <= 8) for fixed-radius queries: a dense
/// cell array over [-extent, extent]^{2d} when that is small enough, a hash
/// map of cells otherwise.
class PointHash {
 public:
  PointHash(std::size_t dims, double cell, double extent = 1.5) : dims_(dims), cell_(cell) {
    side_ = static_cast<long>(std::ceil(2.0 * extent / cell)) + 4;
    origin_ = -extent - 2.0 * cell;
    const double cells = std::pow(static_cast<double>(side_), static_cast<double>(dims));
    if (cells <= 4e6) dense_.resize(static_cast<std::size_t>(cells));
  }

  void insert(const Eigen::VectorXd& p) {
    const auto id = static_cast<std::uint32_t>(coords_.size() / dims_);
    for (std::size_t i = 0; i < dims_; ++i) coords_.push_back(p(static_cast<Eigen::Index>(i)));
    bucket(cell_of(p)).push_back(id);
  }

  /// Distance from p to the nearest stored point among the cells within
  /// `reach` of p's cell (+inf if none). Stops early once a point at
  /// distance <= stop_below is seen.
  double nearest(const Eigen::VectorXd& p, int reach, double stop_below = -1.0) const {
    const Cell base = cell_of(p);
    double best2 = std::numeric_limits<double>::infinity();
    const double stop2 = stop_below < 0 ? -1.0 : stop_below * stop_below;
    scan(base, p, best2);
    if (best2 <= stop2) return std::sqrt(best2);
    // per-axis gap from p to the neighbouring cell at offset -reach..reach
    std::array<std::array<double, 5>, kMaxNetDims> gap{};
    for (std::size_t i = 0; i < dims_; ++i) {
      const double lo = origin_ + cell_ * static_cast<double>(base[i]);
      const double x = p(static_cast<Eigen::Index>(i));
      for (int o = -reach; o <= reach && reach <= 2; ++o) {
        const double g = o < 0 ? x - (lo + cell_ * (o + 1)) : o > 0 ? lo + cell_ * o - x : 0.0;
        gap[i][static_cast<std::size_t>(o + 2)] = g * g;
      }
    }
    Cell off{};
    for (std::size_t i = 0; i < dims_; ++i) off[i] = -reach;
    Cell c{};
    while (true) {
      bool centre = true;
      double box2 = 0;
      for (std::size_t i = 0; i < dims_; ++i) {
        c[i] = base[i] + off[i];
        centre = centre && off[i] == 0;
        if (reach <= 2) box2 += gap[i][static_cast<std::size_t>(off[i] + 2)];
      }
      if (!centre && box2 < best2) {
        scan(c, p, best2);
        if (best2 <= stop2) break;
      }
      std::size_t i = 0;
      while (i < dims_ && ++off[i] > reach) off[i++] = -reach;
      if (i == dims_) break;
    }
    return std::sqrt(best2);
  }

 private:
  using Cell = std::array<long, kMaxNetDims>;
  using Bucket = std::vector<std::uint32_t>;

  Cell cell_of(const Eigen::VectorXd& p) const {
    Cell c{};
    for (std::size_t i = 0; i < dims_; ++i)
      c[i] = static_cast<long>(std::floor((p(static_cast<Eigen::Index>(i)) - origin_) / cell_));
    return c;
  }
  bool in_dense(const Cell& c) const {
    for (std::size_t i = 0; i < dims_; ++i)
      if (c[i] < 0 || c[i] >= side_) return false;
    return true;
  }
  std::size_t dense_index(const Cell& c) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < dims_; ++i) k = k * static_cast<std::size_t>(side_) + static_cast<std::size_t>(c[i]);
    return k;
  }
  std::uint64_t key(const Cell& c) const {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (std::size_t i = 0; i < dims_; ++i) h = mix_seed(h ^ static_cast<std::uint64_t>(c[i]));
    return h;
  }
  Bucket& bucket(const Cell& c) {
    if (!dense_.empty() && in_dense(c)) return dense_[dense_index(c)];
    return sparse_[key(c)];
  }
  const Bucket* find(const Cell& c) const {
    if (!dense_.empty() && in_dense(c)) return &dense_[dense_index(c)];
    auto it = sparse_.find(key(c));
    return it == sparse_.end() ? nullptr : &it->second;
  }
  void scan(const Cell& c, const Eigen::VectorXd& p, double& best2) const {
    const Bucket* b = find(c);
    if (!b) return;
    for (std::uint32_t id : *b) {
      const double* q = coords_.data() + static_cast<std::size_t>(id) * dims_;
      double d2 = 0;
      for (std::size_t i = 0; i < dims_; ++i) {
        const double t = q[i] - p(static_cast<Eigen::Index>(i));
        d2 += t * t;
      }
      best2 = std::min(best2, d2);
    }
  }

  std::size_t dims_;
  double cell_;
  long side_ = 0;
  double origin_ = 0;
  std::vector<Bucket> dense_;
  std::unordered_map<std::uint64_t, Bucket> sparse_;
  std::vector<double> coords_;
};

/// C with ||x|| <= C ||x||_2 on the whole algebra: max_i sqrt(n_i / weight_i).
inline double operator_to_two_norm_constant(const TracialAlgebra& alg) {
  double c = 1.0;
  for (std::size_t i = 0; i < alg.blocks.size(); ++i)
    c = std::max(c, std::sqrt(static_cast<double>(alg.blocks[i]) / alg.weights[i]));
  return c;
}

}  // namespace detail

class NetError : public AlgebraError {
 public:
  using AlgebraError::AlgebraError;
};

/// epsilon/2-net of E cap (A)_1 in the 2-norm whose points have operator
/// norm below 1 - epsilon/4.
///
/// Candidates are the points of a cubic lattice over the coefficient ball:
/// lattice points in the slice as they are, lattice points just outside it
/// pulled radially onto its boundary. With ||.|| <= C||.||_2 every point of
/// the slice is within r_L + C r_L of a candidate (r_L the lattice covering
/// radius), and the spacing is chosen so that this is at most epsilon/4. A
/// single greedy sweep then opens a centre, scaled into the shrunken ball,
/// at every candidate farther than epsilon/2 - epsilon/4 from all centres.
inline Net build_net(const Subspace& e, double epsilon, const NetOptions& opt = {}) {
  if (e.dim() > opt.dimension_cap)
    throw NetError("build_net: dimension " + std::to_string(e.dim()) + " exceeds cap " +
                   std::to_string(opt.dimension_cap));
  if (2 * e.dim() > detail::kMaxNetDims) throw NetError("build_net: dimension above 4 is not supported");
  if (!(epsilon >= opt.min_epsilon))
    throw NetError("build_net: epsilon " + std::to_string(epsilon) + " below minimum " +
                   std::to_string(opt.min_epsilon));
  Net net;
  net.epsilon = epsilon;
  const std::size_t dims = 2 * e.dim();
  net.covering_bound = std::pow(1.0 + 8.0 / epsilon, static_cast<double>(dims));
  if (epsilon / 2.0 >= 1.0) {
    // E cap (A)_1 lies in the unit 2-ball, so {0} already covers it.
    net.points.push_back(Element::zero(e.parent()));
    return net;
  }
  const double c_op = detail::operator_to_two_norm_constant(*e.parent());
  const double cloud_radius = epsilon / 4.0 * (1.0 - 1e-6);
  const double lattice_radius = cloud_radius / (1.0 + c_op);
  const double h = 2.0 * lattice_radius / std::sqrt(static_cast<double>(dims));
  const double rho = epsilon / 2.0 - cloud_radius;
  const double shrink = (1.0 - epsilon / 4.0) * (1.0 - 1e-9);
  net.lattice_spacing = h;
  net.cloud_radius = cloud_radius;
  net.greedy_radius = rho;

  const long m = static_cast<long>(std::ceil((1.0 + lattice_radius) / h));
  if (std::pow(2.0 * static_cast<double>(m) + 1.0, static_cast<double>(dims)) > opt.max_lattice_points)
    throw NetError("build_net: lattice too large for epsilon " + std::to_string(epsilon) + " in dimension " +
                   std::to_string(e.dim()));

  detail::CoordinateBody body(e);
  detail::PointHash centres(dims, rho, 1.0 + lattice_radius);
  std::vector<Eigen::VectorXd> centre_coords;
  auto open_centre = [&](Eigen::VectorXd c) {
    centres.insert(c);
    centre_coords.push_back(std::move(c));
  };
  // Consecutive lattice points are usually covered by a centre opened recently.
  auto covered = [&](const Eigen::VectorXd& p) {
    const std::size_t n = centre_coords.size();
    for (std::size_t k = n; k > 0 && k + 8 > n; --k)
      if ((centre_coords[k - 1] - p).squaredNorm() <= rho * rho) return true;
    return centres.nearest(p, 1, rho) <= rho;
  };
  auto shrunk = [&](const Eigen::VectorXd& p, double on) {
    return on < shrink ? p : Eigen::VectorXd(p * (shrink / on));
  };

  std::vector<long> idx(dims, -m);
  Eigen::VectorXd g(static_cast<Eigen::Index>(dims));
  const double outer2 = std::pow(1.0 + lattice_radius, 2);
  const double pull_limit = 1.0 + c_op * lattice_radius;
  while (true) {
    double r2 = 0;
    for (std::size_t i = 0; i < dims; ++i) {
      g(static_cast<Eigen::Index>(i)) = h * static_cast<double>(idx[i]);
      r2 += g(static_cast<Eigen::Index>(i)) * g(static_cast<Eigen::Index>(i));
    }
    if (r2 <= outer2) {
      const double on = body.op_norm(g);
      if (on <= 1.0) {
        if (!covered(g)) open_centre(shrunk(g, on));
      } else if (on <= pull_limit) {
        const Eigen::VectorXd q = g / on;
        if (!covered(q)) open_centre(shrunk(q, 1.0));
      }
    }
    std::size_t i = 0;
    while (i < dims && ++idx[i] > m) idx[i++] = -m;
    if (i == dims) break;
  }
  for (const auto& c : centre_coords) net.points.push_back(e.element(detail::complexify(c)));
  return net;
}

struct CoverCheck {
  std::size_t samples = 0;
  double worst_distance = 0;
  bool passed = false;
};

/// Probabilistic check that every point of E cap (A)_1 lies within epsilon/2
/// of the net: half the samples uniform in the slice (rejection from the
/// coefficient ball), half on its boundary.
inline CoverCheck check_net_cover(const Subspace& e, const Net& net, std::size_t samples, std::uint64_t seed) {
  const std::size_t dims = 2 * e.dim();
  const double radius = net.epsilon / 2.0;
  detail::PointHash hash(dims, radius);
  for (const auto& p : net.points) hash.insert(detail::realify(e.coordinates(p)));
  detail::CoordinateBody body(e);
  Rng rng = make_rng(seed, 0xc0fe);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CoverCheck out;
  Eigen::VectorXd p(static_cast<Eigen::Index>(dims));
  while (out.samples < samples) {
    for (std::size_t i = 0; i < dims; ++i) p(static_cast<Eigen::Index>(i)) = normal(rng);
    p /= p.norm();
    if (out.samples % 2 == 0) {
      p /= body.op_norm(p);  // boundary sample
    } else {
      p *= std::pow(unit(rng), 1.0 / static_cast<double>(dims));
      if (body.op_norm(p) > 1.0) continue;
    }
    // Beyond one cell the distance exceeds the radius, which already fails.
    const double d = hash.nearest(p, 1);
    out.worst_distance = std::max(out.worst_distance, d);
    ++out.samples;
  }
  out.passed = out.worst_distance <= radius;
  return out;
}

}  // namespace eflab
