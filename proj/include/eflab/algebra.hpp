#pragma once

// Finite-dimensional tracial *-algebras: direct sums of full matrix blocks
// with a weighted normalized trace, their 2-norm geometry, and the polar /
// unitary constructions used throughout the library.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace eflab {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

/// Default tolerance for algebraic identities (u*u = 1, reconstructions).
inline constexpr double kIdentityTol = 1e-10;

class AlgebraError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A finite direct sum of matrix blocks M_{n_1} + ... + M_{n_k} with trace
/// tr(x) = sum_i weight_i * Tr(x_i) / n_i.
struct TracialAlgebra {
  std::vector<int> blocks;
  std::vector<double> weights;
  std::string label;

  std::size_t block_count() const { return blocks.size(); }

  /// Complex linear dimension sum n_i^2.
  std::size_t complex_dimension() const {
    std::size_t d = 0;
    for (int n : blocks) d += static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    return d;
  }
  std::size_t real_dimension() const { return 2 * complex_dimension(); }

  bool same_structure(const TracialAlgebra& other) const {
    return blocks == other.blocks && weights == other.weights;
  }
};

using AlgebraRef = std::shared_ptr<const TracialAlgebra>;

namespace detail {

inline double parse_weight(std::string_view tok, std::string_view spec) {
  auto fail = [&] {
    return AlgebraError("malformed algebra spec '" + std::string(spec) + "': bad weight '" +
                        std::string(tok) + "'");
  };
  if (tok.empty()) throw fail();
  auto parse_decimal = [&](std::string_view s) {
    if (s.empty()) throw fail();
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(std::string(s), &used);
    } catch (const std::exception&) {
      throw fail();
    }
    if (used != s.size()) throw fail();
    return v;
  };
  // p/q rationals are accepted alongside decimals ("C+C:1/3,2/3").
  if (auto slash = tok.find('/'); slash != std::string_view::npos) {
    double num = parse_decimal(tok.substr(0, slash));
    double den = parse_decimal(tok.substr(slash + 1));
    if (den == 0) throw fail();
    return num / den;
  }
  return parse_decimal(tok);
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

/// Parses `block ("+" block)* (":" weight ("," weight)*)?` with
/// `block := "M" int | "C"`. Omitted weights default to uniform 1/k.
inline AlgebraRef make_algebra(std::string_view spec_text) {
  const std::string spec = detail::trim(spec_text);
  if (spec.empty()) throw AlgebraError("malformed algebra spec: empty");
  auto colon = spec.find(':');
  std::string block_part = spec.substr(0, colon);
  std::string weight_part = colon == std::string::npos ? "" : spec.substr(colon + 1);

  TracialAlgebra alg;
  std::stringstream bs(block_part);
  std::string tok;
  while (std::getline(bs, tok, '+')) {
    tok = detail::trim(tok);
    if (tok == "C") {
      alg.blocks.push_back(1);
    } else if (tok.size() >= 2 && tok[0] == 'M' &&
               std::all_of(tok.begin() + 1, tok.end(),
                           [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      int n = std::stoi(tok.substr(1));
      if (n <= 0) throw AlgebraError("zero block size in algebra spec '" + spec + "'");
      alg.blocks.push_back(n);
    } else {
      throw AlgebraError("malformed algebra spec '" + spec + "': bad block '" + tok + "'");
    }
  }
  if (alg.blocks.empty() || block_part.back() == '+')
    throw AlgebraError("malformed algebra spec '" + spec + "'");

  if (colon == std::string::npos) {
    alg.weights.assign(alg.blocks.size(), 1.0 / static_cast<double>(alg.blocks.size()));
  } else {
    std::stringstream ws(weight_part);
    while (std::getline(ws, tok, ',')) alg.weights.push_back(detail::parse_weight(detail::trim(tok), spec));
    if (!weight_part.empty() && weight_part.back() == ',')
      throw AlgebraError("malformed algebra spec '" + spec + "': trailing comma");
    if (alg.weights.size() != alg.blocks.size())
      throw AlgebraError("malformed algebra spec '" + spec + "': " + std::to_string(alg.blocks.size()) +
                         " blocks but " + std::to_string(alg.weights.size()) + " weights");
    for (double w : alg.weights)
      if (!(w > 0)) throw AlgebraError("algebra spec '" + spec + "': weights must be positive");
    double sum = std::accumulate(alg.weights.begin(), alg.weights.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-12)
      throw AlgebraError("algebra spec '" + spec + "': weights sum to " + std::to_string(sum) + ", not 1");
  }
  alg.label = spec;
  return std::make_shared<const TracialAlgebra>(std::move(alg));
}

/// Block-diagonal element of a TracialAlgebra.
class Element {
 public:
  Element(AlgebraRef parent, std::vector<Matrix> blocks) : parent_(std::move(parent)), blocks_(std::move(blocks)) {
    if (!parent_) throw AlgebraError("element without parent algebra");
    if (blocks_.size() != parent_->blocks.size())
      throw AlgebraError("element has " + std::to_string(blocks_.size()) + " blocks, algebra " + parent_->label +
                         " has " + std::to_string(parent_->blocks.size()));
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto n = parent_->blocks[i];
      if (blocks_[i].rows() != n || blocks_[i].cols() != n)
        throw AlgebraError("block " + std::to_string(i) + " has wrong shape for algebra " + parent_->label);
    }
  }

  static Element zero(const AlgebraRef& parent) {
    std::vector<Matrix> b;
    for (int n : parent->blocks) b.push_back(Matrix::Zero(n, n));
    return Element(parent, std::move(b));
  }
  static Element identity(const AlgebraRef& parent) {
    std::vector<Matrix> b;
    for (int n : parent->blocks) b.push_back(Matrix::Identity(n, n));
    return Element(parent, std::move(b));
  }
  /// Scalar multiple of the identity.
  static Element scalar(const AlgebraRef& parent, cplx c) { return identity(parent) * c; }
  /// Diagonal element whose entries run through the blocks in order.
  static Element diagonal(const AlgebraRef& parent, const std::vector<cplx>& entries) {
    std::size_t total = 0;
    for (int n : parent->blocks) total += static_cast<std::size_t>(n);
    if (entries.size() != total)
      throw AlgebraError("diagonal needs " + std::to_string(total) + " entries for " + parent->label);
    Element e = zero(parent);
    std::size_t k = 0;
    for (std::size_t b = 0; b < e.blocks_.size(); ++b)
      for (int i = 0; i < parent->blocks[b]; ++i) e.blocks_[b](i, i) = entries[k++];
    return e;
  }
  /// Matrix unit E_{ij} (1-based) in block `block` (0-based).
  static Element matrix_unit(const AlgebraRef& parent, int i, int j, std::size_t block = 0) {
    if (block >= parent->blocks.size()) throw AlgebraError("matrix unit: no block " + std::to_string(block));
    const int n = parent->blocks[block];
    if (i < 1 || j < 1 || i > n || j > n)
      throw AlgebraError("matrix unit E" + std::to_string(i) + std::to_string(j) + " outside block of size " +
                         std::to_string(n));
    Element e = zero(parent);
    e.blocks_[block](i - 1, j - 1) = 1.0;
    return e;
  }

  const TracialAlgebra& algebra() const { return *parent_; }
  const AlgebraRef& parent() const { return parent_; }
  const std::vector<Matrix>& blocks() const { return blocks_; }
  const Matrix& block(std::size_t i) const { return blocks_[i]; }

  bool same_parent(const Element& other) const {
    return parent_ == other.parent_ || parent_->same_structure(*other.parent_);
  }

  Element adjoint() const {
    std::vector<Matrix> b;
    b.reserve(blocks_.size());
    for (const auto& m : blocks_) b.push_back(m.adjoint());
    return Element(parent_, std::move(b));
  }

  Element& operator+=(const Element& o) {
    require_same(o, "+");
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] += o.blocks_[i];
    return *this;
  }
  Element& operator-=(const Element& o) {
    require_same(o, "-");
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] -= o.blocks_[i];
    return *this;
  }
  Element& operator*=(cplx c) {
    for (auto& m : blocks_) m *= c;
    return *this;
  }
  friend Element operator+(Element a, const Element& b) { return a += b; }
  friend Element operator-(Element a, const Element& b) { return a -= b; }
  friend Element operator*(Element a, cplx c) { return a *= c; }
  friend Element operator*(cplx c, Element a) { return a *= c; }
  friend Element operator*(Element a, double c) { return a *= cplx(c); }
  friend Element operator*(double c, Element a) { return a *= cplx(c); }
  Element operator-() const { return *this * cplx(-1.0); }

  /// Exact (bitwise) equality of all entries.
  friend bool operator==(const Element& a, const Element& b) {
    if (!a.same_parent(b)) return false;
    for (std::size_t i = 0; i < a.blocks_.size(); ++i)
      if (a.blocks_[i] != b.blocks_[i]) return false;
    return true;
  }

  void require_same(const Element& o, const char* op) const {
    if (!same_parent(o))
      throw AlgebraError(std::string("mismatched parents in ") + op + ": " + parent_->label + " vs " +
                         o.parent_->label);
  }

 private:
  AlgebraRef parent_;
  std::vector<Matrix> blocks_;
};

/// Blockwise product; with `opposite` set the product of A^op, i.e. b*a.
inline Element mul(const Element& a, const Element& b, bool opposite = false) {
  a.require_same(b, "mul");
  const Element& l = opposite ? b : a;
  const Element& r = opposite ? a : b;
  std::vector<Matrix> out;
  out.reserve(l.blocks().size());
  for (std::size_t i = 0; i < l.blocks().size(); ++i) out.push_back(l.block(i) * r.block(i));
  return Element(a.parent(), std::move(out));
}

/// a o b = (ab + ba) / 2.
inline Element jordan_product(const Element& a, const Element& b) {
  return (mul(a, b) + mul(b, a)) * 0.5;
}

/// Normalized trace.
inline cplx trace(const Element& a) {
  const auto& alg = a.algebra();
  cplx t = 0;
  for (std::size_t i = 0; i < alg.blocks.size(); ++i)
    t += alg.weights[i] * a.block(i).trace() / static_cast<double>(alg.blocks[i]);
  return t;
}

/// <a, b> = tr(b* a).
inline cplx trace_inner(const Element& a, const Element& b) {
  a.require_same(b, "trace_inner");
  const auto& alg = a.algebra();
  cplx t = 0;
  for (std::size_t i = 0; i < alg.blocks.size(); ++i) {
    // Tr(B* A) = sum_{jk} conj(B_jk) A_jk
    const cplx s = (b.block(i).conjugate().cwiseProduct(a.block(i))).sum();
    t += alg.weights[i] * s / static_cast<double>(alg.blocks[i]);
  }
  return t;
}

namespace detail {

inline double block_op_norm(const Matrix& m) {
  if (m.rows() == 1) return std::abs(m(0, 0));
  if (m.rows() == 2) {
    // largest eigenvalue of the Hermitian m*m = [[a, b], [conj(b), d]],
    // (a + d)/2 + hypot((a - d)/2, |b|), free of cancellation
    const double a = std::norm(m(0, 0)) + std::norm(m(1, 0));
    const double d = std::norm(m(0, 1)) + std::norm(m(1, 1));
    const cplx b = std::conj(m(0, 0)) * m(0, 1) + std::conj(m(1, 0)) * m(1, 1);
    return std::sqrt(0.5 * (a + d) + std::hypot(0.5 * (a - d), std::abs(b)));
  }
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace detail

inline double two_norm(const Element& a) {
  const auto& alg = a.algebra();
  double s = 0;
  for (std::size_t i = 0; i < alg.blocks.size(); ++i)
    s += alg.weights[i] * a.block(i).squaredNorm() / static_cast<double>(alg.blocks[i]);
  return std::sqrt(s);
}

/// Largest singular value over the blocks.
inline double op_norm(const Element& a) {
  double m = 0;
  for (const auto& b : a.blocks()) m = std::max(m, detail::block_op_norm(b));
  return m;
}

struct Norms {
  double two_norm;
  double op_norm;
};

inline Norms norms(const Element& a) { return {two_norm(a), op_norm(a)}; }

inline double distance(const Element& a, const Element& b) { return two_norm(a - b); }

/// ||u*u - 1||_2
inline double unitary_defect(const Element& u) {
  return two_norm(mul(u.adjoint(), u) - Element::identity(u.parent()));
}

struct UnitaryCertificate {
  Element element;
  double defect;

  bool certified(double tol = kIdentityTol) const { return defect <= tol; }
};

inline UnitaryCertificate certify(Element u) {
  const double d = unitary_defect(u);
  return {std::move(u), d};
}

struct PolarDecomposition {
  UnitaryCertificate unitary;
  Element positive;
};

namespace detail {

/// Unitary polar part and positive part of one square block, x = u p.
/// Kernel directions are paired by the unitary closest to the identity
/// between ker(x) and range(x)^perp, so positive input yields u = 1.
inline std::pair<Matrix, Matrix> block_polar(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix& W = svd.matrixU();
  const Matrix& V = svd.matrixV();
  const auto& s = svd.singularValues();
  const double smax = n > 0 ? s(0) : 0.0;
  const double rank_tol = std::max(1.0, smax) * 1e-13 * static_cast<double>(n);
  Eigen::Index r = 0;
  while (r < n && s(r) > rank_tol) ++r;

  Matrix u = W.leftCols(r) * V.leftCols(r).adjoint();
  if (r < n) {
    const Matrix L = W.rightCols(n - r);  // range(x)^perp
    const Matrix K = V.rightCols(n - r);  // ker(x)
    const Matrix overlap = L.adjoint() * K;
    Eigen::JacobiSVD<Matrix> inner(overlap, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix q = inner.matrixU() * inner.matrixV().adjoint();
    u += L * q * K.adjoint();
  }
  Matrix p = V * s.cast<cplx>().asDiagonal() * V.adjoint();
  p = (p + p.adjoint()).eval() * 0.5;
  return {std::move(u), std::move(p)};
}

}  // namespace detail

/// x = u |x| with u unitary (finite dimension always admits one).
inline PolarDecomposition polar(const Element& x) {
  std::vector<Matrix> us, ps;
  for (const auto& b : x.blocks()) {
    auto [u, p] = detail::block_polar(b);
    us.push_back(std::move(u));
    ps.push_back(std::move(p));
  }
  return {certify(Element(x.parent(), std::move(us))), Element(x.parent(), std::move(ps))};
}

/// Minimizer of ||x - w||_2 over unitaries w: the polar part of x.
inline UnitaryCertificate nearest_unitary(const Element& x) { return polar(x).unitary; }

/// |x| = (x*x)^{1/2}
inline Element absolute_value(const Element& x) { return polar(x).positive; }

struct UnitaryPair {
  UnitaryCertificate first;
  UnitaryCertificate second;
};

/// Writes a contraction as (w1 + w2)/2 with w1 = v(|x| + i sqrt(1-|x|^2)) and
/// w2 = v(|x| - i sqrt(1-|x|^2)), where x = v|x|.
inline UnitaryPair avg_two_unitaries(const Element& x, double contraction_tol = 1e-12) {
  const double on = op_norm(x);
  if (on > 1.0 + contraction_tol)
    throw AlgebraError("avg_two_unitaries: not a contraction (operator norm " + std::to_string(on) + ")");
  std::vector<Matrix> w1s, w2s;
  for (const auto& b : x.blocks()) {
    auto [v, p] = detail::block_polar(b);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(p);
    const Matrix& Q = eig.eigenvectors();
    const auto& mu = eig.eigenvalues();
    Eigen::VectorXcd root(mu.size());
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
      const double m = std::clamp(mu(k), 0.0, 1.0);
      root(k) = std::sqrt(std::max(0.0, 1.0 - m * m));
    }
    // Keep p itself as the real part so the average reproduces x to rounding
    // even when eigenvalues were clamped.
    const Matrix s = Q * root.asDiagonal() * Q.adjoint();
    const Matrix i_s = cplx(0, 1) * s;
    w1s.push_back(v * (p + i_s));
    w2s.push_back(v * (p - i_s));
  }
  return {certify(Element(x.parent(), std::move(w1s))), certify(Element(x.parent(), std::move(w2s)))};
}

/// Blockwise transpose: a *-anti-automorphism and 2-norm isometry.
inline Element transpose(const Element& x) {
  std::vector<Matrix> b;
  for (const auto& m : x.blocks()) b.push_back(m.transpose());
  return Element(x.parent(), std::move(b));
}

}  // namespace eflab
