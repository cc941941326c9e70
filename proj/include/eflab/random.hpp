#pragma once

// Seeded random instances: Haar unitaries (Ginibre + QR with phase fix),
// Ginibre elements, and contractions with prescribed 2-norm ranges.

#include <cstdint>
#include <random>

#include "eflab/algebra.hpp"

namespace eflab {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) { return Rng(derive_seed(seed, stream)); }

/// Complex Gaussian matrix with E|z_ij|^2 = 1.
inline Matrix ginibre_block(Rng& rng, int n) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix z(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      z(i, j) = cplx(re, im);
    }
  return z;
}

inline Matrix haar_block(Rng& rng, int n) {
  Eigen::HouseholderQR<Matrix> qr(ginibre_block(rng, n));
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < n; ++k) {
    const cplx d = r(k, k);
    const double a = std::abs(d);
    q.col(k) *= a > 0 ? d / a : cplx(1.0);
  }
  return q;
}

inline UnitaryCertificate haar_unitary(const AlgebraRef& alg, Rng& rng) {
  std::vector<Matrix> b;
  for (int n : alg->blocks) b.push_back(haar_block(rng, n));
  return certify(Element(alg, std::move(b)));
}

/// Deterministic under a fixed seed.
inline UnitaryCertificate haar_unitary(const AlgebraRef& alg, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return haar_unitary(alg, rng);
}

/// Ginibre element normalized so that E||x||_2^2 = 1.
inline Element ginibre_element(const AlgebraRef& alg, Rng& rng) {
  std::vector<Matrix> b;
  for (int n : alg->blocks) b.push_back(ginibre_block(rng, n));
  return Element(alg, std::move(b));
}

namespace detail {

inline std::vector<Eigen::VectorXd> sample_singular_values(const AlgebraRef& alg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> s;
  for (int n : alg->blocks) {
    Eigen::VectorXd v(n);
    for (int k = 0; k < n; ++k) {
      const double pick = unit(rng);
      // Mixture keeps rank-deficient and exactly unitary directions in play.
      v(k) = pick < 0.15 ? 0.0 : pick < 0.3 ? 1.0 : unit(rng);
    }
    s.push_back(v);
  }
  return s;
}

inline double two_norm_of_spectrum(const AlgebraRef& alg, const std::vector<Eigen::VectorXd>& s) {
  double t = 0;
  for (std::size_t b = 0; b < s.size(); ++b) t += alg->weights[b] * s[b].squaredNorm() / alg->blocks[b];
  return std::sqrt(t);
}

inline Element assemble(const AlgebraRef& alg, Rng& rng, const std::vector<Eigen::VectorXd>& s) {
  std::vector<Matrix> blocks;
  for (std::size_t b = 0; b < s.size(); ++b) {
    const int n = alg->blocks[b];
    const Matrix u = haar_block(rng, n);
    const Matrix v = haar_block(rng, n);
    blocks.push_back(u * s[b].cast<cplx>().asDiagonal() * v.adjoint());
  }
  return Element(alg, std::move(blocks));
}

}  // namespace detail

/// Contraction U diag(s) V* with singular values drawn from a mixture of
/// {0}, {1} and uniform [0,1].
inline Element random_contraction(const AlgebraRef& alg, Rng& rng) {
  return detail::assemble(alg, rng, detail::sample_singular_values(alg, rng));
}

/// Contraction with ||y||_2 >= min_two_norm: singular values are pulled
/// towards 1 (s -> 1 - c(1 - s)) until the 2-norm reaches a target drawn
/// uniformly from [min_two_norm, 1].
inline Element random_contraction_with_two_norm(const AlgebraRef& alg, double min_two_norm, Rng& rng) {
  auto s = detail::sample_singular_values(alg, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lo = std::clamp(min_two_norm, 0.0, 1.0);
  const double target = lo + (1.0 - lo) * unit(rng);
  if (detail::two_norm_of_spectrum(alg, s) < target) {
    auto pulled = [&](double c) {
      auto t = s;
      for (auto& v : t) v = (1.0 - c * (1.0 - v.array())).matrix();
      return t;
    };
    double clo = 0.0, chi = 1.0;  // norm(pulled(0)) = 1 >= target > norm(pulled(1))
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (clo + chi);
      if (detail::two_norm_of_spectrum(alg, pulled(mid)) >= target)
        clo = mid;
      else
        chi = mid;
    }
    s = pulled(clo);
  }
  return detail::assemble(alg, rng, s);
}

}  // namespace eflab
