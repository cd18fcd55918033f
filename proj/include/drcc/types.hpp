#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace drcc {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Raised when an integration or factorization produces non-finite or
/// otherwise unusable numbers.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic substream seed from a master seed and a tuple of indices.
/// Used so that parallel work gets the same random numbers regardless of
/// scheduling.
template <class... Ix>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Ix... ix) {
    std::uint64_t h = mix64(seed);
    ((h = mix64(h ^ static_cast<std::uint64_t>(ix))), ...);
    return h;
}

inline Rng make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

template <int N>
Eigen::Matrix<double, N, 1> standard_normal(Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::Matrix<double, N, 1> z;
    for (int i = 0; i < N; ++i) z(i) = nd(rng);
    return z;
}

/// Symmetric square root S with S*S^T == M for a symmetric PSD matrix.
/// Negative eigenvalues within round-off are clipped to zero.
template <int N>
Eigen::Matrix<double, N, N> psd_sqrt(const Eigen::Matrix<double, N, N>& m) {
    using MatN = Eigen::Matrix<double, N, N>;
    const MatN sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<MatN> es(sym);
    const auto lambda = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

/// True when M is symmetric and its smallest eigenvalue is >= -tol * ||M||.
template <int N>
bool is_symmetric_psd(const Eigen::Matrix<double, N, N>& m, double rel_tol = 1e-10) {
    if (!m.allFinite()) return false;
    const double scale = std::max(m.norm(), 1e-300);
    if ((m - m.transpose()).norm() > 1e-9 * scale) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(0.5 * (m + m.transpose()),
                                                                  Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -rel_tol * scale;
}

}  // namespace drcc
