#ifndef BOSONIC_CORE_HPP
#define BOSONIC_CORE_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bosonic {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ProjectionFailure : public Error {
 public:
  using Error::Error;
};

class OffManifold : public Error {
 public:
  using Error::Error;
};

class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Small fixed-size linear algebra in the ambient space R^Q
// ---------------------------------------------------------------------------

template <std::size_t Q>
using Point = std::array<double, Q>;

template <std::size_t Q>
using Matrix = std::array<std::array<double, Q>, Q>;

/// Coefficients T[k][i][j] of a trilinear form on R^Q.
template <std::size_t Q>
using Tensor3 = std::array<Matrix<Q>, Q>;

template <std::size_t Q>
constexpr Point<Q> zero_point() {
  Point<Q> p{};
  p.fill(0.0);
  return p;
}

template <std::size_t Q>
constexpr Matrix<Q> zero_matrix() {
  Matrix<Q> m{};
  for (auto& row : m) row.fill(0.0);
  return m;
}

template <std::size_t Q>
constexpr Point<Q> unit_vector(std::size_t k) {
  Point<Q> p = zero_point<Q>();
  p[k] = 1.0;
  return p;
}

template <std::size_t Q>
inline double dot(const Point<Q>& a, const Point<Q>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < Q; ++i) s += a[i] * b[i];
  return s;
}

template <std::size_t Q>
inline double norm2(const Point<Q>& a) {
  return dot(a, a);
}

template <std::size_t Q>
inline double norm(const Point<Q>& a) {
  return std::sqrt(norm2(a));
}

template <std::size_t Q>
inline Point<Q> operator+(Point<Q> a, const Point<Q>& b) {
  for (std::size_t i = 0; i < Q; ++i) a[i] += b[i];
  return a;
}

template <std::size_t Q>
inline Point<Q> operator-(Point<Q> a, const Point<Q>& b) {
  for (std::size_t i = 0; i < Q; ++i) a[i] -= b[i];
  return a;
}

template <std::size_t Q>
inline Point<Q> operator-(Point<Q> a) {
  for (auto& x : a) x = -x;
  return a;
}

template <std::size_t Q>
inline Point<Q> operator*(double s, Point<Q> a) {
  for (auto& x : a) x *= s;
  return a;
}

template <std::size_t Q>
inline Point<Q>& operator+=(Point<Q>& a, const Point<Q>& b) {
  for (std::size_t i = 0; i < Q; ++i) a[i] += b[i];
  return a;
}

template <std::size_t Q>
inline Point<Q>& operator-=(Point<Q>& a, const Point<Q>& b) {
  for (std::size_t i = 0; i < Q; ++i) a[i] -= b[i];
  return a;
}

template <std::size_t Q>
inline Point<Q> mat_vec(const Matrix<Q>& m, const Point<Q>& v) {
  Point<Q> r = zero_point<Q>();
  for (std::size_t i = 0; i < Q; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < Q; ++j) s += m[i][j] * v[j];
    r[i] = s;
  }
  return r;
}

template <std::size_t Q>
inline Matrix<Q> mat_mul(const Matrix<Q>& a, const Matrix<Q>& b) {
  Matrix<Q> r = zero_matrix<Q>();
  for (std::size_t i = 0; i < Q; ++i)
    for (std::size_t k = 0; k < Q; ++k)
      for (std::size_t j = 0; j < Q; ++j) r[i][j] += a[i][k] * b[k][j];
  return r;
}

template <std::size_t Q>
inline Matrix<Q> transpose(const Matrix<Q>& a) {
  Matrix<Q> r{};
  for (std::size_t i = 0; i < Q; ++i)
    for (std::size_t j = 0; j < Q; ++j) r[i][j] = a[j][i];
  return r;
}

/// xi1^T m xi2
template <std::size_t Q>
inline double bilinear(const Matrix<Q>& m, const Point<Q>& xi1, const Point<Q>& xi2) {
  return dot(xi1, mat_vec(m, xi2));
}

/// w^k = T[k][i][j] a^i b^j
template <std::size_t Q>
inline Point<Q> contract_last_two(const Tensor3<Q>& t, const Point<Q>& a, const Point<Q>& b) {
  Point<Q> w = zero_point<Q>();
  for (std::size_t k = 0; k < Q; ++k) w[k] = bilinear(t[k], a, b);
  return w;
}

template <std::size_t Q>
inline double max_abs(const Matrix<Q>& m) {
  double r = 0.0;
  for (const auto& row : m)
    for (double x : row) r = std::max(r, std::abs(x));
  return r;
}

template <std::size_t Q>
inline bool all_finite(const Point<Q>& p) {
  return std::all_of(p.begin(), p.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// Deterministic reductions
// ---------------------------------------------------------------------------

/// Pairwise (tree) summation with a fixed split rule. The tree shape depends
/// only on the length, so results are bit-reproducible regardless of how the
/// summands were produced.
inline double pairwise_sum(std::span<const double> xs) {
  constexpr std::size_t kLeaf = 16;
  if (xs.size() <= kLeaf) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

// ---------------------------------------------------------------------------
// Node-parallel loops
// ---------------------------------------------------------------------------

namespace detail {
inline std::atomic<int>& thread_count() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

inline void set_num_threads(int n) { detail::thread_count().store(std::max(1, n)); }
inline int num_threads() { return detail::thread_count().load(); }

/// Runs fn(i) for i in [0, n). Each index is written by exactly one worker,
/// so outputs do not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(num_threads());
  if (workers <= 1 || n < 4096) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

}  // namespace bosonic

#endif  // BOSONIC_CORE_HPP
