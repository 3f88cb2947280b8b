#pragma once

// Small dense helpers over row-major square matrices. Templated on the
// scalar so the enumeration oracle can run the same code on exact rationals.

#include <cstddef>
#include <utility>
#include <vector>

namespace pmc::linalg {

template <class T>
std::vector<T> multiply(const std::vector<T>& a, const std::vector<T>& b, std::size_t n) {
  std::vector<T> c(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < n; ++l) {
      const T& ail = a[i * n + l];
      if (ail == T(0)) continue;
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += ail * b[l * n + j];
    }
  }
  return c;
}

template <class T>
std::vector<T> identity(std::size_t n) {
  std::vector<T> id(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i) id[i * n + i] = T(1);
  return id;
}

template <class T>
std::vector<T> power(std::vector<T> a, std::size_t n, unsigned exponent) {
  std::vector<T> result = identity<T>(n);
  while (exponent > 0) {
    if (exponent & 1U) result = multiply(result, a, n);
    exponent >>= 1U;
    if (exponent > 0) a = multiply(a, a, n);
  }
  return result;
}

template <class T>
T abs_value(const T& x) {
  return x < T(0) ? T(-x) : x;
}

/// Solves pi P = pi, sum(pi) = 1 by Gaussian elimination on (P^T - I) with
/// the last equation replaced by the normalisation. Returns false if the
/// system is singular (chain not irreducible).
template <class T>
bool solve_stationary(const std::vector<T>& p, std::size_t n, std::vector<T>& pi) {
  // Augmented system A x = b, A = P^T - I, last row all ones.
  std::vector<T> a(n * (n + 1), T(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i * (n + 1) + j] = p[j * n + i] - (i == j ? T(1) : T(0));
  }
  for (std::size_t j = 0; j < n; ++j) a[(n - 1) * (n + 1) + j] = T(1);
  a[(n - 1) * (n + 1) + n] = T(1);

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (abs_value(a[r * (n + 1) + col]) > abs_value(a[pivot * (n + 1) + col])) pivot = r;
    }
    if (a[pivot * (n + 1) + col] == T(0)) return false;
    if (pivot != col) {
      for (std::size_t j = 0; j <= n; ++j) std::swap(a[pivot * (n + 1) + j], a[col * (n + 1) + j]);
    }
    const T diag = a[col * (n + 1) + col];
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const T factor = a[r * (n + 1) + col] / diag;
      if (factor == T(0)) continue;
      for (std::size_t j = col; j <= n; ++j) a[r * (n + 1) + j] -= factor * a[col * (n + 1) + j];
    }
  }
  pi.assign(n, T(0));
  for (std::size_t i = 0; i < n; ++i) pi[i] = a[i * (n + 1) + n] / a[i * (n + 1) + i];
  return true;
}

}  // namespace pmc::linalg
