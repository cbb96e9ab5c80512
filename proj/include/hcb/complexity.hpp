#pragma once
// Hardness measure m(v) for probability vectors and the index sets defined
// from it.
//
// For v in [0,1]^N let theta_j = min(v_j, 1-v_j) measure how close entry j is
// to the {0,1} boundary, and let I_s(v) = { j : theta_j < 1/s }. The count
// f(s) = |I_s(v)| is a non-increasing, right-continuous step function of s
// that only drops at the reciprocals u_j = 1/theta_j. m(v) is the least s > 0
// with s >= f(s); it is attained either at one of those drop points or where
// the identity line crosses a plateau at integer height, so a scan over the
// plateaus finds it exactly.
//
// Membership tests are canonicalized in reciprocal space (u_j > s rather than
// theta_j < 1/s, identical in real arithmetic) so that the set, the step
// function, and the minimizer share one floating-point convention; entries
// with theta_j = 0 belong to I_s for every s. Entries exactly 0 or 1 are
// allowed: estimated vectors can hit the boundary even though model
// parameters may not.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcb {

inline double boundary_gap(double v) { return v < 1.0 - v ? v : 1.0 - v; }

namespace detail {

inline void check_probability_vector(const std::vector<double>& v,
                                     const char* who) {
  if (v.empty()) throw std::invalid_argument(std::string(who) + ": empty vector");
  for (double x : v)
    if (!(x >= 0.0 && x <= 1.0))
      throw std::invalid_argument(std::string(who) + ": entry outside [0,1]");
}

// Reciprocal drop points 1/theta_j for entries with theta_j > 0; the count of
// theta_j == 0 entries is returned through always_in.
inline std::vector<double> drop_points(const std::vector<double>& v,
                                       int* always_in) {
  std::vector<double> u;
  u.reserve(v.size());
  int zeros = 0;
  for (double x : v) {
    double theta = boundary_gap(x);
    if (theta > 0.0)
      u.push_back(1.0 / theta);
    else
      ++zeros;
  }
  *always_in = zeros;
  return u;
}

}  // namespace detail

// I_s(v) = { j : min(v_j, 1-v_j) < 1/s }, strict; 0-based indices.
inline std::vector<int> biased_index_set(const std::vector<double>& v,
                                         double s) {
  detail::check_probability_vector(v, "biased_index_set");
  if (!(s > 0.0)) throw std::invalid_argument("biased_index_set: s <= 0");
  std::vector<int> out;
  for (std::size_t j = 0; j < v.size(); ++j) {
    double theta = boundary_gap(v[j]);
    if (theta == 0.0 || 1.0 / theta > s) out.push_back(static_cast<int>(j));
  }
  return out;
}

// B(v, z) = { j : v_j < 1/z }, strict and one-sided; 0-based indices.
inline std::vector<int> threshold_set(const std::vector<double>& v, double z) {
  detail::check_probability_vector(v, "threshold_set");
  if (!(z > 0.0)) throw std::invalid_argument("threshold_set: z <= 0");
  std::vector<int> out;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (v[j] < 1.0 / z) out.push_back(static_cast<int>(j));
  return out;
}

// m(v) = min { s > 0 : s >= |I_s(v)| }.
inline double m_value(const std::vector<double>& v) {
  detail::check_probability_vector(v, "m_value");
  int zeros = 0;
  std::vector<double> u = detail::drop_points(v, &zeros);
  std::sort(u.begin(), u.end());

  const int n = static_cast<int>(v.size());
  // Walk plateaus in order of increasing s. On the plateau starting at `lo`
  // (exclusive for the first one, which begins at s -> 0+), f equals `count`;
  // the least feasible s on it is `lo` itself if lo >= count, else the
  // integer `count` if it still lies before the next drop point.
  double lo = 0.0;
  int count = n;
  std::size_t b = 0;
  while (true) {
    // current plateau: s in [lo, hi) with f = count (first plateau open at 0)
    double hi = b < u.size() ? u[b] : std::numeric_limits<double>::infinity();
    if (lo > 0.0 && lo >= static_cast<double>(count)) return lo;
    if (static_cast<double>(count) < hi) return count;
    // infeasible here; advance past every drop point equal to u[b]
    double point = u[b];
    while (b < u.size() && u[b] == point) ++b;
    lo = point;
    count = zeros + static_cast<int>(u.size() - b);
  }
}

}  // namespace hcb
