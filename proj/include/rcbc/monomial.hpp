#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcbc {

// Exponent vector of a monomial in n variables.
using Expo = std::vector<int>;

inline int total_degree(const Expo& e) {
  return std::accumulate(e.begin(), e.end(), 0);
}

// Canonical monomial order for the whole toolkit: graded lexicographic.
// Total degree ascending; within a degree, lexicographic with earlier
// variables carrying higher significance (x1^2 < x1x2 < ... < x3^2).
struct GrlexLess {
  bool operator()(const Expo& a, const Expo& b) const {
    const int da = total_degree(a);
    const int db = total_degree(b);
    if (da != db) return da < db;
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
  }
};

inline Expo zero_expo(int n_vars) { return Expo(n_vars, 0); }

inline Expo unit_expo(int n_vars, int var) {
  Expo e(n_vars, 0);
  e[var] = 1;
  return e;
}

inline Expo add_expo(const Expo& a, const Expo& b) {
  Expo r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline double eval_expo(const Expo& e, const double* x) {
  double v = 1.0;
  for (size_t i = 0; i < e.size(); ++i)
    for (int k = 0; k < e[i]; ++k) v *= x[i];
  return v;
}

std::string expo_to_string(const Expo& e);

// All exponent vectors in n variables with total degree in [min_deg, max_deg],
// grlex-ordered.
std::vector<Expo> enumerate_monomials(int n_vars, int min_deg, int max_deg);

// Ordered monomial basis for the lifted dynamics.  When used as the M(x)
// dictionary the constant monomial is excluded so that M(0) = 0.
struct MonomialDict {
  int n_vars = 0;
  std::vector<Expo> entries;
  bool includes_constant = false;

  int size() const { return static_cast<int>(entries.size()); }
  int max_degree() const;
  // Position of an exponent vector, or -1.
  int index_of(const Expo& e) const;
  // Evaluate the dictionary at a point, one value per entry.
  std::vector<double> eval(const std::vector<double>& x) const;
};

// Every monomial with total degree in [include_constant ? 0 : 1, max_degree].
MonomialDict build_dict(int n_vars, int max_degree, bool include_constant);

}  // namespace rcbc
