#pragma once

// Independent reference implementations used only by tests: compositions by
// explicit joint enumeration over std::map, with no rebinning.

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "geoinsure/dist.hpp"

namespace oracle {

using Pmf = std::map<double, double>;

inline Pmf pmfOf(const geoinsure::EmpiricalDistribution& d) {
  Pmf out;
  for (Eigen::Index i = 0; i < d.size(); ++i) out[d.support()(i)] += d.mass()(i);
  return out;
}

/// Distribution of f(x_1, ..., x_n) with x_i drawn independently from ds[i].
inline Pmf enumerate(const std::vector<Pmf>& ds, const std::function<double(const std::vector<double>&)>& f) {
  Pmf out;
  std::vector<double> draw(ds.size());
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double p) {
    if (i == ds.size()) {
      out[f(draw)] += p;
      return;
    }
    for (const auto& [v, m] : ds[i]) {
      draw[i] = v;
      rec(i + 1, p * m);
    }
  };
  rec(0, 1.0);
  return out;
}

inline Pmf maxOf(const std::vector<Pmf>& ds) {
  return enumerate(ds, [](const std::vector<double>& x) {
    double m = x[0];
    for (double v : x) m = std::max(m, v);
    return m;
  });
}

inline Pmf minOf(const std::vector<Pmf>& ds) {
  return enumerate(ds, [](const std::vector<double>& x) {
    double m = x[0];
    for (double v : x) m = std::min(m, v);
    return m;
  });
}

inline Pmf meanOf(const std::vector<Pmf>& ds) {
  return enumerate(ds, [](const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
  });
}

inline double expectation(const Pmf& p) {
  double e = 0;
  for (const auto& [v, m] : p) e += v * m;
  return e;
}

/// Merges values closer than `tol` (sums computed in different orders may
/// differ in the last bits) and drops numerically empty atoms.
inline Pmf canonical(const Pmf& p, double tol = 1e-9) {
  Pmf out;
  for (const auto& [v, m] : p) {
    if (m <= 1e-15) continue;
    if (!out.empty() && std::abs(out.rbegin()->first - v) <= tol * std::max(1.0, std::abs(v)))
      out.rbegin()->second += m;
    else
      out[v] += m;
  }
  return out;
}

/// Same support (within tol) and masses within tol.
inline bool samePmf(const Pmf& a, const Pmf& b, double tol = 1e-9) {
  const Pmf x = canonical(a), y = canonical(b);
  if (x.size() != y.size()) return false;
  for (auto i = x.begin(), j = y.begin(); i != x.end(); ++i, ++j) {
    if (std::abs(i->first - j->first) > tol * std::max(1.0, std::abs(i->first))) return false;
    if (std::abs(i->second - j->second) > tol) return false;
  }
  return true;
}

/// Random distribution with 1..maxSupport atoms on a coarse grid, so ties
/// between inputs are common.
inline geoinsure::EmpiricalDistribution randomDist(std::mt19937_64& rng, int maxSupport = 5) {
  std::uniform_int_distribution<int> size(1, maxSupport), value(1, 12);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  std::vector<geoinsure::EmpiricalDistribution::Atom> atoms;
  const int n = size(rng);
  for (int i = 0; i < n; ++i) atoms.emplace_back(static_cast<double>(value(rng)), weight(rng));
  return geoinsure::EmpiricalDistribution::fromAtoms(std::move(atoms));
}

}  // namespace oracle
