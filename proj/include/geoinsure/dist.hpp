#pragma once

// Finite discrete distributions over strictly positive speeds, plus the
// composition algebra used by the performance model: expectation, max/min of
// independent draws, mean of independent draws, and expectation-preserving
// rebinning.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace geoinsure {

inline constexpr std::size_t kDefaultBinCap = 64;

template <typename Scalar>
class BasicDistribution {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Atom = std::pair<Scalar, Scalar>;  // (value, mass)

  /// Validates and takes ownership. Throws std::invalid_argument when the
  /// support is not strictly ascending and positive or the masses do not
  /// form a probability vector.
  BasicDistribution(Array support, Array mass)
      : support_(std::move(support)), mass_(std::move(mass)) {
    validate();
  }

  BasicDistribution() : BasicDistribution(pointMass(Scalar(1))) {}

  static BasicDistribution pointMass(Scalar value) {
    Array s(1), m(1);
    s << value;
    m << Scalar(1);
    return BasicDistribution(std::move(s), std::move(m));
  }

  /// Builds from unordered atoms: sorts, merges equal values, drops
  /// numerically empty atoms and renormalises the remainder.
  static BasicDistribution fromAtoms(std::vector<Atom> atoms) {
    auto byValue = [](const Atom& a, const Atom& b) { return a.first < b.first; };
    if (!std::is_sorted(atoms.begin(), atoms.end(), byValue)) std::sort(atoms.begin(), atoms.end(), byValue);
    std::vector<Atom> merged;
    merged.reserve(atoms.size());
    for (const auto& [v, m] : atoms) {
      if (!merged.empty() && merged.back().first == v) {
        merged.back().second += m;
      } else {
        merged.emplace_back(v, m);
      }
    }
    std::erase_if(merged, [](const Atom& a) { return a.second <= kMassFloor; });
    if (merged.empty()) throw std::invalid_argument("distribution has no mass");
    Array s(static_cast<Eigen::Index>(merged.size()));
    Array m(static_cast<Eigen::Index>(merged.size()));
    for (std::size_t i = 0; i < merged.size(); ++i) {
      s(static_cast<Eigen::Index>(i)) = merged[i].first;
      m(static_cast<Eigen::Index>(i)) = merged[i].second;
    }
    m /= m.sum();
    return BasicDistribution(std::move(s), std::move(m));
  }

  const Array& support() const { return support_; }
  const Array& mass() const { return mass_; }
  Eigen::Index size() const { return support_.size(); }
  Scalar min() const { return support_(0); }
  Scalar max() const { return support_(support_.size() - 1); }

  /// P(X <= support[i]) for every support point.
  Array cdf() const {
    Array c(mass_.size());
    std::partial_sum(mass_.data(), mass_.data() + mass_.size(), c.data());
    return c;
  }

  /// P(X <= v) for arbitrary v.
  Scalar cdfAt(Scalar v) const {
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < size() && support_(i) <= v; ++i) acc += mass_(i);
    return std::min<Scalar>(acc, Scalar(1));
  }

  /// Inverse-CDF draw for a uniform variate u in [0,1).
  Scalar quantile(Scalar u) const {
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < size(); ++i) {
      acc += mass_(i);
      if (u < acc) return support_(i);
    }
    return max();
  }

  std::vector<Atom> atoms() const {
    std::vector<Atom> out(static_cast<std::size_t>(size()));
    for (Eigen::Index i = 0; i < size(); ++i)
      out[static_cast<std::size_t>(i)] = {support_(i), mass_(i)};
    return out;
  }

  friend bool operator==(const BasicDistribution& a, const BasicDistribution& b) {
    return a.size() == b.size() && (a.support_ == b.support_).all() &&
           (a.mass_ == b.mass_).all();
  }

  static constexpr Scalar kMassFloor = Scalar(1e-15);

 private:
  void validate() const {
    if (support_.size() == 0 || support_.size() != mass_.size())
      throw std::invalid_argument("distribution support/mass size mismatch");
    for (Eigen::Index i = 0; i < support_.size(); ++i) {
      if (!(support_(i) > 0) || !std::isfinite(static_cast<double>(support_(i))))
        throw std::invalid_argument("distribution support must be positive");
      if (i > 0 && !(support_(i) > support_(i - 1)))
        throw std::invalid_argument("distribution support must be strictly ascending");
      if (!(mass_(i) >= 0)) throw std::invalid_argument("negative probability mass");
    }
    if (std::abs(static_cast<double>(mass_.sum()) - 1.0) > 1e-9)
      throw std::invalid_argument("probability mass does not sum to 1");
  }

  Array support_;
  Array mass_;
};

using EmpiricalDistribution = BasicDistribution<double>;

template <typename Scalar>
Scalar expectation(const BasicDistribution<Scalar>& d) {
  return (d.support() * d.mass()).sum();
}

namespace detail {

/// Collapses unordered atoms with values in [lo, hi] into `buckets`
/// equal-width buckets, each at its mass-weighted mean. The result is
/// ascending and keeps the expectation.
template <typename Scalar>
std::vector<std::pair<Scalar, Scalar>> bucketAtoms(const std::vector<std::pair<Scalar, Scalar>>& atoms, Scalar lo,
                                                   Scalar hi, std::size_t buckets) {
  const Scalar width = (hi - lo) / static_cast<Scalar>(buckets);
  std::vector<Scalar> moment(buckets, 0), weight(buckets, 0), plain(buckets, 0);
  std::vector<std::size_t> count(buckets, 0);
  for (const auto& [v, m] : atoms) {
    const auto b = width > 0 ? std::min(buckets - 1, static_cast<std::size_t>((v - lo) / width)) : 0;
    moment[b] += v * m;
    weight[b] += m;
    plain[b] += v;
    ++count[b];
  }
  std::vector<std::pair<Scalar, Scalar>> out;
  for (std::size_t b = 0; b < buckets; ++b)
    if (count[b] > 0)
      out.emplace_back(weight[b] > 0 ? moment[b] / weight[b] : plain[b] / static_cast<Scalar>(count[b]), weight[b]);
  return out;
}

}  // namespace detail

/// Merges adjacent atoms (smallest Ward cost first) until at most `cap`
/// remain. Every merge replaces two atoms by their mass-weighted mean, so the
/// expectation is preserved.
template <typename Scalar>
BasicDistribution<Scalar> rebin(const BasicDistribution<Scalar>& d,
                                std::size_t cap = kDefaultBinCap) {
  if (cap < 2) throw std::invalid_argument("bin cap must be at least 2");
  const auto n = static_cast<std::size_t>(d.size());
  if (n <= cap) return d;

  struct Node {
    Scalar value, mass;
    std::size_t prev, next;
    std::uint32_t version;
    bool alive;
  };
  // Large inputs are first collapsed into equal-width buckets; the ordered,
  // expectation-preserving merge then runs on at most 4*cap atoms.
  const std::vector<std::pair<Scalar, Scalar>> start =
      n > 4 * cap ? detail::bucketAtoms(d.atoms(), d.min(), d.max(), 4 * cap) : d.atoms();
  const std::size_t m = start.size();
  std::vector<Node> nodes(m);
  for (std::size_t i = 0; i < m; ++i) nodes[i] = {start[i].first, start[i].second, i == 0 ? m : i - 1, i + 1, 0, true};
  auto cost = [&](std::size_t i, std::size_t j) {
    const Scalar gap = nodes[j].value - nodes[i].value;
    const Scalar total = nodes[i].mass + nodes[j].mass;
    return total > 0 ? nodes[i].mass * nodes[j].mass / total * gap * gap : Scalar(0);
  };
  struct Candidate {
    Scalar cost;
    std::size_t left;
    std::uint32_t leftVersion, rightVersion;
  };
  // Min-heap on (cost, left).
  auto later = [](const Candidate& a, const Candidate& b) {
    return a.cost != b.cost ? a.cost > b.cost : a.left > b.left;
  };
  std::vector<Candidate> heap;
  heap.reserve(3 * m);
  for (std::size_t i = 0; i + 1 < m; ++i) heap.push_back({cost(i, i + 1), i, 0, 0});
  std::make_heap(heap.begin(), heap.end(), later);

  std::size_t remaining = m;
  while (remaining > cap && !heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), later);
    const Candidate c = heap.back();
    heap.pop_back();
    const std::size_t i = c.left;
    if (!nodes[i].alive || nodes[i].version != c.leftVersion) continue;
    const std::size_t j = nodes[i].next;
    if (j >= m || nodes[j].version != c.rightVersion) continue;
    Node& a = nodes[i];
    Node& b = nodes[j];
    const Scalar total = a.mass + b.mass;
    a.value = total > 0 ? (a.value * a.mass + b.value * b.mass) / total : (a.value + b.value) / 2;
    a.mass = total;
    b.alive = false;
    a.next = b.next;
    if (b.next < m) nodes[b.next].prev = i;
    ++a.version;
    --remaining;
    if (a.prev < m) {
      heap.push_back({cost(a.prev, i), a.prev, nodes[a.prev].version, a.version});
      std::push_heap(heap.begin(), heap.end(), later);
    }
    if (a.next < m) {
      heap.push_back({cost(i, a.next), i, a.version, nodes[a.next].version});
      std::push_heap(heap.begin(), heap.end(), later);
    }
  }

  // Weighted means of adjacent atoms keep the support strictly ascending.
  typename BasicDistribution<Scalar>::Array support(static_cast<Eigen::Index>(remaining));
  typename BasicDistribution<Scalar>::Array mass(static_cast<Eigen::Index>(remaining));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!nodes[i].alive) continue;
    support(k) = nodes[i].value;
    mass(k++) = nodes[i].mass;
  }
  mass /= mass.sum();
  return BasicDistribution<Scalar>(std::move(support), std::move(mass));
}

namespace detail {

template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> unionSupport(const BasicDistribution<Scalar>& a,
                                                     const BasicDistribution<Scalar>& b) {
  std::vector<Scalar> merged;
  merged.reserve(static_cast<std::size_t>(a.size() + b.size()));
  std::merge(a.support().data(), a.support().data() + a.size(), b.support().data(),
             b.support().data() + b.size(), std::back_inserter(merged));
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  return Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(
      merged.data(), static_cast<Eigen::Index>(merged.size()));
}

// P(X <= grid[i]) for an ascending grid.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> cdfOnGrid(
    const BasicDistribution<Scalar>& d, const Eigen::Array<Scalar, Eigen::Dynamic, 1>& grid) {
  Eigen::Array<Scalar, Eigen::Dynamic, 1> out(grid.size());
  Scalar acc = 0;
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    while (k < d.size() && d.support()(k) <= grid(i)) acc += d.mass()(k++);
    out(i) = std::min<Scalar>(acc, Scalar(1));
  }
  return out;
}

template <typename Scalar>
BasicDistribution<Scalar> fromGridMass(const Eigen::Array<Scalar, Eigen::Dynamic, 1>& grid,
                                       const Eigen::Array<Scalar, Eigen::Dynamic, 1>& mass) {
  std::vector<typename BasicDistribution<Scalar>::Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index i = 0; i < grid.size(); ++i) atoms.emplace_back(grid(i), std::max<Scalar>(mass(i), 0));
  return BasicDistribution<Scalar>::fromAtoms(std::move(atoms));
}

}  // namespace detail

/// Distribution of max(X, Y) for independent X ~ a, Y ~ b. The result's CDF
/// is the product of the input CDFs.
template <typename Scalar>
BasicDistribution<Scalar> maxCompose(const BasicDistribution<Scalar>& a,
                                     const BasicDistribution<Scalar>& b,
                                     std::size_t cap = kDefaultBinCap) {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Array grid = detail::unionSupport(a, b);
  const Array joint = detail::cdfOnGrid(a, grid) * detail::cdfOnGrid(b, grid);
  Array mass(grid.size());
  mass(0) = joint(0);
  mass.tail(grid.size() - 1) = joint.tail(grid.size() - 1) - joint.head(grid.size() - 1);
  return rebin(detail::fromGridMass(grid, mass), cap);
}

/// Distribution of min(X, Y) for independent X ~ a, Y ~ b. The result's
/// survival function P(min >= v) is the product of the inputs' survivals.
template <typename Scalar>
BasicDistribution<Scalar> minCompose(const BasicDistribution<Scalar>& a,
                                     const BasicDistribution<Scalar>& b,
                                     std::size_t cap = kDefaultBinCap) {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Array grid = detail::unionSupport(a, b);
  const Eigen::Index n = grid.size();
  // P(X >= grid[i]) = 1 - P(X <= grid[i-1]).
  auto survival = [&](const BasicDistribution<Scalar>& d) {
    const Array c = detail::cdfOnGrid(d, grid);
    Array s(n);
    s(0) = 1;
    s.tail(n - 1) = Scalar(1) - c.head(n - 1);
    return s;
  };
  const Array joint = survival(a) * survival(b);
  Array mass(n);
  mass.head(n - 1) = joint.head(n - 1) - joint.tail(n - 1);
  mass(n - 1) = joint(n - 1);
  return rebin(detail::fromGridMass(grid, mass), cap);
}

/// Distribution of the arithmetic mean of one independent draw from each
/// input. Partial sums are rebinned to `cap` between steps.
template <typename Scalar>
BasicDistribution<Scalar> meanCompose(std::span<const BasicDistribution<Scalar>> ds,
                                      std::size_t cap = kDefaultBinCap) {
  if (ds.empty()) throw std::invalid_argument("no input locations");
  if (ds.size() == 1) return rebin(ds.front(), cap);
  using Atom = typename BasicDistribution<Scalar>::Atom;
  std::vector<Atom> sum = ds.front().atoms();
  for (std::size_t k = 1; k < ds.size(); ++k) {
    std::vector<Atom> next;
    next.reserve(sum.size() * static_cast<std::size_t>(ds[k].size()));
    for (const auto& [x, px] : sum)
      for (Eigen::Index j = 0; j < ds[k].size(); ++j)
        next.emplace_back(x + ds[k].support()(j), px * ds[k].mass()(j));
    if (next.size() > 4 * cap) next = detail::bucketAtoms(next, sum.front().first + ds[k].min(),
                                                          sum.back().first + ds[k].max(), 4 * cap);
    sum = rebin(BasicDistribution<Scalar>::fromAtoms(std::move(next)), cap).atoms();
  }
  const auto n = static_cast<Scalar>(ds.size());
  for (auto& atom : sum) atom.first /= n;
  return BasicDistribution<Scalar>::fromAtoms(std::move(sum));
}

/// Distribution of the max of `n` iid draws from `d`.
template <typename Scalar>
BasicDistribution<Scalar> iidMax(const BasicDistribution<Scalar>& d, int n,
                                 std::size_t cap = kDefaultBinCap) {
  if (n < 1) throw std::invalid_argument("iidMax needs at least one draw");
  Eigen::Array<Scalar, Eigen::Dynamic, 1> joint = d.cdf().pow(static_cast<Scalar>(n));
  Eigen::Array<Scalar, Eigen::Dynamic, 1> mass(d.size());
  mass(0) = joint(0);
  mass.tail(d.size() - 1) = joint.tail(d.size() - 1) - joint.head(d.size() - 1);
  return rebin(detail::fromGridMass(d.support(), mass), cap);
}

/// E[max] over independent draws, one from each input, evaluated exactly on
/// the union support without materialising or rebinning the composition.
template <typename Scalar>
Scalar expectedMax(std::span<const BasicDistribution<Scalar>* const> ds) {
  if (ds.empty()) throw std::invalid_argument("expectedMax of nothing");
  std::vector<Scalar> grid;
  for (const auto* d : ds) grid.insert(grid.end(), d->support().data(), d->support().data() + d->size());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  // E[max] = sum_v v * (F(v) - F(v-)), F = product of marginal CDFs.
  std::vector<Eigen::Index> cursor(ds.size(), 0);
  std::vector<Scalar> cdf(ds.size(), 0);
  Scalar previous = 0, result = 0;
  for (const Scalar v : grid) {
    Scalar joint = 1;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const auto& d = *ds[k];
      while (cursor[k] < d.size() && d.support()(cursor[k]) <= v) cdf[k] += d.mass()(cursor[k]++);
      joint *= std::min<Scalar>(cdf[k], Scalar(1));
    }
    result += v * (joint - previous);
    previous = joint;
  }
  return result;
}

/// Equal-mass histogram of raw observations: up to `cap` bins of (near)
/// equal sample count, each represented by its sample mean.
template <typename Scalar>
BasicDistribution<Scalar> fromSamples(std::span<const Scalar> samples,
                                      std::size_t cap = kDefaultBinCap) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  std::vector<Scalar> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t bins = std::min(n, cap);
  std::vector<typename BasicDistribution<Scalar>::Atom> atoms;
  atoms.reserve(bins);
  for (std::size_t g = 0; g < bins; ++g) {
    const std::size_t lo = g * n / bins, hi = (g + 1) * n / bins;
    const Scalar sum = std::accumulate(sorted.begin() + static_cast<std::ptrdiff_t>(lo),
                                       sorted.begin() + static_cast<std::ptrdiff_t>(hi), Scalar(0));
    const auto count = static_cast<Scalar>(hi - lo);
    atoms.emplace_back(sum / count, count / static_cast<Scalar>(n));
  }
  return BasicDistribution<Scalar>::fromAtoms(std::move(atoms));
}

/// Scales every support point by `factor` (> 0).
template <typename Scalar>
BasicDistribution<Scalar> scaled(const BasicDistribution<Scalar>& d, Scalar factor) {
  if (!(factor > 0)) throw std::invalid_argument("scale factor must be positive");
  return BasicDistribution<Scalar>(d.support() * factor, d.mass());
}

template <typename Scalar>
std::string toString(const BasicDistribution<Scalar>& d) {
  std::string out = "{";
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(static_cast<double>(d.support()(i))) + ":" +
           std::to_string(static_cast<double>(d.mass()(i)));
  }
  return out + "}";
}

}  // namespace geoinsure
