#include "bertgram/kmeans.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <random>
#include <string_view>
#include <unordered_map>

#include "bertgram/error.hpp"

namespace bertgram {
namespace {

double squared_distance(std::span<const float> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

struct Rows {
  std::span<const float> data;
  std::size_t dim;
  std::span<const float> operator[](std::size_t i) const { return data.subspan(i * dim, dim); }
};

// Index of the first occurrence of each distinct row, and for every row the
// position of its representative in that list.
std::vector<std::size_t> distinct_rows(const Rows& rows, std::size_t n, std::vector<std::uint32_t>& rep_of) {
  std::unordered_map<std::string_view, std::uint32_t> seen;
  std::vector<std::size_t> reps;
  rep_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = rows[i];
    std::string_view key(reinterpret_cast<const char*>(row.data()), row.size_bytes());
    auto [it, inserted] = seen.emplace(key, static_cast<std::uint32_t>(reps.size()));
    if (inserted) reps.push_back(i);
    rep_of[i] = it->second;
  }
  return reps;
}

class Lloyd {
 public:
  Lloyd(const Rows& rows, std::size_t n, std::size_t k)
      : rows_(rows), n_(n), k_(k), centroids_(k * rows.dim), assignment_(n), cost_(n) {}

  void seed_plus_plus(std::mt19937_64& gen) {
    std::uniform_int_distribution<std::size_t> first(0, n_ - 1);
    set_centroid(0, rows_[first(gen)]);
    std::vector<double> d2(n_);
    for (std::size_t i = 0; i < n_; ++i) d2[i] = squared_distance(rows_[i], centroid(0));
    for (std::size_t c = 1; c < k_; ++c) {
      std::discrete_distribution<std::size_t> pick(d2.begin(), d2.end());
      set_centroid(c, rows_[pick(gen)]);
      for (std::size_t i = 0; i < n_; ++i) d2[i] = std::min(d2[i], squared_distance(rows_[i], centroid(c)));
    }
  }

  /// Nearest-centroid assignment followed by empty-cluster repair; returns WCSS.
  double assign() {
    std::vector<std::size_t> sizes(k_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::size_t c = 0; c < k_; ++c) {
        const double d = squared_distance(rows_[i], centroid(c));
        if (d < best) {
          best = d;
          arg = static_cast<std::uint32_t>(c);
        }
      }
      assignment_[i] = arg;
      cost_[i] = best;
      ++sizes[arg];
    }
    for (std::size_t c = 0; c < k_; ++c) {
      if (sizes[c] != 0) continue;
      // Re-seed at the point farthest from its centroid, taken from a cluster
      // that keeps at least one member.
      std::size_t far = n_;
      for (std::size_t i = 0; i < n_; ++i) {
        if (sizes[assignment_[i]] < 2) continue;
        if (far == n_ || cost_[i] > cost_[far]) far = i;
      }
      if (far == n_) throw Error("k-means: cannot repair empty cluster");
      --sizes[assignment_[far]];
      assignment_[far] = static_cast<std::uint32_t>(c);
      cost_[far] = 0.0;
      ++sizes[c];
      set_centroid(c, rows_[far]);
    }
    double wcss = 0.0;
    for (double v : cost_) wcss += v;
    return wcss;
  }

  /// Moves every centroid to the mean of its members; returns the largest displacement.
  double update() {
    const std::size_t dim = rows_.dim;
    std::vector<double> sums(k_ * dim, 0.0);
    std::vector<std::size_t> sizes(k_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto c = assignment_[i];
      auto row = rows_[i];
      for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += row[j];
      ++sizes[c];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k_; ++c) {
      if (sizes[c] == 0) continue;
      double shift = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double mean = sums[c * dim + j] / static_cast<double>(sizes[c]);
        const double d = mean - centroids_[c * dim + j];
        shift += d * d;
        centroids_[c * dim + j] = mean;
      }
      moved = std::max(moved, std::sqrt(shift));
    }
    return moved;
  }

  std::span<const double> centroid(std::size_t c) const { return {centroids_.data() + c * rows_.dim, rows_.dim}; }
  const std::vector<double>& centroids() const { return centroids_; }
  const std::vector<std::uint32_t>& assignment() const { return assignment_; }

 private:
  void set_centroid(std::size_t c, std::span<const float> row) {
    std::copy(row.begin(), row.end(), centroids_.begin() + static_cast<std::ptrdiff_t>(c * rows_.dim));
  }

  Rows rows_;
  std::size_t n_;
  std::size_t k_;
  std::vector<double> centroids_;
  std::vector<std::uint32_t> assignment_;
  std::vector<double> cost_;
};

}  // namespace

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

KMeansResult kmeans(std::span<const float> data, std::size_t dim, const KMeansOptions& options) {
  if (options.k == 0) throw InvalidArgument("k-means: K must be >= 1");
  if (dim == 0) throw InvalidArgument("k-means: dimension must be >= 1");
  if (data.size() % dim != 0) throw InvalidArgument("k-means: data is not a whole number of rows");
  const std::size_t n = data.size() / dim;
  if (n == 0) throw InvalidArgument("k-means: no vectors");

  const Rows rows{data, dim};
  KMeansResult result;
  result.dim = dim;

  std::vector<std::uint32_t> rep_of;
  const auto reps = distinct_rows(rows, n, rep_of);
  if (reps.size() <= options.k) {
    for (auto r : reps) {
      auto row = rows[r];
      result.centroids.insert(result.centroids.end(), row.begin(), row.end());
    }
    result.assignment = std::move(rep_of);
    result.wcss_history = {0.0};
    return result;
  }

  std::mt19937_64 gen(options.seed);
  Lloyd lloyd(rows, n, options.k);
  lloyd.seed_plus_plus(gen);
  result.wcss_history.push_back(lloyd.assign());
  while (result.iterations < options.max_iters) {
    const double moved = lloyd.update();
    result.wcss_history.push_back(lloyd.assign());
    ++result.iterations;
    if (moved < options.tol) break;
  }

  result.centroids.assign(lloyd.centroids().begin(), lloyd.centroids().end());
  result.assignment = lloyd.assignment();
  return result;
}

}  // namespace bertgram
