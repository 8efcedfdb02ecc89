#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bertgram {

struct KMeansOptions {
  std::size_t k = 100;
  std::uint64_t seed = 0;
  std::size_t max_iters = 25;
  double tol = 1e-4;  // on the largest centroid displacement
};

struct KMeansResult {
  std::size_t dim = 0;
  std::vector<float> centroids;          // k x dim, row-major
  std::vector<std::uint32_t> assignment;  // one per input row
  std::vector<double> wcss_history;       // after seeding, then after every iteration
  std::size_t iterations = 0;

  std::size_t k() const { return dim == 0 ? 0 : centroids.size() / dim; }
  std::span<const float> centroid(std::size_t i) const { return {centroids.data() + i * dim, dim}; }
};

/// K-means with K-means++ seeding on the rows of a row-major n x dim matrix.
///
/// Identical rows are collapsed first; when at most k distinct rows remain the
/// distinct rows are returned as centroids in first-occurrence order. Otherwise
/// Lloyd iterations run until the largest centroid displacement drops below tol
/// or max_iters is reached. A cluster that empties is re-seeded at the point
/// farthest from its current centroid.
KMeansResult kmeans(std::span<const float> rows, std::size_t dim, const KMeansOptions& options);

double squared_distance(std::span<const float> a, std::span<const float> b);

}  // namespace bertgram
