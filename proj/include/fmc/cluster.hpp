#pragma once

#include <cstdint>
#include <vector>

#include "fmc/loss.hpp"

namespace fmc {

struct VMFConfig {
  double kappa = 10.0;
  int n_seeds = 10;
  double seed_min_dist = 0.1;
  double tol = 1e-6;
  int max_iter = 100;
  double merge_dist = 0.05;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct ClusterResult {
  std::vector<Vector> means;
  std::vector<int> assignments;  // per embedding, index into means
  int k() const { return static_cast<int>(means.size()); }
};

/// Indices of far-apart seeds: the first uniformly at random, the rest by
/// greedy farthest-point selection in cosine distance. Stops early when no
/// candidate is farther than seed_min_dist from every chosen seed.
std::vector<int> select_seeds(const std::vector<Vector>& embeddings, const VMFConfig& cfg);

/// Mode seeking from `seed` under the kernel exp(kappa m.x):
/// m <- normalize(sum_i exp(kappa m.x_i) x_i) until the step is below tol.
Vector vmf_mean_shift(const std::vector<Vector>& embeddings, const Vector& seed, const VMFConfig& cfg);

/// Unnormalised kernel density sum_i exp(kappa m.x_i).
double vmf_density(const std::vector<Vector>& embeddings, const Vector& m, double kappa);

/// Repeatedly fuses modes closer than merge_dist into their spherical mean
/// until every pair is at least merge_dist apart.
std::vector<Vector> merge_modes(std::vector<Vector> modes, double merge_dist);

/// Index of the cosine-nearest mean; ties go to the lower index.
int nearest_mean(const std::vector<Vector>& means, const Vector& x);

/// Seeds, mean shift from every seed (in parallel), merge, assign. Means that
/// attract no embedding are dropped.
ClusterResult cluster_embeddings(const std::vector<Vector>& embeddings, const VMFConfig& cfg);

/// Carries object ids across windows. Hungarian matching on cosine distance;
/// matches at or beyond `threshold` are voided and the unmatched current means
/// get fresh ids from `next_id`.
std::vector<int> match_windows(const std::vector<Vector>& prev_means, const std::vector<int>& prev_ids,
                               const std::vector<Vector>& cur_means, double threshold, int& next_id);

}  // namespace fmc
