#include "fmc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fmc/error.hpp"
#include "fmc/hungarian.hpp"

namespace fmc {

void VMFConfig::validate() const {
  if (!(kappa > 0.0)) throw ConfigError("vmf: kappa must be positive");
  if (n_seeds < 1) throw ConfigError("vmf: need at least one seed");
  auto unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!unit(seed_min_dist) || !unit(tol) || !unit(merge_dist)) {
    throw ConfigError("vmf: tolerances must lie in (0, 1)");
  }
  if (max_iter < 1) throw ConfigError("vmf: max_iter must be positive");
}

std::vector<int> select_seeds(const std::vector<Vector>& embeddings, const VMFConfig& cfg) {
  if (embeddings.empty()) throw std::invalid_argument("select_seeds: no embeddings");
  const std::size_t n = embeddings.size();
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<int> seeds{static_cast<int>(rng() % n)};

  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = cosine_distance_unchecked(embeddings[i], embeddings[seeds[0]]);

  while (static_cast<int>(seeds.size()) < cfg.n_seeds) {
    const auto best = std::max_element(nearest.begin(), nearest.end());  // first maximum
    if (*best <= cfg.seed_min_dist) break;
    const int idx = static_cast<int>(best - nearest.begin());
    seeds.push_back(idx);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], cosine_distance_unchecked(embeddings[i], embeddings[idx]));
    }
  }
  return seeds;
}

double vmf_density(const std::vector<Vector>& embeddings, const Vector& m, double kappa) {
  double sum = 0.0;
  for (const auto& x : embeddings) sum += std::exp(kappa * m.dot(x));
  return sum;
}

Vector vmf_mean_shift(const std::vector<Vector>& embeddings, const Vector& seed, const VMFConfig& cfg) {
  Vector m = seed.normalized();
  for (int it = 0; it < cfg.max_iter; ++it) {
    // Kernel weights relative to the largest one; the common factor cancels
    // in the normalisation.
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& x : embeddings) top = std::max(top, m.dot(x));
    Vector acc = Vector::Zero(m.size());
    for (const auto& x : embeddings) acc += std::exp(cfg.kappa * (m.dot(x) - top)) * x;
    const double norm = acc.norm();
    if (norm < 1e-300) throw DegenerateError("vmf_mean_shift: weighted sum vanished");
    Vector next = acc / norm;
    const double moved = cosine_distance_unchecked(next, m);
    m = std::move(next);
    if (moved < cfg.tol) break;
  }
  return m;
}

std::vector<Vector> merge_modes(std::vector<Vector> modes, double merge_dist) {
  bool changed = true;
  while (changed && modes.size() > 1) {
    changed = false;
    // Connected components under d < merge_dist, labelled by lowest member.
    const std::size_t n = modes.size();
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (cosine_distance_unchecked(modes[a], modes[b]) < merge_dist) {
          const int ra = find(static_cast<int>(a));
          const int rb = find(static_cast<int>(b));
          if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
          changed = true;
        }
      }
    }
    if (!changed) break;
    std::vector<Vector> merged;
    for (std::size_t root = 0; root < n; ++root) {
      if (find(static_cast<int>(root)) != static_cast<int>(root)) continue;
      std::vector<Vector> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (find(static_cast<int>(i)) == static_cast<int>(root)) members.push_back(modes[i]);
      }
      merged.push_back(members.size() == 1 ? members.front() : spherical_mean(members));
    }
    modes = std::move(merged);
  }
  return modes;
}

int nearest_mean(const std::vector<Vector>& means, const Vector& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double d = cosine_distance_unchecked(means[k], x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

ClusterResult cluster_embeddings(const std::vector<Vector>& embeddings, const VMFConfig& cfg) {
  cfg.validate();
  const std::vector<int> seeds = select_seeds(embeddings, cfg);
  std::vector<Vector> modes(seeds.size());
  const int n_seeds = static_cast<int>(seeds.size());

  // Each seed's ascent is independent; results land in fixed slots so the
  // outcome does not depend on scheduling.
  bool degenerate = false;
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < n_seeds; ++s) {
    try {
      modes[s] = vmf_mean_shift(embeddings, embeddings[seeds[s]], cfg);
    } catch (const DegenerateError&) {
#pragma omp atomic write
      degenerate = true;
    }
  }
  if (degenerate) throw DegenerateError("cluster_embeddings: mean shift degenerated");

  std::vector<Vector> means = merge_modes(std::move(modes), cfg.merge_dist);

  ClusterResult out;
  std::vector<int> raw(embeddings.size());
  std::vector<int> counts(means.size(), 0);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    raw[i] = nearest_mean(means, embeddings[i]);
    ++counts[raw[i]];
  }
  std::vector<int> remap(means.size(), -1);
  for (std::size_t k = 0; k < means.size(); ++k) {
    if (counts[k] == 0) continue;
    remap[k] = static_cast<int>(out.means.size());
    out.means.push_back(means[k]);
  }
  out.assignments.resize(embeddings.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i) out.assignments[i] = remap[raw[i]];
  return out;
}

std::vector<int> match_windows(const std::vector<Vector>& prev_means, const std::vector<int>& prev_ids,
                               const std::vector<Vector>& cur_means, double threshold, int& next_id) {
  if (prev_means.size() != prev_ids.size()) throw ShapeError("match_windows: ids and means differ in count");
  std::vector<int> ids(cur_means.size(), -1);
  if (!prev_means.empty() && !cur_means.empty()) {
    Eigen::MatrixXd cost(cur_means.size(), prev_means.size());
    for (std::size_t i = 0; i < cur_means.size(); ++i) {
      for (std::size_t j = 0; j < prev_means.size(); ++j) {
        cost(i, j) = cosine_distance_unchecked(cur_means[i], prev_means[j]);
      }
    }
    const Assignment match = hungarian(cost);
    for (std::size_t i = 0; i < cur_means.size(); ++i) {
      const int j = match.row_to_col[i];
      if (j >= 0 && cost(i, j) < threshold) ids[i] = prev_ids[j];
    }
  }
  for (int& id : ids) {
    if (id < 0) id = next_id++;
  }
  return ids;
}

}  // namespace fmc
