#include "fmc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fmc/error.hpp"

namespace fmc {

namespace {

constexpr double kBoundaryBand = 1e-7;

struct GroupGeometry {
  Vector sum;
  double sum_norm = 0.0;
  Vector mean;
};

GroupGeometry geometry(const std::vector<Vector>& group) {
  GroupGeometry g;
  g.sum = Vector::Zero(group.front().size());
  for (const auto& x : group) g.sum += x;
  g.sum_norm = g.sum.norm();
  if (g.sum_norm < 1e-12) throw DegenerateError("spherical mean: vectors sum to zero");
  g.mean = g.sum / g.sum_norm;
  return g;
}

void check_groups(const GroupedEmbeddings& groups) {
  if (groups.empty()) throw std::invalid_argument("loss: need at least one group");
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("loss: empty group");
  }
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

void LossConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("loss: alpha must lie in (0, 1)");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("loss: delta must lie in (0, 1]");
  if (!(denom_floor >= 1.0)) throw ConfigError("loss: denominator floor must be >= 1");
}

double cosine_distance(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw ShapeError("cosine_distance: dimension mismatch");
  if (std::abs(x.norm() - 1.0) > 1e-6 || std::abs(y.norm() - 1.0) > 1e-6) {
    throw std::domain_error("cosine_distance: inputs must be unit vectors");
  }
  return std::clamp(cosine_distance_unchecked(x, y), 0.0, 1.0);
}

Vector spherical_mean(const std::vector<Vector>& vectors) {
  if (vectors.empty()) throw DegenerateError("spherical mean: empty set");
  return geometry(vectors).mean;
}

double loss_fg(const Grid& logits, const Grid& labels) {
  if (!logits.same_shape(labels)) throw ShapeError("loss_fg: logits and labels differ in shape");
  const auto z = logits.values();
  const auto y = labels.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
    sum += softplus(z[i]) - y[i] * z[i];
  }
  return sum / static_cast<double>(z.size());
}

double loss_intra(const GroupedEmbeddings& groups, const LossConfig& cfg) {
  check_groups(groups);
  double total = 0.0;
  for (const auto& group : groups) {
    const Vector mean = geometry(group).mean;
    double numer = 0.0;
    double count = 0.0;
    for (const auto& x : group) {
      const double d = cosine_distance_unchecked(mean, x);
      if (d - cfg.alpha >= 0.0) {
        numer += d * d;
        count += 1.0;
      }
    }
    total += numer / std::max(count, cfg.denom_floor);
  }
  return total / static_cast<double>(groups.size());
}

double loss_inter(const std::vector<Vector>& means, const LossConfig& cfg) {
  const std::size_t k = means.size();
  if (k < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const double hinge = std::max(cfg.delta - cosine_distance_unchecked(means[a], means[b]), 0.0);
      sum += hinge * hinge;
    }
  }
  return 2.0 * sum / (static_cast<double>(k) * (k - 1));
}

LossBreakdown loss_total(const Grid& logits, const Grid& labels, const GroupedEmbeddings& groups,
                         const LossConfig& cfg) {
  LossBreakdown out;
  out.fg = loss_fg(logits, labels);
  out.intra = loss_intra(groups, cfg);
  std::vector<Vector> means;
  for (const auto& g : groups) means.push_back(spherical_mean(g));
  out.inter = loss_inter(means, cfg);
  out.total = cfg.lambda_fg * out.fg + cfg.lambda_intra * out.intra + cfg.lambda_inter * out.inter;
  return out;
}

double embedding_loss(const GroupedEmbeddings& groups, const LossConfig& cfg) {
  check_groups(groups);
  std::vector<Vector> means;
  for (const auto& g : groups) means.push_back(spherical_mean(g));
  return cfg.lambda_intra * loss_intra(groups, cfg) + cfg.lambda_inter * loss_inter(means, cfg);
}

LossGradients loss_gradients(const GroupedEmbeddings& groups, const LossConfig& cfg) {
  check_groups(groups);
  const std::size_t k_count = groups.size();
  const double inv_k = 1.0 / static_cast<double>(k_count);

  std::vector<GroupGeometry> geo;
  geo.reserve(k_count);
  for (const auto& g : groups) geo.push_back(geometry(g));

  LossGradients out;
  out.grads.resize(k_count);

  // dL/dmu_k, accumulated from both terms before chaining through
  // mu = S / |S|, whose Jacobian is (I - mu mu^T) / |S|.
  std::vector<Vector> grad_mean(k_count);

  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& group = groups[k];
    const Vector& mu = geo[k].mean;
    grad_mean[k] = Vector::Zero(mu.size());
    out.grads[k].assign(group.size(), Vector::Zero(mu.size()));

    std::vector<double> dist(group.size());
    double count = 0.0;
    for (std::size_t i = 0; i < group.size(); ++i) {
      dist[i] = cosine_distance_unchecked(mu, group[i]);
      if (std::abs(dist[i] - cfg.alpha) < kBoundaryBand) {
        out.near_boundary = true;
        out.boundary_note = "intra indicator boundary in group " + std::to_string(k);
      }
      if (dist[i] - cfg.alpha >= 0.0) count += 1.0;
    }
    const double denom = std::max(count, cfg.denom_floor);
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (dist[i] - cfg.alpha < 0.0) continue;
      // d(d_i^2)/d(d_i) = 2 d_i; dd_i/dx_i = -mu/2; dd_i/dmu = -x_i/2
      const double coeff = cfg.lambda_intra * inv_k * 2.0 * dist[i] / denom;
      out.grads[k][i] += coeff * (-0.5) * mu;
      grad_mean[k] += coeff * (-0.5) * group[i];
    }
  }

  if (k_count >= 2) {
    const double scale = cfg.lambda_inter * 2.0 / (static_cast<double>(k_count) * (k_count - 1));
    for (std::size_t a = 0; a < k_count; ++a) {
      for (std::size_t b = a + 1; b < k_count; ++b) {
        const double d = cosine_distance_unchecked(geo[a].mean, geo[b].mean);
        const double hinge = cfg.delta - d;
        if (std::abs(hinge) < kBoundaryBand) {
          out.near_boundary = true;
          out.boundary_note = "inter hinge boundary between groups " + std::to_string(a) + " and " +
                              std::to_string(b);
        }
        if (hinge <= 0.0) continue;
        // d(hinge^2)/dmu_a = 2 hinge * (-dd/dmu_a) = hinge * mu_b
        grad_mean[a] += scale * hinge * geo[b].mean;
        grad_mean[b] += scale * hinge * geo[a].mean;
      }
    }
  }

  for (std::size_t k = 0; k < k_count; ++k) {
    const Vector& mu = geo[k].mean;
    const Vector through_mean = (grad_mean[k] - mu * mu.dot(grad_mean[k])) / geo[k].sum_norm;
    for (auto& g : out.grads[k]) g += through_mean;
  }
  return out;
}

SphereOptimizeResult sphere_optimize(const GroupedEmbeddings& initial, const LossConfig& cfg, int steps,
                                     double rate) {
  if (steps < 0 || !(rate > 0.0)) throw std::invalid_argument("sphere_optimize: bad steps or rate");
  SphereOptimizeResult out;
  out.embeddings = initial;
  double best = std::numeric_limits<double>::infinity();
  auto record = [&](double value) {
    out.loss_trace.push_back(value);
    best = std::min(best, value);
    out.best_trace.push_back(best);
  };

  try {
    for (int s = 0; s < steps; ++s) {
      record(embedding_loss(out.embeddings, cfg));
      const LossGradients grads = loss_gradients(out.embeddings, cfg);
      for (std::size_t k = 0; k < out.embeddings.size(); ++k) {
        for (std::size_t i = 0; i < out.embeddings[k].size(); ++i) {
          Vector& x = out.embeddings[k][i];
          const Vector& g = grads.grads[k][i];
          const Vector tangent = g - x * x.dot(g);
          x -= rate * tangent;
          x.normalize();
        }
      }
    }
    record(embedding_loss(out.embeddings, cfg));
  } catch (const DegenerateError& e) {
    out.aborted = e.what();
  }
  return out;
}

}  // namespace fmc
