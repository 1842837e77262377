#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fmc/grid.hpp"

namespace fmc {

using Vector = Eigen::VectorXd;

/// K groups of unit-norm embeddings, one group per object.
using GroupedEmbeddings = std::vector<std::vector<Vector>>;

struct LossConfig {
  double alpha = 0.02;   // intra-object margin (cosine distance)
  double delta = 0.5;    // inter-object margin
  double lambda_fg = 1.0;
  double lambda_intra = 1.0;
  double lambda_inter = 1.0;
  double denom_floor = 50.0;

  void validate() const;
};

/// d(x, y) = (1 - x.y) / 2 for unit vectors. Throws std::domain_error when
/// either norm is more than 1e-6 away from 1.
double cosine_distance(const Vector& x, const Vector& y);
inline double cosine_distance_unchecked(const Vector& x, const Vector& y) { return 0.5 * (1.0 - x.dot(y)); }

/// Angle in degrees between unit vectors at cosine distance d.
inline double distance_to_degrees(double d) { return std::acos(1.0 - 2.0 * d) * 180.0 / M_PI; }

/// Normalised vector sum, which minimises the mean cosine distance to the
/// set. Throws DegenerateError when the sum has norm below 1e-12.
Vector spherical_mean(const std::vector<Vector>& vectors);

/// Mean binary cross-entropy on logits, computed in the log-sum-exp form.
double loss_fg(const Grid& logits, const Grid& labels);

double loss_intra(const GroupedEmbeddings& groups, const LossConfig& cfg);
double loss_inter(const std::vector<Vector>& means, const LossConfig& cfg);

struct LossBreakdown {
  double fg = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double total = 0.0;
};

LossBreakdown loss_total(const Grid& logits, const Grid& labels, const GroupedEmbeddings& groups,
                         const LossConfig& cfg);

struct LossGradients {
  /// Same layout as the input groups; gradient of intra + inter with respect
  /// to each embedding in the ambient space.
  GroupedEmbeddings grads;
  /// Set when some indicator or hinge sits within 1e-7 of switching; the
  /// gradient there is a one-sided derivative.
  bool near_boundary = false;
  std::string boundary_note;
};

/// Analytic gradient of lambda_intra * intra + lambda_inter * inter, with the
/// group means differentiated as functions of the embeddings. Indicators and
/// the floored denominators are treated as locally constant.
LossGradients loss_gradients(const GroupedEmbeddings& groups, const LossConfig& cfg);

/// Embedding-only part of the objective (lambda-weighted intra + inter).
double embedding_loss(const GroupedEmbeddings& groups, const LossConfig& cfg);

struct SphereOptimizeResult {
  GroupedEmbeddings embeddings;
  std::vector<double> loss_trace;       // loss before every step, plus the final loss
  std::vector<double> best_trace;       // running minimum of loss_trace
  std::optional<std::string> aborted;   // set when a group mean degenerated
};

/// Projected gradient descent on the sphere: step against the tangent
/// component of the gradient, then renormalise each embedding.
SphereOptimizeResult sphere_optimize(const GroupedEmbeddings& initial, const LossConfig& cfg, int steps,
                                     double rate);

}  // namespace fmc
