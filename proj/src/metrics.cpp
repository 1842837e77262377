#include "fmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fmc/error.hpp"
#include "fmc/hungarian.hpp"

namespace fmc {

namespace {

void check_pair(const SegmentationLabeling& gt, const SegmentationLabeling& pred) {
  if (gt.size() != pred.size()) throw ShapeError("metrics: frame counts differ");
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (!gt[t].same_spatial(pred[t])) throw ShapeError("metrics: frame " + std::to_string(t) + " sizes differ");
  }
}

int label_at(const Grid& g, std::size_t i) { return static_cast<int>(std::lround(g.values()[i])); }

std::set<int> object_ids(const SegmentationLabeling& labels) {
  std::set<int> ids;
  for (const auto& frame : labels) {
    for (double v : frame.values()) {
      const int id = static_cast<int>(std::lround(v));
      if (id > 0) ids.insert(id);
    }
  }
  return ids;
}

}  // namespace

PRF multi_object_prf(const SegmentationLabeling& gt, const SegmentationLabeling& pred) {
  check_pair(gt, pred);
  std::map<int, double> gt_size, pred_size;
  std::map<std::pair<int, int>, double> overlap;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    for (std::size_t i = 0; i < gt[t].size(); ++i) {
      const int g = label_at(gt[t], i);
      const int p = label_at(pred[t], i);
      if (g > 0) gt_size[g] += 1.0;
      if (p > 0) pred_size[p] += 1.0;
      if (g > 0 && p > 0) overlap[{g, p}] += 1.0;
    }
  }
  const std::size_t n_gt = gt_size.size();
  const std::size_t n_pred = pred_size.size();
  if (n_gt == 0 || n_pred == 0) return {};

  std::vector<int> gt_ids, pred_ids;
  for (const auto& [id, _] : gt_size) gt_ids.push_back(id);
  for (const auto& [id, _] : pred_size) pred_ids.push_back(id);

  Eigen::MatrixXd prec(n_gt, n_pred), rec(n_gt, n_pred), fscore(n_gt, n_pred);
  for (std::size_t a = 0; a < n_gt; ++a) {
    for (std::size_t b = 0; b < n_pred; ++b) {
      const auto it = overlap.find({gt_ids[a], pred_ids[b]});
      const double inter = it == overlap.end() ? 0.0 : it->second;
      const double p = inter / pred_size[pred_ids[b]];
      const double r = inter / gt_size[gt_ids[a]];
      prec(a, b) = p;
      rec(a, b) = r;
      fscore(a, b) = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
  }
  const Assignment match = hungarian(-fscore);
  PRF sum;
  for (std::size_t a = 0; a < n_gt; ++a) {
    const int b = match.row_to_col[a];
    if (b < 0) continue;
    sum.precision += prec(a, b);
    sum.recall += rec(a, b);
    sum.f += fscore(a, b);
  }
  const double wide = static_cast<double>(std::max(n_gt, n_pred));
  return {sum.precision / wide, sum.recall / static_cast<double>(n_gt), sum.f / wide};
}

double delta_obj(const SegmentationLabeling& gt, const SegmentationLabeling& pred) {
  const double g = static_cast<double>(object_ids(gt).size());
  const double p = static_cast<double>(object_ids(pred).size());
  return std::abs(g - p);
}

double foreground_iou(const SegmentationLabeling& gt, const SegmentationLabeling& pred) {
  check_pair(gt, pred);
  double inter = 0.0;
  double uni = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    const auto g = gt[t].values();
    const auto p = pred[t].values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool a = g[i] > 0.5;
      const bool b = p[i] > 0.5;
      inter += (a && b) ? 1.0 : 0.0;
      uni += (a || b) ? 1.0 : 0.0;
    }
  }
  return uni == 0.0 ? 1.0 : inter / uni;
}

VideoMetrics evaluate_video(const std::string& name, const SegmentationLabeling& gt,
                            const SegmentationLabeling& pred) {
  return {name, multi_object_prf(gt, pred), delta_obj(gt, pred), foreground_iou(gt, pred)};
}

VideoMetrics aggregate(std::span<const VideoMetrics> videos) {
  VideoMetrics out{"aggregate", {}, 0.0, 0.0};
  if (videos.empty()) return out;
  for (const auto& v : videos) {
    out.prf.precision += v.prf.precision;
    out.prf.recall += v.prf.recall;
    out.prf.f += v.prf.f;
    out.delta_obj += v.delta_obj;
    out.iou += v.iou;
  }
  const double n = static_cast<double>(videos.size());
  out.prf.precision /= n;
  out.prf.recall /= n;
  out.prf.f /= n;
  out.delta_obj /= n;
  out.iou /= n;
  return out;
}

}  // namespace fmc
