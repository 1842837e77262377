#pragma once

#include <span>
#include <string>
#include <vector>

#include "fmc/grid.hpp"

namespace fmc {

/// Per-frame integer label maps; 0 is background, ids >= 1 are objects
/// consistent across frames.
using SegmentationLabeling = std::vector<Grid>;

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// Multi-object precision / recall / F.
///
/// Each object id defines a spatio-temporal region. For a (gt g, pred p)
/// pair, P = |g n p| / |p|, R = |g n p| / |g|, F = 2PR / (P + R). Pairs are
/// matched one-to-one by the Hungarian method maximising total F. Recall is
/// averaged over gt objects; precision and F are averaged over
/// max(#gt, #pred) objects. Unmatched objects contribute zeros.
PRF multi_object_prf(const SegmentationLabeling& gt, const SegmentationLabeling& pred);

/// |#distinct gt ids - #distinct pred ids| (background excluded).
double delta_obj(const SegmentationLabeling& gt, const SegmentationLabeling& pred);

/// Pooled |intersection| / |union| of the foreground (label > 0) over all
/// frames; 1 when both are empty.
double foreground_iou(const SegmentationLabeling& gt, const SegmentationLabeling& pred);

struct VideoMetrics {
  std::string video;
  PRF prf;
  double delta_obj = 0.0;
  double iou = 0.0;
};

VideoMetrics evaluate_video(const std::string& name, const SegmentationLabeling& gt,
                            const SegmentationLabeling& pred);

/// Arithmetic mean of every field; the name is "aggregate".
VideoMetrics aggregate(std::span<const VideoMetrics> videos);

}  // namespace fmc
