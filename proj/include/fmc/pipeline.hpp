#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fmc/cluster.hpp"
#include "fmc/loss.hpp"
#include "fmc/metrics.hpp"
#include "fmc/ptrnn.hpp"
#include "fmc/synth.hpp"

namespace fmc {

enum class EmbeddingSource { network, oracle };

struct PipelineConfig {
  int resize_height = 224;
  int resize_width = 400;
  int channels = 32;
  PtrnnVariant variant = PtrnnVariant::conv;
  VMFConfig vmf;
  LossConfig loss;
  int window = 5;
  double match_threshold = 0.2;

  EmbeddingSource source = EmbeddingSource::network;
  /// Parameter container with "ynet.*" and optionally "ptrnn.*"/"scm.*"
  /// tensors (network source). Without PT-RNN tensors zero weights are used.
  std::filesystem::path params_path;
  /// Directory of ground-truth label maps (oracle source).
  std::filesystem::path oracle_labels;
  double oracle_noise_deg = 10.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on any violated constraint.
  void validate() const;
};

struct WindowReport {
  int index = 0;
  int first_frame = 0;
  int last_frame = 0;
  int trajectories = 0;
  std::vector<int> object_ids;  // one per cluster
};

struct SegmentResult {
  std::vector<Grid> labels;  // per frame, at input resolution
  std::vector<WindowReport> windows;
  std::vector<int> objects;  // distinct ids in order of first appearance
  int trajectories = 0;
  int rejected = 0;
};

/// Sorted image files (.pgm / .ppm) of a frames directory.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

/// Sorted label_*.pgm files of a directory.
std::vector<std::filesystem::path> list_labels(const std::filesystem::path& dir);

/// Name of the flow file for transition t -> t+1 ("fwd_0003.flo" etc).
std::string flow_file_name(bool forward, int t);
std::string label_file_name(int t);

/// Frames -> embeddings -> masks -> links -> PT-RNN -> windowed vMF clustering
/// -> cross-window id matching. Pure: nothing is written.
SegmentResult segment_video(const PipelineConfig& config, const std::vector<Grid>& frames,
                            const std::vector<FlowPair>& pairs, const std::vector<Grid>& oracle_labels);

/// Reads frames and flows, runs segment_video and writes label_NNNN.pgm plus
/// report.jsonl into `out_dir`. All inputs are read before anything is
/// written, and the directory appears only once complete.
SegmentResult run_segment(const PipelineConfig& config, const std::filesystem::path& frames_dir,
                          const std::filesystem::path& flows_dir, const std::filesystem::path& out_dir);

/// Line-delimited JSON report for a segmentation.
std::string segment_report(const SegmentResult& result);

/// Evaluates predicted label maps against ground truth. A directory holding
/// label_*.pgm files (directly or under labels/) is one video; otherwise each
/// subdirectory of `gt_dir` is a video matched by name under `pred_dir`.
/// The last entry is the aggregate.
std::vector<VideoMetrics> run_eval(const std::filesystem::path& gt_dir, const std::filesystem::path& pred_dir);

std::string metrics_record(const VideoMetrics& m);

/// Writes frames/, flows/, labels/, masks/ and scene.txt for a scene.
void run_synth(const SceneSpec& spec, const std::filesystem::path& out_dir);

/// Calls `write(staging)` on a fresh staging directory next to `out_dir`,
/// then renames it into place. The staging directory is removed on failure.
template <typename Fn>
void write_atomically(const std::filesystem::path& out_dir, Fn&& write);

}  // namespace fmc

#include "fmc/pipeline_inl.hpp"
