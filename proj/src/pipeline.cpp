#include "fmc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "fmc/error.hpp"
#include "fmc/io.hpp"
#include "fmc/ynet.hpp"

namespace fs = std::filesystem;

namespace fmc {

namespace {

std::string numbered(const std::string& prefix, int t, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d", t);
  return prefix + buf + ext;
}

// Flow resized to the processing resolution, vectors scaled with the axes.
Grid resize_flow(const Grid& flow, int height, int width) {
  if (flow.height() == height && flow.width() == width) return flow;
  Grid out = resize_bilinear(flow, height, width);
  const double sx = static_cast<double>(width) / flow.width();
  const double sy = static_cast<double>(height) / flow.height();
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      out(r, c, 0) *= sx;
      out(r, c, 1) *= sy;
    }
  }
  return out;
}

Grid negate(const Grid& g) {
  Grid out = g;
  for (double& v : out.values()) v = -v;
  return out;
}

Grid binarize(const Grid& labels) {
  Grid out(labels.height(), labels.width(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) out.values()[i] = labels.values()[i] > 0.5 ? 1.0 : 0.0;
  return out;
}

std::vector<Vector> entry_embeddings(const std::vector<const TrajectoryEmbedding*>& entries) {
  std::vector<Vector> out;
  out.reserve(entries.size());
  for (const auto* e : entries) out.push_back(e->embedding);
  return out;
}

SegmentationLabeling read_labels(const fs::path& dir) {
  SegmentationLabeling out;
  for (const auto& p : list_labels(dir)) out.push_back(io::read_pgm(p));
  return out;
}

fs::path video_label_dir(const fs::path& dir) {
  if (!list_labels(dir).empty()) return dir;
  if (fs::is_directory(dir / "labels") && !list_labels(dir / "labels").empty()) return dir / "labels";
  return {};
}

}  // namespace

namespace detail {

fs::path staging_path(const fs::path& out_dir) {
  fs::path target = out_dir;
  if (target.filename().empty()) target = target.parent_path();
  const fs::path parent = target.parent_path().empty() ? fs::path(".") : target.parent_path();
  fs::create_directories(parent);
  return parent / ("." + target.filename().string() + ".staging-" + std::to_string(::getpid()));
}

void commit_staging(const fs::path& staging, const fs::path& out_dir) {
  std::error_code ec;
  if (fs::exists(out_dir)) fs::remove_all(out_dir);
  fs::rename(staging, out_dir, ec);
  if (ec) throw IoError("cannot move output into '" + out_dir.string() + "': " + ec.message());
}

}  // namespace detail

void PipelineConfig::validate() const {
  if (resize_height < 16 || resize_width < 16 || resize_height % 16 != 0 || resize_width % 16 != 0) {
    throw ConfigError("resize dimensions must be positive multiples of 16, got " + std::to_string(resize_height) +
                      "x" + std::to_string(resize_width));
  }
  if (channels < 2) throw ConfigError("channels must be at least 2");
  if (window < 1) throw ConfigError("window length must be at least 1");
  if (!(match_threshold > 0.0 && match_threshold <= 1.0)) throw ConfigError("match threshold must lie in (0, 1]");
  vmf.validate();
  loss.validate();
  if (source == EmbeddingSource::network && params_path.empty()) {
    throw ConfigError("network embeddings need a parameter container (params)");
  }
  if (source == EmbeddingSource::oracle && oracle_labels.empty()) {
    throw ConfigError("oracle embeddings need a label directory (oracle_labels)");
  }
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("frames directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> list_labels(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("label_", 0) == 0 && e.path().extension() == ".pgm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string flow_file_name(bool forward, int t) { return numbered(forward ? "fwd_" : "bwd_", t, ".flo"); }
std::string label_file_name(int t) { return numbered("label_", t, ".pgm"); }

SegmentResult segment_video(const PipelineConfig& config, const std::vector<Grid>& frames,
                            const std::vector<FlowPair>& pairs, const std::vector<Grid>& oracle_labels) {
  config.validate();
  const int frame_count = static_cast<int>(frames.size());
  if (frame_count == 0) throw ValidationError("segment: no frames");
  if (static_cast<int>(pairs.size()) != frame_count - 1) {
    throw ValidationError("segment: " + std::to_string(frame_count) + " frames need " +
                          std::to_string(frame_count - 1) + " flow pairs, got " + std::to_string(pairs.size()));
  }
  const int in_h = frames[0].height();
  const int in_w = frames[0].width();
  for (const auto& f : frames) {
    if (f.height() != in_h || f.width() != in_w) throw ValidationError("segment: frame sizes differ");
  }
  for (const auto& p : pairs) {
    p.validate();
    if (p.forward.height() != in_h || p.forward.width() != in_w) throw ValidationError("segment: flow size differs from frames");
  }
  const int height = config.resize_height;
  const int width = config.resize_width;

  std::vector<FlowPair> scaled;
  for (const auto& p : pairs) scaled.push_back({resize_flow(p.forward, height, width), resize_flow(p.backward, height, width)});

  // Per-frame embeddings and foreground masks.
  std::vector<Grid> embeddings;
  std::vector<Grid> masks;
  PtrnnParams rnn = PtrnnParams::zeros(config.variant, config.channels);
  if (config.source == EmbeddingSource::oracle) {
    if (static_cast<int>(oracle_labels.size()) != frame_count) {
      throw ValidationError("segment: oracle labels cover " + std::to_string(oracle_labels.size()) + " of " +
                            std::to_string(frame_count) + " frames");
    }
    std::vector<Grid> resized;
    for (const auto& l : oracle_labels) {
      if (l.height() != in_h || l.width() != in_w) throw ValidationError("segment: oracle label size differs from frames");
      resized.push_back(resize_nearest(l, height, width));
    }
    embeddings = oracle_embeddings(resized, config.channels, config.oracle_noise_deg, config.seed);
    for (const auto& l : resized) masks.push_back(binarize(l));
  } else {
    const io::ParamSet params = io::ParamSet::load(config.params_path);
    const YNetParams net = YNetParams::from_params(params);
    if (net.schedule.embedding_channels != config.channels) {
      throw ConfigError("network produces " + std::to_string(net.schedule.embedding_channels) +
                        " channels but the configuration asks for " + std::to_string(config.channels));
    }
    if (params.contains("scm.fc1.weight")) {
      rnn = PtrnnParams::from_params(params);
      if (rnn.channels != config.channels) throw ConfigError("PT-RNN parameters do not match the channel count");
    }
    for (int t = 0; t < frame_count; ++t) {
      const Grid rgb = resize_bilinear(frames[t], height, width);
      Grid flow;
      if (t + 1 < frame_count) {
        flow = scaled[t].forward;
      } else if (t > 0) {
        flow = negate(scaled[t - 1].backward);
      } else {
        flow = Grid(height, width, 2);
      }
      Grid x = ynet_forward(rgb, flow, net);
      masks.push_back(foreground_predict(x, net.fg_head).mask);
      embeddings.push_back(std::move(x));
    }
  }
  // The configured variant wins when no trained PT-RNN weights are supplied.
  if (config.source == EmbeddingSource::oracle) rnn = PtrnnParams::zeros(config.variant, config.channels);

  // Recurrence over the whole video; trajectory ids per frame for labelling.
  SegmentResult result;
  std::vector<std::vector<std::int64_t>> tracks;
  TrajectoryEmbeddingSet emitted;
  PtrnnState state = ptrnn_init(embeddings[0], masks[0], rnn);
  tracks.push_back(state.track);
  for (int t = 1; t < frame_count; ++t) {
    const LinkMask link = link_mask(scaled[t - 1], masks[t - 1], masks[t], t);
    emitted.append(ptrnn_step(state, embeddings[t], scaled[t - 1], link, masks[t], rnn));
    tracks.push_back(state.track);
  }
  emitted.append(finalize_all(state, rnn));
  result.trajectories = static_cast<int>(emitted.entries.size());
  result.rejected = static_cast<int>(emitted.rejected.size());

  // Non-overlapping windows, each clustering the trajectories that end in it.
  std::map<std::int64_t, int> track_object;
  std::vector<Vector> prev_means;
  std::vector<int> prev_ids;
  int next_id = 1;
  std::set<int> seen;
  const int window_count = (frame_count + config.window - 1) / config.window;
  for (int w = 0; w < window_count; ++w) {
    WindowReport report;
    report.index = w;
    report.first_frame = w * config.window;
    report.last_frame = std::min(frame_count, (w + 1) * config.window) - 1;
    std::vector<const TrajectoryEmbedding*> members;
    for (const auto& e : emitted.entries) {
      if (e.end_frame >= report.first_frame && e.end_frame <= report.last_frame) members.push_back(&e);
    }
    report.trajectories = static_cast<int>(members.size());
    if (!members.empty()) {
      const ClusterResult clusters = cluster_embeddings(entry_embeddings(members), config.vmf);
      report.object_ids = match_windows(prev_means, prev_ids, clusters.means, config.match_threshold, next_id);
      for (std::size_t i = 0; i < members.size(); ++i) {
        track_object[members[i]->track] = report.object_ids[clusters.assignments[i]];
      }
      for (int id : report.object_ids) {
        if (seen.insert(id).second) result.objects.push_back(id);
      }
      prev_means = clusters.means;
      prev_ids = report.object_ids;
    }
    result.windows.push_back(std::move(report));
  }

  for (int t = 0; t < frame_count; ++t) {
    Grid labels(height, width, 1);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const std::int64_t track = tracks[t][static_cast<std::size_t>(r) * width + c];
        if (track < 0) continue;
        const auto it = track_object.find(track);
        if (it != track_object.end()) labels(r, c) = it->second;
      }
    }
    result.labels.push_back(resize_nearest(labels, in_h, in_w));
  }
  return result;
}

SegmentResult run_segment(const PipelineConfig& config, const fs::path& frames_dir, const fs::path& flows_dir,
                          const fs::path& out_dir) {
  config.validate();
  const auto frame_files = list_frames(frames_dir);
  if (frame_files.empty()) throw IoError("no .pgm/.ppm frames in '" + frames_dir.string() + "'");
  std::vector<Grid> frames;
  for (const auto& f : frame_files) frames.push_back(io::read_rgb_image(f));

  std::vector<FlowPair> pairs;
  for (int t = 0; t + 1 < static_cast<int>(frames.size()); ++t) {
    FlowPair pair;
    for (bool forward : {true, false}) {
      const fs::path file = flows_dir / flow_file_name(forward, t);
      if (!fs::exists(file)) throw IoError("missing flow file '" + file.string() + "'");
      (forward ? pair.forward : pair.backward) = io::read_flo(file);
    }
    pairs.push_back(std::move(pair));
  }

  std::vector<Grid> oracle;
  if (config.source == EmbeddingSource::oracle) {
    const auto files = list_labels(config.oracle_labels);
    if (files.size() != frames.size()) {
      throw IoError("oracle label directory '" + config.oracle_labels.string() + "' holds " +
                    std::to_string(files.size()) + " label maps for " + std::to_string(frames.size()) + " frames");
    }
    for (const auto& f : files) oracle.push_back(io::read_pgm(f));
  }

  SegmentResult result = segment_video(config, frames, pairs, oracle);
  write_atomically(out_dir, [&](const fs::path& staging) {
    for (std::size_t t = 0; t < result.labels.size(); ++t) {
      io::write_pgm(staging / label_file_name(static_cast<int>(t)), result.labels[t]);
    }
    const std::string report = segment_report(result);
    io::write_file(staging / "report.jsonl", io::Bytes(report.begin(), report.end()));
  });
  return result;
}

std::string segment_report(const SegmentResult& result) {
  std::ostringstream out;
  for (const auto& w : result.windows) {
    nlohmann::ordered_json rec;
    rec["type"] = "window";
    rec["index"] = w.index;
    rec["first_frame"] = w.first_frame;
    rec["last_frame"] = w.last_frame;
    rec["trajectories"] = w.trajectories;
    rec["clusters"] = w.object_ids.size();
    rec["object_ids"] = w.object_ids;
    out << rec.dump() << "\n";
  }
  nlohmann::ordered_json summary;
  summary["type"] = "summary";
  summary["frames"] = result.labels.size();
  summary["trajectories"] = result.trajectories;
  summary["rejected"] = result.rejected;
  summary["objects"] = result.objects;
  out << summary.dump() << "\n";
  return out.str();
}

std::vector<VideoMetrics> run_eval(const fs::path& gt_dir, const fs::path& pred_dir) {
  if (!fs::is_directory(gt_dir)) throw IoError("ground-truth directory '" + gt_dir.string() + "' does not exist");
  if (!fs::is_directory(pred_dir)) throw IoError("prediction directory '" + pred_dir.string() + "' does not exist");

  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> videos;
  if (const fs::path single = video_label_dir(gt_dir); !single.empty()) {
    videos.push_back({gt_dir.filename().string(), {single, video_label_dir(pred_dir)}});
  } else {
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
      if (e.is_directory()) subdirs.push_back(e.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& d : subdirs) {
      const fs::path gt_labels = video_label_dir(d);
      if (gt_labels.empty()) continue;
      videos.push_back({d.filename().string(), {gt_labels, video_label_dir(pred_dir / d.filename())}});
    }
  }
  if (videos.empty()) throw IoError("no label_*.pgm files under '" + gt_dir.string() + "'");

  std::vector<VideoMetrics> out;
  for (const auto& [name, dirs] : videos) {
    const SegmentationLabeling gt = read_labels(dirs.first);
    const SegmentationLabeling pred = dirs.second.empty() ? SegmentationLabeling{} : read_labels(dirs.second);
    if (gt.size() != pred.size()) {
      throw ValidationError("video '" + name + "': " + std::to_string(gt.size()) + " ground-truth frames but " +
                            std::to_string(pred.size()) + " predicted frames");
    }
    out.push_back(evaluate_video(name, gt, pred));
  }
  out.push_back(aggregate(out));
  return out;
}

std::string metrics_record(const VideoMetrics& m) {
  nlohmann::ordered_json rec;
  rec["video"] = m.video;
  rec["P"] = m.prf.precision;
  rec["R"] = m.prf.recall;
  rec["F"] = m.prf.f;
  rec["dObj"] = m.delta_obj;
  rec["IoU"] = m.iou;
  return rec.dump();
}

void run_synth(const SceneSpec& spec, const fs::path& out_dir) {
  const Scene scene = generate_scene(spec);
  write_atomically(out_dir, [&](const fs::path& staging) {
    for (const char* sub : {"frames", "flows", "labels", "masks"}) fs::create_directories(staging / sub);
    for (std::size_t t = 0; t < scene.rgb.size(); ++t) {
      const int i = static_cast<int>(t);
      const Grid& rgb = scene.rgb[t];
      Grid gray(rgb.height(), rgb.width(), 1);
      for (int r = 0; r < rgb.height(); ++r) {
        for (int c = 0; c < rgb.width(); ++c) {
          gray(r, c) = std::round(255.0 * (rgb(r, c, 0) + rgb(r, c, 1) + rgb(r, c, 2)) / 3.0);
        }
      }
      io::write_pgm(staging / "frames" / numbered("frame_", i, ".pgm"), gray);
      io::write_pgm(staging / "labels" / label_file_name(i), scene.labels[t]);
      io::write_pgm(staging / "masks" / numbered("mask_", i, ".pgm"), io::mask_to_pgm_values(scene.masks[t]));
    }
    for (std::size_t t = 0; t < scene.pairs.size(); ++t) {
      io::write_flo(staging / "flows" / flow_file_name(true, static_cast<int>(t)), scene.pairs[t].forward);
      io::write_flo(staging / "flows" / flow_file_name(false, static_cast<int>(t)), scene.pairs[t].backward);
    }
    const std::string text = format_scene_spec(spec);
    io::write_file(staging / "scene.txt", io::Bytes(text.begin(), text.end()));
  });
}

}  // namespace fmc
