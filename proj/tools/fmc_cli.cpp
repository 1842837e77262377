#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "checks.hpp"
#include "fmc/error.hpp"
#include "fmc/io.hpp"
#include "fmc/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailed = 1, kUsage = 2, kIo = 3 };

struct SegmentArgs {
  std::string frames, flows, out, variant = "conv", source = "network", params, labels, resize = "224x400";
  int channels = 32;
  int window = 5;
  double kappa = 10.0;
  double match_threshold = 0.2;
  double noise_deg = 10.0;
  std::uint64_t seed = 0;
};

fmc::PipelineConfig to_config(const SegmentArgs& a) {
  fmc::PipelineConfig cfg;
  const auto x = a.resize.find('x');
  if (x == std::string::npos) throw fmc::ConfigError("resize must look like HEIGHTxWIDTH, got '" + a.resize + "'");
  try {
    cfg.resize_height = std::stoi(a.resize.substr(0, x));
    cfg.resize_width = std::stoi(a.resize.substr(x + 1));
  } catch (const std::exception&) {
    throw fmc::ConfigError("resize must look like HEIGHTxWIDTH, got '" + a.resize + "'");
  }
  cfg.channels = a.channels;
  cfg.variant = fmc::parse_variant(a.variant);
  cfg.vmf.kappa = a.kappa;
  cfg.vmf.rng_seed = a.seed;
  cfg.window = a.window;
  cfg.match_threshold = a.match_threshold;
  if (a.source == "oracle") {
    cfg.source = fmc::EmbeddingSource::oracle;
  } else if (a.source != "network") {
    throw fmc::ConfigError("source must be network or oracle, got '" + a.source + "'");
  }
  cfg.params_path = a.params;
  cfg.oracle_labels = a.labels;
  cfg.oracle_noise_deg = a.noise_deg;
  cfg.seed = a.seed;
  return cfg;
}

int print_checks(const std::string& which) {
  bool all_passed = true;
  const auto names = which == "all" ? fmc::checks::suite_names() : std::vector<std::string>{which};
  for (const auto& name : names) {
    const fmc::checks::Report rep = fmc::checks::run(name);
    std::printf("[%s] %s (%.2f s)\n", rep.passed ? "PASS" : "FAIL", rep.suite.c_str(), rep.seconds);
    for (const auto& line : rep.lines) std::printf("  %s\n", line.c_str());
    all_passed = all_passed && rep.passed;
  }
  return all_passed ? kOk : kFailed;
}

// Fills segment options that were not given on the command line from a
// TOML/INI file. Keys are option names without dashes, at top level or under
// a [segment] section.
void apply_config_file(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fmc::IoError("cannot open config file '" + path + "'");
  for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && item.parents != std::vector<std::string>{sub.get_name()}) {
      throw fmc::ConfigError("config file: unexpected section in '" + item.fullname() + "'");
    }
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = name == "config" ? nullptr : sub.get_option_no_throw("--" + name);
    if (opt == nullptr) throw fmc::ConfigError("config file: unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    for (const auto& v : item.inputs) opt->add_result(v);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion segmentation from frames and optical flow"};
  app.require_subcommand(1);

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "Segment a video into consistently labelled objects");
  std::string seg_config;
  segment->add_option("--config", seg_config, "Configuration file (TOML/INI; flags override it)");
  segment->add_option("--frames", seg.frames, "Directory of numbered .pgm/.ppm frames");
  segment->add_option("--flows", seg.flows, "Directory of fwd_NNNN.flo / bwd_NNNN.flo");
  segment->add_option("--out", seg.out, "Output directory (replaced atomically)");
  segment->add_option("--variant", seg.variant, "PT-RNN variant: standard, conv or convGRU")->capture_default_str();
  segment->add_option("--kappa", seg.kappa, "vMF concentration")->capture_default_str();
  segment->add_option("--window", seg.window, "Frames per clustering window")->capture_default_str();
  segment->add_option("--seed", seg.seed, "Random seed")->capture_default_str();
  segment->add_option("--source", seg.source, "Embedding source: network or oracle")->capture_default_str();
  segment->add_option("--params", seg.params, "Parameter container for the network source");
  segment->add_option("--labels", seg.labels, "Label directory for the oracle source");
  segment->add_option("--resize", seg.resize, "Processing size HEIGHTxWIDTH")->capture_default_str();
  segment->add_option("--channels", seg.channels, "Embedding channels")->capture_default_str();
  segment->add_option("--match-threshold", seg.match_threshold, "Cross-window matching gate")->capture_default_str();
  segment->add_option("--noise", seg.noise_deg, "Oracle embedding noise in degrees")->capture_default_str();

  std::string gt_dir, pred_dir, eval_out;
  auto* eval = app.add_subcommand("eval", "Score predicted label maps against ground truth");
  eval->add_option("--gt", gt_dir, "Ground-truth directory")->required();
  eval->add_option("--pred", pred_dir, "Prediction directory")->required();
  eval->add_option("--out", eval_out, "Write the records to this file as well");

  std::string scene_file, synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Render a synthetic scene with flows and ground truth");
  synth->add_option("--config", scene_file, "Scene description")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Overrides the scene seed");

  std::string suite = "all";
  auto* check = app.add_subcommand("check", "Run an oracle check suite");
  check->add_option("suite", suite, "gradients, spherical-mean, ptrnn-equivalence, clustering or all")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*segment) {
      if (!seg_config.empty()) apply_config_file(*segment, seg_config);
      for (const auto* required : {&seg.frames, &seg.flows, &seg.out}) {
        if (required->empty()) throw fmc::ConfigError("segment needs --frames, --flows and --out");
      }
      const fmc::SegmentResult result = fmc::run_segment(to_config(seg), seg.frames, seg.flows, seg.out);
      std::cout << fmc::segment_report(result);
    } else if (*eval) {
      std::string records;
      for (const auto& m : fmc::run_eval(gt_dir, pred_dir)) records += fmc::metrics_record(m) + "\n";
      std::cout << records;
      if (!eval_out.empty()) fmc::io::write_file(eval_out, fmc::io::Bytes(records.begin(), records.end()));
    } else if (*synth) {
      const auto bytes = fmc::io::read_file(scene_file);
      fmc::SceneSpec spec = fmc::parse_scene_spec(std::string(bytes.begin(), bytes.end()));
      if (*synth_seed_opt) spec.rng_seed = synth_seed;
      fmc::run_synth(spec, synth_out);
    } else if (*check) {
      return print_checks(suite);
    }
  } catch (const fmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const fmc::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const fmc::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}
