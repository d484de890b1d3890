// Command-line front end: synthetic data generation, mask refinement,
// TSDF fusion, PLY export, and IOU evaluation.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panfuse/panfuse.hpp"

namespace fs = std::filesystem;
using namespace panfuse;

namespace {

struct FillOptions {
  bool enabled = true;
  int kernel = 5;
  double sigma = 1.0;
};

struct RefineOptions {
  RefineConfig cfg;
  int threads = 1;
};

// --config names a key=value file whose entries fill in any option the
// command line left unset; explicit flags always win. Boolean switches are
// command-line only.
void apply_config_file(CLI::App* cmd, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  const auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config " + where() + ": not key=value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    CLI::Option* opt = key.empty() ? nullptr : cmd->get_option_no_throw("--" + key);
    if (!opt)
      throw std::runtime_error("config " + where() + ": unknown key '" + key + "'");
    if (opt->get_expected_min() == 0)
      throw std::runtime_error("config " + where() + ": '" + key +
                               "' is a switch; pass it on the command line");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void add_fill_flags(CLI::App* cmd, FillOptions& opts) {
  cmd->add_flag("--no-fill{false}", opts.enabled,
                "Skip depth hole filling before refinement");
  cmd->add_option("--fill-kernel", opts.kernel, "Hole-fill kernel size (odd, >= 3)")
      ->capture_default_str();
  cmd->add_option("--fill-sigma", opts.sigma, "Hole-fill Gaussian sigma")
      ->capture_default_str();
}

void add_refine_flags(CLI::App* cmd, RefineOptions& opts) {
  cmd->add_option("--grid-size", opts.cfg.grid_size, "KDE grid size")
      ->capture_default_str();
  cmd->add_option("--threshold", opts.cfg.density_threshold,
                  "Density cutoff threshold")
      ->capture_default_str();
  cmd->add_option("--min-pixels", opts.cfg.min_samples,
                  "Minimum mask pixels with valid depth to attempt refinement")
      ->capture_default_str();
  cmd->add_option("--padding", opts.cfg.padding_bandwidths,
                  "Grid padding in pilot bandwidths")
      ->capture_default_str();
  cmd->add_option("--threads", opts.threads, "Refinement worker threads")
      ->capture_default_str();
}

DepthMap prepare_depth(const DepthMap& raw, const FillOptions& fill) {
  if (!fill.enabled) return raw;
  HoleFillConfig cfg;
  cfg.kernel_size = fill.kernel;
  cfg.sigma = fill.sigma;
  return fill_holes(raw, cfg);
}

class FrameTimer {
 public:
  FrameTimer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

int run_gen_synthetic(const fs::path& out, const SyntheticSceneSpec& spec) {
  generate_synthetic_sequence(out, spec);
  std::cerr << "wrote " << spec.frames << " " << to_string(spec.kind)
            << " frames to " << out.string() << "\n";
  return 0;
}

int run_refine(const fs::path& dataset, const fs::path& out,
               const FillOptions& fill, const RefineOptions& refine) {
  SequenceReader reader(dataset);
  if (fs::weakly_canonical(out / "mask") == fs::weakly_canonical(dataset / "mask"))
    throw std::runtime_error("refusing to overwrite the input mask directory");
  fs::create_directories(out / "mask");

  std::size_t refined_total = 0, skipped_total = 0;
  for (int i = 0; i < reader.frame_count(); ++i) {
    FrameTimer timer;
    const LabeledRgbdFrame frame = reader.load_frame(i);
    const DepthMap depth = prepare_depth(frame.depth, fill);
    const auto results = refine_all(frame.masks, depth, refine.cfg, refine.threads);
    const FrameRefineReport report = summarize_refinement(results);

    std::vector<InstanceMask> masks;
    masks.reserve(results.size());
    for (const RefineResult& r : results) masks.push_back(r.mask);
    write_refined_mask_image(out / "mask" / frame_file_name(i, "png"),
                             reader.load_mask_image(i), masks);

    refined_total += report.refined_count;
    skipped_total += report.skipped_count;
    std::cerr << "frame " << i + 1 << "/" << reader.frame_count() << " refined "
              << report.refined_count << " skipped " << report.skipped_count << " ("
              << timer.ms() << " ms)\n";
  }
  std::cerr << "refined " << refined_total << " masks, skipped " << skipped_total
            << "\n";
  return 0;
}

int run_fuse(const fs::path& dataset, const fs::path& out, double voxel_size,
             double truncation, bool refine_on, WeightMode weight_mode,
             const FillOptions& fill, const RefineOptions& refine) {
  SequenceReader reader(dataset);
  PanopticVoxelMap map(voxel_size, truncation);
  IntegrateConfig integrate_cfg;
  integrate_cfg.weight_mode = weight_mode;

  for (int i = 0; i < reader.frame_count(); ++i) {
    FrameTimer timer;
    LabeledRgbdFrame frame = reader.load_frame(i);
    frame.depth = prepare_depth(frame.depth, fill);
    std::size_t refined = 0;
    if (refine_on) {
      const auto results =
          refine_all(frame.masks, frame.depth, refine.cfg, refine.threads);
      refined = summarize_refinement(results).refined_count;
      for (std::size_t m = 0; m < results.size(); ++m)
        frame.masks[m] = results[m].mask;
    }
    const IntegrationStats stats = integrate_frame(map, frame, integrate_cfg);
    std::cerr << "frame " << i + 1 << "/" << reader.frame_count() << " refined "
              << refined << " masks, updated " << stats.voxels_updated
              << " voxels (" << timer.ms() << " ms)\n";
  }

  save_voxel_map(out, map);
  std::cerr << "map: " << map.voxel_count() << " voxels -> " << out.string()
            << "\n";
  return 0;
}

int run_export_ply(const fs::path& map_path, const fs::path& out,
                   const std::string& color_by, std::optional<double> band) {
  const PanopticVoxelMap map = load_voxel_map(map_path);
  const double b = band.value_or(map.voxel_size());
  export_ply(out, map, b, parse_color_by(color_by));
  std::cerr << "wrote " << out.string() << "\n";
  return 0;
}

std::vector<std::vector<InstanceMask>> load_mask_dir(const fs::path& dir,
                                                     const SequenceManifest& manifest) {
  std::vector<std::vector<InstanceMask>> frames;
  for (int i = 0; i < manifest.frame_count; ++i) {
    const fs::path path = dir / frame_file_name(i, "png");
    frames.push_back(decode_mask_image(read_png_gray16(path), manifest));
  }
  return frames;
}

int run_eval_iou(const fs::path& dataset, fs::path pred_dir, fs::path gt_dir) {
  const SequenceManifest manifest = load_manifest(dataset / "manifest.txt");
  if (pred_dir.empty()) pred_dir = dataset / "mask";
  if (gt_dir.empty()) gt_dir = dataset / "mask_gt";

  const auto preds = load_mask_dir(pred_dir, manifest);
  const auto gts = load_mask_dir(gt_dir, manifest);
  const IouReport report = dataset_mask_iou(pred_dir.string(), preds, gts);
  std::cout << std::fixed << std::setprecision(4)
            << "mask_iou_percent=" << report.mean_percent
            << " matched=" << report.matched
            << " unmatched=" << report.unmatched() << "\n";
  return 0;
}

int run_report(const fs::path& dataset, const fs::path& csv,
               const FillOptions& fill, const RefineOptions& refine) {
  SequenceReader reader(dataset);
  if (!reader.has_gt_masks())
    throw std::runtime_error("dataset has no mask_gt directory");

  std::vector<std::vector<InstanceMask>> gts, unrefined, refined;
  for (int i = 0; i < reader.frame_count(); ++i) {
    FrameTimer timer;
    const LabeledRgbdFrame frame = reader.load_frame(i);
    const DepthMap depth = prepare_depth(frame.depth, fill);
    gts.push_back(decode_mask_image(reader.load_gt_mask_image(i), reader.manifest()));
    unrefined.push_back(frame.masks);

    const auto results = refine_all(frame.masks, depth, refine.cfg, refine.threads);
    std::vector<InstanceMask> masks;
    masks.reserve(results.size());
    for (const RefineResult& r : results) masks.push_back(r.mask);
    refined.push_back(std::move(masks));
    std::cerr << "frame " << i + 1 << "/" << reader.frame_count() << " ("
              << timer.ms() << " ms)\n";
  }

  const std::vector<IouReport> variants = {
      dataset_mask_iou("unrefined", unrefined, gts),
      dataset_mask_iou("refined", refined, gts)};
  const auto rows = make_refinement_report(variants);
  std::cout << format_report_table(rows);
  if (!csv.empty()) {
    write_report_csv(csv, rows);
    std::cerr << "wrote " << csv.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-driven instance mask refinement and panoptic TSDF fusion"};
  app.require_subcommand(1);

  std::map<CLI::App*, fs::path> config_files;
  const auto add_config_option = [&config_files](CLI::App* cmd) {
    cmd->add_option("--config", config_files[cmd],
                    "key=value file filling in options the command line leaves unset");
  };

  // gen-synthetic
  SyntheticSceneSpec spec;
  std::string scene_name = "boxes-room";
  fs::path gen_out;
  auto* gen = app.add_subcommand("gen-synthetic", "Render a synthetic RGB-D sequence");
  add_config_option(gen);
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--scene", scene_name, "plane, sphere, or boxes-room")
      ->capture_default_str();
  gen->add_option("--frames", spec.frames)->capture_default_str();
  gen->add_option("--width", spec.width)->capture_default_str();
  gen->add_option("--height", spec.height)->capture_default_str();
  gen->add_option("--fx", spec.fx)->capture_default_str();
  gen->add_option("--fy", spec.fy)->capture_default_str();
  gen->add_option("--cx", spec.cx)->capture_default_str();
  gen->add_option("--cy", spec.cy)->capture_default_str();
  gen->add_option("--depth-scale", spec.depth_scale)->capture_default_str();
  gen->add_option("--depth-sigma", spec.depth_sigma, "Depth noise sigma (m)")
      ->capture_default_str();
  gen->add_option("--hole-prob", spec.hole_prob, "Depth dropout probability")
      ->capture_default_str();
  gen->add_option("--leak-prob", spec.leak_prob, "Mask leak probability")
      ->capture_default_str();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_flag("--no-rgb{false}", spec.write_rgb, "Skip RGB rendering");

  // refine
  fs::path refine_dataset, refine_out;
  FillOptions refine_fill;
  RefineOptions refine_opts;
  auto* ref = app.add_subcommand("refine", "Refine instance masks against depth");
  add_config_option(ref);
  ref->add_option("--dataset", refine_dataset, "Input dataset directory")->required();
  ref->add_option("--out", refine_out, "Output directory (gets mask/)")->required();
  add_fill_flags(ref, refine_fill);
  add_refine_flags(ref, refine_opts);

  // fuse
  fs::path fuse_dataset, fuse_out;
  double voxel_size = 0.05, truncation = 0.2;
  bool no_refine = false;
  std::string weight_mode_name = "constant";
  FillOptions fuse_fill;
  RefineOptions fuse_refine;
  auto* fuse = app.add_subcommand("fuse", "Fuse a sequence into a TSDF voxel map");
  add_config_option(fuse);
  fuse->add_option("--dataset", fuse_dataset, "Input dataset directory")->required();
  fuse->add_option("--out", fuse_out, "Output map file")->required();
  fuse->add_option("--voxel-size", voxel_size)->capture_default_str();
  fuse->add_option("--truncation", truncation)->capture_default_str();
  fuse->add_flag("--no-refine", no_refine, "Integrate the raw masks");
  fuse->add_option("--weight-mode", weight_mode_name, "constant or inverse-square")
      ->capture_default_str();
  add_fill_flags(fuse, fuse_fill);
  add_refine_flags(fuse, fuse_refine);

  // export-ply
  fs::path ply_map, ply_out;
  std::string color_by = "instance";
  std::optional<double> band;
  auto* ply = app.add_subcommand("export-ply", "Export a voxel map as a point cloud");
  add_config_option(ply);
  ply->add_option("--map", ply_map, "Input map file")->required();
  ply->add_option("--out", ply_out, "Output PLY file")->required();
  ply->add_option("--color-by", color_by, "instance or class")->capture_default_str();
  ply->add_option("--band", band, "Surface band (default: voxel size)");

  // eval-iou
  fs::path eval_dataset, pred_dir, gt_dir;
  auto* eval = app.add_subcommand("eval-iou", "Instance-mean mask IOU");
  add_config_option(eval);
  eval->add_option("--dataset", eval_dataset, "Dataset directory (manifest)")
      ->required();
  eval->add_option("--pred", pred_dir, "Predicted mask directory (default: mask/)");
  eval->add_option("--gt", gt_dir, "Ground-truth mask directory (default: mask_gt/)");

  // report
  fs::path report_dataset, report_csv;
  FillOptions report_fill;
  RefineOptions report_opts;
  auto* rep =
      app.add_subcommand("report", "Compare mask IOU with and without refinement");
  add_config_option(rep);
  rep->add_option("--dataset", report_dataset, "Dataset directory")->required();
  rep->add_option("--csv", report_csv, "Also write rows as CSV");
  add_fill_flags(rep, report_fill);
  add_refine_flags(rep, report_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [cmd, path] : config_files)
      if (cmd->parsed() && !path.empty()) apply_config_file(cmd, path);
    if (gen->parsed()) {
      spec.kind = parse_scene_kind(scene_name);
      return run_gen_synthetic(gen_out, spec);
    }
    if (ref->parsed())
      return run_refine(refine_dataset, refine_out, refine_fill, refine_opts);
    if (fuse->parsed()) {
      WeightMode mode;
      if (weight_mode_name == "constant")
        mode = WeightMode::constant;
      else if (weight_mode_name == "inverse-square")
        mode = WeightMode::inverse_square;
      else
        throw std::runtime_error("unknown weight mode '" + weight_mode_name + "'");
      return run_fuse(fuse_dataset, fuse_out, voxel_size, truncation, !no_refine,
                      mode, fuse_fill, fuse_refine);
    }
    if (ply->parsed()) return run_export_ply(ply_map, ply_out, color_by, band);
    if (eval->parsed()) return run_eval_iou(eval_dataset, pred_dir, gt_dir);
    if (rep->parsed()) return run_report(report_dataset, report_csv, report_fill,
                                         report_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
