#pragma once

// Shared train/eval/render workflows used by both the CLI and the
// integration tests, so a command-line run and an in-process run follow the
// exact same code path.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hvtr/training.hpp"

namespace hvtr {

struct TrainRunResult {
  bool ok = true;
  std::string error;
  std::string checkpoint_dir;
  std::string loss_log_path;
  double step0_total = 0;
  double final_total = 0;
};

// Runs cfg.iterations training steps, appending a JSONL loss trace and
// writing periodic + final checkpoints under out_dir. The effective config
// is echoed so the run reproduces from its artifacts.
template <typename T>
TrainRunResult run_training(Trainer<T>& trainer, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const RunConfig& cfg = trainer.pipeline().cfg;
  fs::create_directories(out_dir);
  cfg.save(out_dir + "/config_effective.cfg");

  TrainRunResult res;
  res.loss_log_path = out_dir + "/loss_log.jsonl";
  std::ofstream log(res.loss_log_path, trainer.iteration() > 0 ? std::ios::app : std::ios::out);
  if (!log) throw std::runtime_error("cannot write loss log in " + out_dir);

  bool first = true;
  while (trainer.iteration() < cfg.iterations) {
    const int iter = trainer.iteration();
    StepResult sr = trainer.step();
    if (!sr.ok) {
      res.ok = false;
      res.error = "step " + std::to_string(iter) + " aborted: non-finite loss in '" + sr.error +
                  "'";
      break;
    }
    if (first) {
      res.step0_total = sr.total;
      first = false;
    }
    res.final_total = sr.total;
    if (iter % cfg.log_every == 0) log << loss_trace_line(iter, sr) << "\n";
    if ((iter + 1) % cfg.checkpoint_every == 0 && iter + 1 < cfg.iterations)
      trainer.save_checkpoint(out_dir + "/ckpt_" + std::to_string(iter + 1));
  }
  log.flush();
  res.checkpoint_dir = out_dir + "/checkpoint";
  trainer.save_checkpoint(res.checkpoint_dir);
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRow {
  int frame = 0, cam = 0;
  double psnr = 0, ssim = 0, iou = 0, vol_psnr = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  double iou_mean = 0, iou_std = 0;
  double vol_psnr_mean = 0, vol_psnr_std = 0;
  bool has_renderer = true;
};

inline Image image_area_downsample(const Image& img, int S) {
  check(img.width % S == 0 && img.height % S == 0, "image_area_downsample: size not divisible");
  Image out(img.width / S, img.height / S, img.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0;
        for (int dy = 0; dy < S; ++dy)
          for (int dx = 0; dx < S; ++dx) acc += img.at(x * S + dx, y * S + dy, c);
        out.at(x, y, c) = (float)(acc / (S * S));
      }
  return out;
}

template <typename T>
EvalReport evaluate_split(Trainer<T>& trainer, bool train_split) {
  EvalReport report;
  report.has_renderer = mode_uses_renderer(trainer.pipeline().mode);
  const auto items = trainer.data().split(train_split);
  check(!items.empty(), "evaluate: empty split");
  const int S = trainer.pipeline().cfg.downsample_factor;
  for (const auto& item : items) {
    auto rr = trainer.render_item(item);
    const Image gt = load_pnm(trainer.data().root + "/" + item.image_path);
    const Image gt_mask = load_pnm(trainer.data().root + "/" + item.mask_path);
    EvalRow row;
    row.frame = item.frame;
    row.cam = item.cam;
    if (report.has_renderer) {
      row.psnr = psnr(rr.image, gt);
      row.ssim = ssim(rr.image, gt);
      row.iou = mask_iou(rr.mask, gt_mask);
    }
    if (rr.vol_rgb.width > 0) row.vol_psnr = psnr(rr.vol_rgb, image_area_downsample(gt, S));
    report.rows.push_back(row);
  }
  auto aggregate = [&](auto getter, double* mean, double* stddev) {
    double m = 0;
    for (const auto& r : report.rows) m += getter(r);
    m /= report.rows.size();
    double v = 0;
    for (const auto& r : report.rows) v += (getter(r) - m) * (getter(r) - m);
    *mean = m;
    *stddev = std::sqrt(v / report.rows.size());
  };
  aggregate([](const EvalRow& r) { return r.psnr; }, &report.psnr_mean, &report.psnr_std);
  aggregate([](const EvalRow& r) { return r.ssim; }, &report.ssim_mean, &report.ssim_std);
  aggregate([](const EvalRow& r) { return r.iou; }, &report.iou_mean, &report.iou_std);
  aggregate([](const EvalRow& r) { return r.vol_psnr; }, &report.vol_psnr_mean,
            &report.vol_psnr_std);
  return report;
}

inline void write_eval_report(const EvalReport& report, const std::string& path) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row;
    row["frame"] = r.frame;
    row["cam"] = r.cam;
    if (report.has_renderer) {
      row["psnr"] = r.psnr;
      row["ssim"] = r.ssim;
      row["mask_iou"] = r.iou;
    }
    row["vol_psnr"] = r.vol_psnr;
    j["rows"].push_back(row);
  }
  if (report.has_renderer) {
    j["aggregate"]["psnr"] = {{"mean", report.psnr_mean}, {"std", report.psnr_std}};
    j["aggregate"]["ssim"] = {{"mean", report.ssim_mean}, {"std", report.ssim_std}};
    j["aggregate"]["mask_iou"] = {{"mean", report.iou_mean}, {"std", report.iou_std}};
  }
  j["aggregate"]["vol_psnr"] = {{"mean", report.vol_psnr_mean}, {"std", report.vol_psnr_std}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write report " + path);
  os << j.dump(2) << "\n";
}

// Builds a trainer for a finished checkpoint directory (config echo +
// parameters) against a dataset manifest.
template <typename T>
std::unique_ptr<Trainer<T>> trainer_from_checkpoint(const std::string& ckpt_dir,
                                                    const DatasetManifest& data) {
  RunConfig cfg = RunConfig::load(ckpt_dir + "/config.cfg");
  CheckpointReader reader(ckpt_dir);
  const TrainMode mode = train_mode_from_name(reader.meta("mode"));
  auto trainer = std::make_unique<Trainer<T>>(cfg, mode, data);
  trainer->load_checkpoint(ckpt_dir);
  return trainer;
}

}  // namespace hvtr
