#pragma once

// End-to-end optimization: assembles the full pipeline (pose encoder,
// latents, field MLP, texture encoder, fusion, renderer, discriminator),
// runs the generator-then-discriminator training step, evaluates PSNR/SSIM/
// IoU, and serializes everything into the checkpoint container.
//
// Ablation modes share this one code path:
//   full        - everything
//   pdnerf-only - pose encoder + normal head + field + Z_G, losses vol+norm
//   no-vol      - textural branch only (fusion input is the texture features)
//   no-tex      - volumetric branch only (fusion input is the lifted volume)

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hvtr/adam.hpp"
#include "hvtr/checkpoint.hpp"
#include "hvtr/config.hpp"
#include "hvtr/hybrid_renderer.hpp"
#include "hvtr/losses.hpp"
#include "hvtr/metrics.hpp"
#include "hvtr/pdnerf.hpp"
#include "hvtr/pose_encoding.hpp"
#include "hvtr/synthetic_data.hpp"

namespace hvtr {

enum class TrainMode { kFull, kPdnerfOnly, kNoVol, kNoTex };

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kFull: return "full";
    case TrainMode::kPdnerfOnly: return "pdnerf-only";
    case TrainMode::kNoVol: return "no-vol";
    case TrainMode::kNoTex: return "no-tex";
  }
  return "?";
}

inline TrainMode train_mode_from_name(const std::string& s) {
  if (s == "full") return TrainMode::kFull;
  if (s == "pdnerf-only") return TrainMode::kPdnerfOnly;
  if (s == "no-vol") return TrainMode::kNoVol;
  if (s == "no-tex") return TrainMode::kNoTex;
  if (s == "concat-fusion") return TrainMode::kFull;  // fusion choice, full path
  throw std::invalid_argument("unknown train mode '" + s + "'");
}

inline bool mode_uses_volume(TrainMode m) { return m != TrainMode::kNoVol; }
inline bool mode_uses_texture(TrainMode m) {
  return m == TrainMode::kFull || m == TrainMode::kNoVol;
}
inline bool mode_uses_renderer(TrainMode m) { return m != TrainMode::kPdnerfOnly; }

// ---------------------------------------------------------------------------

template <typename T>
struct Pipeline {
  RunConfig cfg;
  TrainMode mode = TrainMode::kFull;
  SkinnedTemplate body;
  PositionalEncoderCfg pos_cfg, dir_cfg;

  ParamRegistry<T> gen_reg, disc_reg;
  PoseEncoder<T> pose_encoder;
  TensorT<T> z_g, z_t;
  FieldMlp<T> field;
  TextureEncoder<T> tex_encoder;
  FeatureFusion<T> fusion;
  TexRenderer<T> renderer;
  MultiScaleDiscriminator<T> discriminator;

  int pose_feat_channels() const { return cfg.c_geo + cfg.latent_channels; }

  Pipeline(const RunConfig& cfg_, TrainMode mode_, SkinnedTemplate body_)
      : cfg(cfg_), mode(mode_), body(std::move(body_)) {
    cfg.validate();
    pos_cfg = {cfg.l_pos, true};
    dir_cfg = {cfg.l_dir, true};
    Rng rng(Rng::mix(cfg.seed, 0xA11CE));
    const int U = cfg.uv_size;
    pose_encoder = PoseEncoder<T>(gen_reg, "fp", 3 + cfg.latent_channels, cfg.posenet_base,
                                  cfg.c_geo, norm_mode(), rng);
    // latents: shared across poses, zero-mean small init
    z_g = gen_reg.create("latent.Z_G", {1, cfg.latent_channels, U, U}, rng, 0.01);
    z_t = gen_reg.create("latent.Z_T", {1, cfg.latent_channels, U, U}, rng, 0.01);
    const int field_in = pos_cfg.output_dim(3) + pose_feat_channels();
    field = FieldMlp<T>(gen_reg, "field", field_in, dir_cfg.output_dim(3), cfg.mlp_width,
                        cfg.field_feat_dim, rng);
    tex_encoder = TextureEncoder<T>(gen_reg, "ftex", pose_feat_channels(), cfg.ctex,
                                    cfg.downsample_factor, norm_mode(), rng);
    fusion = FeatureFusion<T>(gen_reg, "fusion", cfg.field_feat_dim, cfg.ctex,
                              cfg.fusion == "aff", rng);
    renderer = TexRenderer<T>(gen_reg, "fr", cfg.ctex, cfg.downsample_factor, norm_mode(), rng);
    Rng drng(Rng::mix(cfg.seed, 0xD15C));
    discriminator = MultiScaleDiscriminator<T>(disc_reg, "disc", 3 + pose_feat_channels(),
                                               norm_mode(), drng);
  }

  NormMode norm_mode() const {
    return cfg.norm == "batch" ? NormMode::kBatch : NormMode::kInstance;
  }

  // Parameters the generator optimizer updates in this mode (also exactly
  // the set the forward path uses).
  std::vector<TensorT<T>> trainable_generator_params() const {
    auto want = [&](const std::string& name) {
      auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
      switch (mode) {
        case TrainMode::kFull:
          return true;
        case TrainMode::kPdnerfOnly:
          return starts("fp.") || starts("field.") || name == "latent.Z_G";
        case TrainMode::kNoVol:
          return starts("fp.") || starts("ftex.") || starts("fr.") || starts("latent.");
        case TrainMode::kNoTex:
          return starts("fp.") || starts("field.") || starts("fr.") || starts("fusion.lift") ||
                 starts("latent.");
      }
      return false;
    };
    std::vector<TensorT<T>> out;
    for (const auto& p : gen_reg.params)
      if (want(p.name())) out.push_back(p);
    return out;
  }

  std::vector<TensorT<T>> discriminator_params() const { return disc_reg.params; }
};

// Per-frame fixed geometry: posed mesh, raster buffers, ray bounds, baked
// maps, and the projection BVH (rebuilt per pose; refitting is insufficient
// under large articulation).
struct FrameGeometry {
  TriMesh posed;
  RasterOutput raster;
  NearFarBuffers near_far;  // at the downsampled ray grid
  UvPositionalMap posmap;
  UvNormalMap normals_gt;
  std::unique_ptr<TriangleBvh> bvh;
};

inline FrameGeometry prepare_frame(const SkinnedTemplate& body, const PoseParams& pose,
                                   const ShapeParams& shape, const Camera& cam,
                                   const RunConfig& cfg) {
  FrameGeometry fg;
  fg.posed = lbs_pose(body, pose, shape);
  fg.raster = rasterize(fg.posed, cam);
  fg.near_far = near_far_buffers(dilate_mesh(fg.posed, cfg.dilation_m),
                                 cam.downsampled(cfg.downsample_factor));
  fg.posmap = bake_positional_map(fg.posed, cfg.uv_size);
  fg.normals_gt = bake_normal_map_gt(fg.posed, cfg.uv_size);
  fg.bvh = std::make_unique<TriangleBvh>(fg.posed);
  return fg;
}

// ---------------------------------------------------------------------------
// Generator forward

template <typename T>
struct GeneratorOutputs {
  TensorT<T> psi_uv_p;   // [1, Cp, U, U]
  TensorT<T> psi_uv_n;   // [1, 3, U, U]
  RaySamples samples;
  TensorT<T> vol_rows;       // [R, hbar] per-ray features
  TensorT<T> vol_alpha_rows;  // [R, 1]
  TensorT<T> psi_im_vol;      // [1, hbar, Hd, Wd] (assembled when not subsampling)
  TensorT<T> vol_alpha;       // [1, 1, Hd, Wd]
  TensorT<T> psi_im_p;        // [1, Cp, H, W]
  TensorT<T> image;           // [1, 3, H, W]
  TensorT<T> mask;            // [1, 1, H, W]
};

template <typename T>
GeneratorOutputs<T> generator_forward(const Pipeline<T>& pipe, const FrameGeometry& fg,
                                      const Camera& cam, Rng* rng,
                                      const std::vector<int>* ray_subset = nullptr) {
  const RunConfig& cfg = pipe.cfg;
  GeneratorOutputs<T> out;

  auto posmap_t = positional_map_tensor<T>(fg.posmap);
  auto enc = pipe.pose_encoder.forward(concat_channels(posmap_t, pipe.z_g));
  out.psi_uv_n = enc.uv_normals;
  out.psi_uv_p = assemble_pose_features(enc.geo_features, pipe.z_t);

  if (mode_uses_volume(pipe.mode)) {
    out.samples = sample_rays(cam, cfg.downsample_factor, fg.near_far, fg.posed, *fg.bvh,
                              cfg.samples_per_ray, cfg.dilation_m, rng, ray_subset);
    const int M = out.samples.sample_count();
    const int R = out.samples.ray_count();
    if (M > 0) {
      // field inputs: gamma(u, v, h) | z sampled from the pose features
      const int enc_dim = pipe.pos_cfg.output_dim(3);
      TensorT<T> q_enc(Shape{M, enc_dim});
      TensorT<T> uv_coords(Shape{M, 2});
      std::vector<float> enc_buf(enc_dim);
      for (int i = 0; i < M; ++i) {
        const LocalCoord& lc = out.samples.coords[i];
        const double q_local[3] = {lc.u, lc.v, lc.h};
        positional_encode(q_local, 3, pipe.pos_cfg, enc_buf.data());
        for (int k = 0; k < enc_dim; ++k) q_enc.data()[(int64_t)i * enc_dim + k] = (T)enc_buf[k];
        const Vec2 uv = to_uv(lc, fg.posed);
        uv_coords.data()[i * 2 + 0] = (T)uv.x();
        uv_coords.data()[i * 2 + 1] = (T)uv.y();
      }
      const int dir_dim = pipe.dir_cfg.output_dim(3);
      TensorT<T> dir_enc(Shape{M, dir_dim});
      std::vector<float> dir_buf(dir_dim);
      for (int r = 0; r < R; ++r) {
        const double d[3] = {out.samples.ray_dirs[r].x(), out.samples.ray_dirs[r].y(),
                             out.samples.ray_dirs[r].z()};
        positional_encode(d, 3, pipe.dir_cfg, dir_buf.data());
        for (int i = out.samples.offsets[r]; i < out.samples.offsets[r + 1]; ++i)
          for (int k = 0; k < dir_dim; ++k)
            dir_enc.data()[(int64_t)i * dir_dim + k] = (T)dir_buf[k];
      }
      const int U = cfg.uv_size;
      auto z_rows = grid_sample_bilinear(
          out.psi_uv_p.reshape({pipe.pose_feat_channels(), U, U}), uv_coords);
      auto field_out = pipe.field.forward(concat_channels(q_enc, z_rows), dir_enc);
      auto rendered =
          volume_render_rays(field_out.sigma, field_out.feat, out.samples.offsets,
                             out.samples.deltas);
      out.vol_rows = rendered.feat;
      out.vol_alpha_rows = rendered.alpha;
      if (!ray_subset) {
        const Camera dcam = cam.downsampled(cfg.downsample_factor);
        out.psi_im_vol =
            scatter_rows_to_image(rendered.feat, out.samples.pixel_index, dcam.height, dcam.width);
        out.vol_alpha =
            scatter_rows_to_image(rendered.alpha, out.samples.pixel_index, dcam.height, dcam.width);
      }
    } else if (!ray_subset) {
      const Camera dcam = cam.downsampled(cfg.downsample_factor);
      out.psi_im_vol = TensorT<T>(Shape{1, cfg.field_feat_dim, dcam.height, dcam.width});
      out.vol_alpha = TensorT<T>(Shape{1, 1, dcam.height, dcam.width});
    }
  }

  if (mode_uses_renderer(pipe.mode)) {
    out.psi_im_p = feature_render(out.psi_uv_p, fg.raster);
    TensorT<T> fused;
    if (pipe.mode == TrainMode::kNoTex) {
      fused = pipe.fusion.lift_volumetric(out.psi_im_vol);
    } else {
      auto psi_im_tex = pipe.tex_encoder.forward(out.psi_im_p);
      if (pipe.mode == TrainMode::kNoVol)
        fused = psi_im_tex;
      else
        fused = pipe.fusion.fuse(pipe.fusion.lift_volumetric(out.psi_im_vol), psi_im_tex);
    }
    auto rendered = pipe.renderer.forward(fused);
    out.image = rendered.image;
    out.mask = rendered.mask;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground-truth tensors

template <typename T>
TensorT<T> image_tensor(const Image& img) {
  TensorT<T> t(Shape{1, img.channels, img.height, img.width});
  T* p = t.data();
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        p[((int64_t)c * img.height + y) * img.width + x] = (T)img.at(x, y, c);
  return t;
}

template <typename T>
Image tensor_image(const TensorT<T>& t) {
  check(t.rank() == 4 && t.dim(0) == 1, "tensor_image: expected [1,C,H,W]");
  Image img(t.dim(3), t.dim(2), t.dim(1));
  const T* p = t.data();
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        img.at(x, y, c) = (float)p[((int64_t)c * img.height + y) * img.width + x];
  return img;
}

template <typename T>
TensorT<T> hit_mask_tensor(const NearFarBuffers& nf) {
  TensorT<T> t(Shape{1, 1, nf.height, nf.width});
  for (size_t i = 0; i < nf.hit.size(); ++i) t.data()[i] = (T)nf.hit[i];
  return t;
}

// ---------------------------------------------------------------------------
// Trainer

struct StepResult {
  bool ok = true;
  std::string error;                    // offending loss term on NaN abort
  std::map<std::string, double> losses;  // per active term
  double total = 0, disc = 0;
};

template <typename T>
class Trainer {
 public:
  Trainer(const RunConfig& cfg, TrainMode mode, DatasetManifest data)
      : pipe_(cfg, mode, build_toy_humanoid()), data_(std::move(data)) {
    gen_state_.lr = (T)cfg.lr;
    gen_state_.beta1 = (T)cfg.beta1;
    gen_state_.beta2 = (T)cfg.beta2;
    gen_state_.eps = (T)cfg.adam_eps;
    disc_state_ = gen_state_;
    train_items_ = data_.split(true);
    check(!train_items_.empty(), "trainer: empty train split");
    for (const auto& it : train_items_) preload_item(it);
  }

  const Pipeline<T>& pipeline() const { return pipe_; }
  Pipeline<T>& pipeline() { return pipe_; }
  int iteration() const { return iteration_; }
  const DatasetManifest& data() const { return data_; }
  const std::vector<DatasetItem>& train_items() const { return train_items_; }

  // One generator step (full pipeline forward + Adam) followed by one
  // discriminator step on its own tape and optimizer.
  StepResult step() {
    Rng rng(Rng::mix(pipe_.cfg.seed, 0x57E9000 + (uint64_t)iteration_));
    const DatasetItem& item = train_items_[rng.index(train_items_.size())];
    const auto& pc = pose_cache_.at(key(item));
    const Camera& cam = camera_cache_.at(item.cam);
    FrameGeometry fg = prepare_frame(pipe_.body, pc.pose, pc.shape, cam, pipe_.cfg);
    const Image gt_image = load_pnm(data_.root + "/" + item.image_path);
    const Image gt_mask = load_pnm(data_.root + "/" + item.mask_path);

    StepResult res;
    auto gen_params = pipe_.trainable_generator_params();

    // optional ray subsampling (stochastic volumetric supervision)
    std::vector<int> subset;
    const std::vector<int>* subset_ptr = nullptr;
    if (pipe_.mode == TrainMode::kPdnerfOnly && pipe_.cfg.vol_ray_batch > 0) {
      std::vector<int> hits;
      for (int p = 0; p < fg.near_far.width * fg.near_far.height; ++p)
        if (fg.near_far.hit[p]) hits.push_back(p);
      const int want = std::min<int>(pipe_.cfg.vol_ray_batch, (int)hits.size());
      for (int i = 0; i < want; ++i) {
        const int j = i + (int)rng.index(hits.size() - i);
        std::swap(hits[i], hits[j]);
        subset.push_back(hits[i]);
      }
      subset_ptr = &subset;
    }

    TensorT<T> gt = image_tensor<T>(gt_image);
    TensorT<T> gt_mask_t = image_tensor<T>(gt_mask);

    std::map<std::string, TensorT<T>> parts;
    TensorT<T> total, fake_image, psi_im_p_detached;
    {
      TapeT<T> tape;
      typename TapeT<T>::Scope scope(tape);
      auto gen = generator_forward(pipe_, fg, cam, &rng, subset_ptr);

      if (mode_uses_volume(pipe_.mode)) {
        if (subset_ptr) {
          // MSE over the sampled rays only
          if (gen.samples.ray_count() > 0) {
            auto rgb_rows = slice_channels(gen.vol_rows, 0, 3);
            TensorT<T> gt_rows(Shape{gen.samples.ray_count(), 3});
            fill_downsampled_rows(gt_image, gen.samples, &gt_rows);
            parts.emplace("vol", mse_loss(rgb_rows, gt_rows));
          }
        } else {
          auto gt_down = spatial_area_downsample(gt, pipe_.cfg.downsample_factor);
          parts.emplace("vol", loss_vol(slice_channels(gen.psi_im_vol, 0, 3), gt_down,
                                        hit_mask_tensor<T>(fg.near_far)));
        }
        parts.emplace("norm", loss_norm(gen.psi_uv_n, normal_map_tensor<T>(fg.normals_gt),
                                        valid_mask_tensor<T>(fg.normals_gt.valid,
                                                             fg.normals_gt.size)));
      }
      if (mode_uses_renderer(pipe_.mode)) {
        if (!parts.count("norm"))
          parts.emplace("norm", loss_norm(gen.psi_uv_n, normal_map_tensor<T>(fg.normals_gt),
                                          valid_mask_tensor<T>(fg.normals_gt.valid,
                                                               fg.normals_gt.size)));
        parts.emplace("feat", loss_feat_proxy(gen.image, gt));
        parts.emplace("mask", loss_mask(gen.mask, gt_mask_t));
        parts.emplace("pix", loss_pix(gen.image, gt));
        psi_im_p_detached = gen.psi_im_p.detached();
        if (pipe_.cfg.lambda_adv > 0) {
          auto fake_logits = pipe_.discriminator.forward(gen.image, psi_im_p_detached);
          parts.emplace("adv", lsgan_generator_loss(fake_logits));
        }
        fake_image = gen.image.detached();
      }

      LossWeights w = loss_weights();
      total = total_loss(parts, w);
      for (const auto& [name, t] : parts) res.losses[name] = (double)t.item();
      res.total = (double)total.item();
      if (!std::isfinite(res.total)) {
        res.ok = false;
        res.error = offending_term(parts);
        return res;
      }
      zero_grads(gen_params);
      backward(tape, total);
    }
    try {
      adam_step(gen_params, gen_state_);
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = e.what();
      return res;
    }

    if (mode_uses_renderer(pipe_.mode) && pipe_.cfg.lambda_adv > 0) {
      TapeT<T> tape;
      typename TapeT<T>::Scope scope(tape);
      auto real_logits = pipe_.discriminator.forward(gt, psi_im_p_detached);
      auto fake_logits = pipe_.discriminator.forward(fake_image, psi_im_p_detached);
      auto dloss = lsgan_discriminator_loss(real_logits, fake_logits);
      res.disc = (double)dloss.item();
      if (!std::isfinite(res.disc)) {
        res.ok = false;
        res.error = "disc";
        return res;
      }
      auto dparams = pipe_.discriminator_params();
      zero_grads(dparams);
      backward(tape, dloss);
      try {
        adam_step(dparams, disc_state_);
      } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
        return res;
      }
    }

    ++iteration_;
    return res;
  }

  // Deterministic full-image forward with no gradient recording.
  struct RenderResult {
    Image image, mask;          // empty when the mode has no renderer
    Image vol_rgb, vol_alpha;   // downsampled volumetric diagnostics
  };

  RenderResult render(const PoseParams& pose, const ShapeParams& shape, const Camera& cam) {
    FrameGeometry fg = prepare_frame(pipe_.body, pose, shape, cam, pipe_.cfg);
    auto gen = generator_forward(pipe_, fg, cam, nullptr);
    RenderResult out;
    if (gen.image.defined()) {
      out.image = tensor_image(gen.image);
      out.mask = tensor_image(gen.mask);
    }
    if (gen.psi_im_vol.defined()) {
      out.vol_rgb = tensor_image(slice_channels(gen.psi_im_vol, 0, 3));
      out.vol_alpha = tensor_image(gen.vol_alpha);
    }
    return out;
  }

  RenderResult render_item(const DatasetItem& item) {
    preload_item(item);
    const auto& pc = pose_cache_.at(key(item));
    return render(pc.pose, pc.shape, camera_cache_.at(item.cam));
  }

  // Full-image volumetric loss at the current parameters (used to measure
  // convergence independently of any ray subsampling).
  double full_lvol(const DatasetItem& item) {
    preload_item(item);
    const auto& pc = pose_cache_.at(key(item));
    const Camera& cam = camera_cache_.at(item.cam);
    FrameGeometry fg = prepare_frame(pipe_.body, pc.pose, pc.shape, cam, pipe_.cfg);
    auto gen = generator_forward(pipe_, fg, cam, nullptr);
    auto gt = image_tensor<T>(load_pnm(data_.root + "/" + item.image_path));
    auto gt_down = spatial_area_downsample(gt, pipe_.cfg.downsample_factor);
    return (double)loss_vol(slice_channels(gen.psi_im_vol, 0, 3), gt_down,
                            hit_mask_tensor<T>(fg.near_far))
        .item();
  }

  LossWeights loss_weights() const {
    LossWeights w;
    w.vol = pipe_.cfg.lambda_vol;
    w.norm = pipe_.cfg.lambda_norm;
    w.feat = pipe_.cfg.lambda_feat;
    w.mask = pipe_.cfg.lambda_mask;
    w.pix = pipe_.cfg.lambda_pix;
    w.adv = pipe_.cfg.lambda_adv;
    w.face = pipe_.cfg.lambda_face;
    return w;
  }

  // ------------------------------------------------------------------
  // Checkpointing: parameters, optimizer moments, template, config echo.

  void save_checkpoint(const std::string& dir) const {
    CheckpointWriter w(dir);
    w.add_meta("iteration", (int64_t)iteration_);
    w.add_meta("mode", std::string(train_mode_name(pipe_.mode)));
    w.add_meta("seed", (int64_t)pipe_.cfg.seed);
    for (const auto& [name, value] : loss_weights().items()) w.add_meta("lambda_" + name, value);
    w.add_meta("lr", pipe_.cfg.lr);
    w.add_meta("beta1", pipe_.cfg.beta1);
    w.add_meta("adam_gen_step", (int64_t)gen_state_.step);
    w.add_meta("adam_disc_step", (int64_t)disc_state_.step);
    for (const auto& p : pipe_.gen_reg.params) w.add_tensor(p.name(), p);
    for (const auto& p : pipe_.disc_reg.params) w.add_tensor(p.name(), p);
    save_adam(w, "adam_gen", pipe_.gen_reg.params, gen_state_);
    save_adam(w, "adam_disc", pipe_.disc_reg.params, disc_state_);
    save_template(w, pipe_.body);
    pipe_.cfg.save(dir + "/config.cfg");
  }

  void load_checkpoint(const std::string& dir) {
    CheckpointReader r(dir);
    iteration_ = (int)r.meta_int("iteration");
    check(r.meta("mode") == train_mode_name(pipe_.mode),
          "checkpoint mode '" + r.meta("mode") + "' does not match trainer mode");
    for (auto& p : pipe_.gen_reg.params) r.read_tensor(p.name(), p);
    for (auto& p : pipe_.disc_reg.params) r.read_tensor(p.name(), p);
    load_adam(r, "adam_gen", pipe_.gen_reg.params, &gen_state_);
    load_adam(r, "adam_disc", pipe_.disc_reg.params, &disc_state_);
    gen_state_.step = r.meta_int("adam_gen_step");
    disc_state_.step = r.meta_int("adam_disc_step");
  }

  AdamStateT<T>& generator_adam() { return gen_state_; }
  AdamStateT<T>& discriminator_adam() { return disc_state_; }

 private:
  static std::string key(const DatasetItem& it) {
    return std::to_string(it.frame) + "/" + std::to_string(it.cam);
  }

  void preload_item(const DatasetItem& it) {
    if (!camera_cache_.count(it.cam))
      camera_cache_.emplace(it.cam, load_camera_file(data_.root + "/" + it.camera_path));
    if (!pose_cache_.count(key(it))) {
      PoseAndShape pc;
      load_pose_file(data_.root + "/" + it.pose_path, &pc.pose, &pc.shape);
      pose_cache_.emplace(key(it), pc);
    }
  }

  // downsampled ground-truth RGB at the sampled ray pixels
  void fill_downsampled_rows(const Image& gt, const RaySamples& rs, TensorT<T>* rows) const {
    const int S = pipe_.cfg.downsample_factor;
    T* p = rows->data();
    for (int r = 0; r < rs.ray_count(); ++r) {
      const int px = rs.pixel_index[r] % rs.grid_width;
      const int py = rs.pixel_index[r] / rs.grid_width;
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int dy = 0; dy < S; ++dy)
          for (int dx = 0; dx < S; ++dx) acc += gt.at(px * S + dx, py * S + dy, c);
        p[(int64_t)r * 3 + c] = (T)(acc / (S * S));
      }
    }
  }

  static std::string offending_term(const std::map<std::string, TensorT<T>>& parts) {
    for (const auto& [name, t] : parts)
      if (!std::isfinite((double)t.item())) return name;
    return "total";
  }

  static void save_adam(CheckpointWriter& w, const std::string& prefix,
                        const std::vector<TensorT<T>>& params, const AdamStateT<T>& st) {
    if (st.m.empty()) return;
    for (size_t i = 0; i < params.size(); ++i) {
      w.add_buffer(prefix + "." + params[i].name() + ".m", st.m[i]);
      w.add_buffer(prefix + "." + params[i].name() + ".v", st.v[i]);
    }
  }

  static void load_adam(const CheckpointReader& r, const std::string& prefix,
                        const std::vector<TensorT<T>>& params, AdamStateT<T>* st) {
    st->m.clear();
    st->v.clear();
    if (!r.has_param(prefix + "." + params[0].name() + ".m")) return;  // fresh optimizer
    for (const auto& p : params) {
      st->m.push_back(r.template read_buffer<T>(prefix + "." + p.name() + ".m"));
      st->v.push_back(r.template read_buffer<T>(prefix + "." + p.name() + ".v"));
    }
  }

  static void save_template(CheckpointWriter& w, const SkinnedTemplate& tpl) {
    std::vector<double> verts, uvs, normals, joints, ends, radii, weights;
    std::vector<int> faces, parents;
    for (const auto& v : tpl.mesh.vertices) {
      verts.insert(verts.end(), {v.x(), v.y(), v.z()});
    }
    for (const auto& u : tpl.mesh.uv) uvs.insert(uvs.end(), {u.x(), u.y()});
    for (const auto& f : tpl.mesh.faces) faces.insert(faces.end(), {f[0], f[1], f[2]});
    for (const auto& j : tpl.joints) joints.insert(joints.end(), {j.x(), j.y(), j.z()});
    for (const auto& e : tpl.bone_ends) ends.insert(ends.end(), {e.x(), e.y(), e.z()});
    parents = tpl.parents;
    radii = tpl.bone_radii;
    weights.assign(tpl.weights.data(), tpl.weights.data() + tpl.weights.size());
    w.add_buffer("template.vertices", verts);
    w.add_buffer("template.uv", uvs);
    w.add_buffer("template.faces", faces);
    w.add_buffer("template.joints", joints);
    w.add_buffer("template.bone_ends", ends);
    w.add_buffer("template.parents", parents);
    w.add_buffer("template.bone_radii", radii);
    w.add_buffer("template.weights", weights);
    for (size_t b = 0; b < tpl.shape_dirs.size(); ++b) {
      std::vector<double> dirs;
      for (const auto& d : tpl.shape_dirs[b]) dirs.insert(dirs.end(), {d.x(), d.y(), d.z()});
      w.add_buffer("template.shape_dirs" + std::to_string(b), dirs);
    }
  }

  struct PoseAndShape {
    PoseParams pose;
    ShapeParams shape;
  };

  Pipeline<T> pipe_;
  DatasetManifest data_;
  std::vector<DatasetItem> train_items_;
  std::map<std::string, PoseAndShape> pose_cache_;
  std::map<int, Camera> camera_cache_;
  AdamStateT<T> gen_state_, disc_state_;
  int iteration_ = 0;
};

// ---------------------------------------------------------------------------
// Loss trace line with round-trip-exact float formatting.

inline std::string loss_trace_line(int iteration, const StepResult& res) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"iter\":" << iteration;
  for (const auto& [name, value] : res.losses) os << ",\"" << name << "\":" << value;
  os << ",\"total\":" << res.total << ",\"disc\":" << res.disc << "}";
  return os.str();
}

}  // namespace hvtr
