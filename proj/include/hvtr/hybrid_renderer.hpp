#pragma once

// Image-space pathway: render UV-space pose features into image space
// through the rasterized UV coordinate map, encode them to textural
// features, fuse with the volumetric features (attentional gating or
// concatenation) and decode the fused map to the final image and mask.

#include <vector>

#include "hvtr/kernels.hpp"
#include "hvtr/nn.hpp"
#include "hvtr/rasterizer.hpp"

namespace hvtr {

// Per covered pixel, a bilinear lookup of psi_uv [1,C,U,U] at the pixel's
// rasterized atlas coordinate; zero outside the mask. Differentiable into
// psi_uv (the geometry is a fixed proxy per frame).
template <typename T>
TensorT<T> feature_render(const TensorT<T>& psi_uv, const RasterOutput& raster) {
  check(psi_uv.rank() == 4 && psi_uv.dim(0) == 1, "feature_render: psi_uv must be [1,C,U,U]");
  const int C = psi_uv.dim(1), U = psi_uv.dim(2);
  check(psi_uv.dim(3) == U, "feature_render: atlas must be square");
  const int W = raster.width, H = raster.height;

  std::vector<int> covered;
  covered.reserve((size_t)W * H);
  for (int p = 0; p < W * H; ++p)
    if (raster.mask[p]) covered.push_back(p);

  if (covered.empty()) return TensorT<T>(Shape{1, C, H, W});

  TensorT<T> coords(Shape{(int)covered.size(), 2});
  T* pc = coords.data();
  for (size_t i = 0; i < covered.size(); ++i) {
    pc[i * 2 + 0] = (T)raster.uv[(size_t)covered[i] * 2 + 0];
    pc[i * 2 + 1] = (T)raster.uv[(size_t)covered[i] * 2 + 1];
  }
  auto rows = grid_sample_bilinear(psi_uv.reshape({C, U, U}), coords);
  return scatter_rows_to_image(rows, covered, H, W);
}

// F_T: n stride-2 encoder blocks, n in {2,3,4} chosen so the output matches
// the volumetric feature size (2^n = S).
template <typename T>
struct TextureEncoder {
  std::vector<EncoderBlock<T>> blocks;
  int factor = 0;

  TextureEncoder() = default;
  TextureEncoder(ParamRegistry<T>& reg, const std::string& prefix, int in_ch, int ctex, int S,
                 NormMode nm, Rng& rng) {
    int n = 0;
    for (int s = S; s > 1; s /= 2) ++n;
    check((1 << n) == S && n >= 2 && n <= 4, "texture_encoder: S must be 4, 8 or 16");
    factor = S;
    const int plan[4] = {32, 48, 64, 64};
    int ch = in_ch;
    for (int i = 0; i < n; ++i) {
      const int out_ch = (i == n - 1) ? ctex : plan[i];
      blocks.emplace_back(reg, prefix + ".enc" + std::to_string(i + 1), ch, out_ch, 2, nm, rng);
      ch = out_ch;
    }
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    auto h = x;
    for (const auto& b : blocks) h = b.forward(h);
    return h;
  }
};

// Fusion of the (lifted) volumetric features X and textural features Y at
// equal spatial size. aff: sigmoid-gated convex blend M*X + (1-M)*Y with the
// gate from a two-layer bottleneck on X+Y. concat: 1x1 projection of [X;Y].
template <typename T>
struct FeatureFusion {
  bool use_aff = true;
  Conv2dLayer<T> lift;          // 1x1: field channels -> ctex
  Conv2dLayer<T> gate1, gate2;  // aff gate bottleneck
  Conv2dLayer<T> proj;          // concat projection

  FeatureFusion() = default;
  FeatureFusion(ParamRegistry<T>& reg, const std::string& prefix, int vol_ch, int ctex, bool aff,
                Rng& rng)
      : use_aff(aff), lift(reg, prefix + ".lift", vol_ch, ctex, 1, 1, 0, rng) {
    if (aff) {
      gate1 = Conv2dLayer<T>(reg, prefix + ".gate1", ctex, std::max(4, ctex / 4), 1, 1, 0, rng);
      gate2 = Conv2dLayer<T>(reg, prefix + ".gate2", std::max(4, ctex / 4), ctex, 1, 1, 0, rng);
    } else {
      proj = Conv2dLayer<T>(reg, prefix + ".proj", 2 * ctex, ctex, 1, 1, 0, rng);
    }
  }

  TensorT<T> lift_volumetric(const TensorT<T>& psi_vol) const { return lift.forward(psi_vol); }

  TensorT<T> fuse(const TensorT<T>& x_lifted, const TensorT<T>& y_tex) const {
    check(x_lifted.shape() == y_tex.shape(), "fuse: spatial/channel mismatch " +
                                                 shape_str(x_lifted.shape()) + " vs " +
                                                 shape_str(y_tex.shape()));
    if (use_aff) {
      auto gate = sigmoid(gate2.forward(relu(gate1.forward(add(x_lifted, y_tex)))));
      // M*X + (1-M)*Y = Y + M*(X-Y)
      return add(y_tex, mul(gate, sub(x_lifted, y_tex)));
    }
    return proj.forward(concat_channels(x_lifted, y_tex));
  }
};

// F_R: (4-n) stride-2 encoder blocks, 5 residual blocks, 4 upsampling
// decoder blocks, sigmoid RGB and mask heads. Net scale change is
// 2^4 / 2^(4-n) = S, so the output is exactly WxH for S in {4,8,16}.
template <typename T>
struct TexRenderer {
  std::vector<EncoderBlock<T>> encoders;
  std::vector<ResBlock<T>> resblocks;
  std::vector<DecoderBlock<T>> decoders;
  Conv2dLayer<T> rgb_head, mask_head;

  TexRenderer() = default;
  TexRenderer(ParamRegistry<T>& reg, const std::string& prefix, int ctex, int S, NormMode nm,
              Rng& rng) {
    int n = 0;
    for (int s = S; s > 1; s /= 2) ++n;
    check((1 << n) == S && n >= 2 && n <= 4, "tex_renderer: S must be 4, 8 or 16");
    const int enc_count = 4 - n;
    int ch = ctex;
    const int enc_plan[2] = {96, 128};
    for (int i = 0; i < enc_count; ++i) {
      const int out_ch = enc_plan[i];
      encoders.emplace_back(reg, prefix + ".enc" + std::to_string(i + 1), ch, out_ch, 2, nm, rng);
      ch = out_ch;
    }
    for (int i = 0; i < 5; ++i)
      resblocks.emplace_back(reg, prefix + ".res" + std::to_string(i + 1), ch, nm, rng);
    for (int i = 0; i < 4; ++i) {
      const int out_ch = std::max(16, ch * 2 / 3);
      decoders.emplace_back(reg, prefix + ".dec" + std::to_string(i + 1), ch, out_ch, true, nm,
                            rng);
      ch = out_ch;
    }
    rgb_head = Conv2dLayer<T>(reg, prefix + ".rgb", ch, 3, 3, 1, 1, rng, 0.01);
    mask_head = Conv2dLayer<T>(reg, prefix + ".mask", ch, 1, 3, 1, 1, rng, 0.01);
  }

  struct Output {
    TensorT<T> image;  // [1,3,H,W] in [0,1]
    TensorT<T> mask;   // [1,1,H,W] in [0,1]
  };

  Output forward(const TensorT<T>& psi_vt) const {
    auto h = psi_vt;
    for (const auto& e : encoders) h = e.forward(h);
    for (const auto& r : resblocks) h = r.forward(h);
    for (const auto& d : decoders) h = d.forward(h);
    h = relu(h);
    Output out;
    out.image = sigmoid(rgb_head.forward(h));
    out.mask = sigmoid(mask_head.forward(h));
    return out;
  }
};

}  // namespace hvtr
