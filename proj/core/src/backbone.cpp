#include "hcq/backbone.hpp"

#include <cmath>
#include <numbers>

#include "hcq/ops.hpp"

namespace hcq {

StubBackbone::StubBackbone(ParameterStore& store, std::size_t dim, std::size_t image_channels, Rng& rng)
    : stage8(store, "backbone.stage8", 64 * image_channels, dim, rng),
      stage16(store, "backbone.stage16", 4 * dim, dim, rng),
      stage32(store, "backbone.stage32", 4 * dim, dim, rng),
      pixel(store, "backbone.pixel", dim + kPositionalDim, dim, rng),
      dim_(dim),
      channels_(image_channels) {}

Tensor conv2d(const Tensor& image, const Linear& weights, std::size_t kernel, std::size_t stride) {
  const std::size_t h = image.size(0), w = image.size(1);
  const std::size_t ho = (h - kernel) / stride + 1, wo = (w - kernel) / stride + 1;
  return reshape(weights(im2col(image, kernel, stride)), {ho, wo, weights.out_features()});
}

Tensor grid_positional_code(std::size_t h, std::size_t w) {
  constexpr std::size_t per_axis = StubBackbone::kPositionalDim / 2;
  std::vector<double> v(h * w * StubBackbone::kPositionalDim);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double* row = v.data() + (y * w + x) * StubBackbone::kPositionalDim;
      const double coords[2] = {(static_cast<double>(x) + 0.5) / static_cast<double>(w),
                                (static_cast<double>(y) + 0.5) / static_cast<double>(h)};
      for (int a = 0; a < 2; ++a)
        for (std::size_t j = 0; j < per_axis / 2; ++j) {
          const double f = std::numbers::pi * std::pow(2.0, static_cast<double>(j) / 2.0);
          row[a * per_axis + 2 * j] = std::sin(f * coords[a]);
          row[a * per_axis + 2 * j + 1] = std::cos(f * coords[a]);
        }
    }
  return Tensor({h * w, StubBackbone::kPositionalDim}, std::move(v));
}

StubBackbone::Output StubBackbone::operator()(const Tensor& image) const {
  if (image.dim() != 3 || image.size(2) != channels_) throw ShapeError("backbone: image must be [H,W,C]");
  const std::size_t h = image.size(0), w = image.size(1);
  if (h % 32 || w % 32) throw ShapeError("backbone: image dims must be divisible by 32");
  const Tensor f8 = relu(conv2d(image, stage8, 8, 8));
  const Tensor f16 = relu(conv2d(f8, stage16, 2, 2));
  const Tensor f32 = relu(conv2d(f16, stage32, 2, 2));
  Output out;
  out.pyramid.levels = {f32, f16, f8};
  out.mask_height = h / 8;
  out.mask_width = w / 8;
  const Tensor flat8 = reshape(f8, {out.mask_height * out.mask_width, dim_});
  out.pixel_embedding = pixel(concat({flat8, grid_positional_code(out.mask_height, out.mask_width)}, 1));
  return out;
}

}  // namespace hcq
