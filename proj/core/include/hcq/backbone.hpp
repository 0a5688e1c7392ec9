#pragma once

#include <cstddef>

#include "hcq/deform_attn.hpp"
#include "hcq/nn.hpp"
#include "hcq/tensor.hpp"

namespace hcq {

/// Three strided convolution stages standing in for a backbone and pixel
/// decoder: an 8x8/stride-8 patch stage (1/8), then two 2x2/stride-2 stages
/// (1/16, 1/32), each followed by ReLU. A linear map of the 1/8 features
/// concatenated with a fixed 2-D sine code gives the per-pixel mask
/// embedding.
class StubBackbone {
 public:
  static constexpr std::size_t kPositionalDim = 32;

  StubBackbone() = default;
  StubBackbone(ParameterStore& store, std::size_t dim, std::size_t image_channels, Rng& rng);

  struct Output {
    FeaturePyramid pyramid;  // 1/32, 1/16, 1/8
    Tensor pixel_embedding;  // [H/8 * W/8, D]
    std::size_t mask_height = 0;
    std::size_t mask_width = 0;
  };

  // image [H,W,C], H and W divisible by 32.
  Output operator()(const Tensor& image) const;

  Linear stage8, stage16, stage32, pixel;

 private:
  std::size_t dim_ = 0;
  std::size_t channels_ = 0;
};

/// Fixed sine code of normalized cell centers, [h*w, StubBackbone::kPositionalDim].
Tensor grid_positional_code(std::size_t h, std::size_t w);

/// Strided valid convolution via patch extraction: image [H,W,C], weight
/// [k*k*C, out] with patch layout (ky, kx, c). Returns [Ho, Wo, out].
Tensor conv2d(const Tensor& image, const Linear& weights, std::size_t kernel, std::size_t stride);

}  // namespace hcq
