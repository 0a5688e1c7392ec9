#pragma once

#include <cstddef>
#include <vector>

#include "hcq/tensor.hpp"

namespace hcq {

enum class ElementwiseKind { Add, Sub, Mul, Div, Relu, Sigmoid, Exp, Log, Neg };

// b is required for the binary kinds and ignored otherwise.
Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor* b = nullptr);

// Binary ops broadcast under numpy trailing-dimension alignment.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
// Same-shape only; the gradient goes to the selected operand (a on ties).
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor clamp(const Tensor& a, double lo, double hi);
// log(x / (1 - x)) after clamping x into [eps, 1 - eps].
Tensor inverse_sigmoid(const Tensor& a, double eps = 1e-5);

Tensor matmul(const Tensor& a, const Tensor& b);
// [B,m,k] x [B,k,n] -> [B,m,n]
Tensor bmm(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor index_select(const Tensor& a, std::size_t axis, const std::vector<std::size_t>& indices);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_last(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Bilinear interpolation of fmap [H,W,C] at normalized (x,y) locations [P,2],
// align-corners-false, zero padding outside the grid. Returns [P,C].
Tensor bilinear_sample(const Tensor& fmap, const Tensor& locations);

// Patches of image [H,W,C] with square kernel and stride, no padding:
// [Ho*Wo, k*k*C] with patch layout (ky, kx, c).
Tensor im2col(const Tensor& image, std::size_t kernel, std::size_t stride);

// Per element k of a [R,M] tensor: interleaved sin/cos at geometric
// frequencies 2*pi / temperature^(2j/dim). Returns [R, M*dim].
Tensor sine_encode(const Tensor& a, std::size_t dim, double temperature = 20.0);

}  // namespace hcq
