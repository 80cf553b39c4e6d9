#pragma once

#include "diffem/tensor.hpp"

namespace diffem {

/// 10*log10(1/MSE) for [0,1]-peak images, capped at 99 dB when MSE < 1e-10.
double psnr(const ImageTensor& x, const ImageTensor& ref);

/// Mean squared entry difference after center-padding both kernels to a
/// common size and minimizing over all circular shifts. The circular forward
/// model fixes H only up to a shift paired with an image shift, so unaligned
/// comparison would be meaningless.
double kernel_mse(const BlurKernel& estimate, const BlurKernel& reference);

/// ||H_hat x_hat - y||^2 - sigma^2 M with M the element count of y. Measures
/// forward-model consistency; may be negative.
double reblur_loss(const ImageTensor& y, const ImageTensor& xhat, const BlurKernel& kernel_hat,
                   double sigma);

}  // namespace diffem
