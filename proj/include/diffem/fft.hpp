#pragma once

#include "diffem/tensor.hpp"

namespace diffem {

// 2-D DFT per channel. Convention: forward unnormalized, inverse carries
// 1/(H*W), so ifft2(fft2(x)) == x and Parseval reads
// squared_norm(x) == spectrum_squared_norm(fft2(x)) / (H*W).
FreqImage fft2(const ImageTensor& image);
ImageTensor ifft2(const FreqImage& freq);

/// Zero-pads the kernel to h x w with its center taped to pixel (0,0) via a
/// circular shift, then transforms. DC bin equals the kernel sum (= 1).
/// Throws Error("kernel exceeds image support") when k > min(h, w).
FreqImage embed_kernel(const BlurKernel& kernel, int h, int w);

/// Spatial-domain embedding used by embed_kernel, exposed for the solvers:
/// h x w x 1 grid with the kernel center at (0,0).
ImageTensor embed_kernel_grid(const BlurKernel& kernel, int h, int w);

/// Inverse of embed_kernel_grid: reads the k x k window centered (circularly)
/// at pixel (0,0) out of a full h x w grid.
ImageTensor crop_kernel_grid(const ImageTensor& grid, int k);

/// Per-channel cyclic convolution, computed in the Fourier domain.
ImageTensor circular_convolve(const ImageTensor& image, const BlurKernel& kernel);

/// Adjoint of circular_convolve (conjugate spectrum), i.e. H^T x.
ImageTensor circular_correlate(const ImageTensor& image, const BlurKernel& kernel);

double spectrum_squared_norm(const FreqImage& freq);

/// Applies a real per-frequency multiplier (single-channel grid stored as an
/// ImageTensor in frequency layout, or per-channel when dims match) to every
/// channel of the spectrum.
void multiply_spectrum(FreqImage& freq, const ImageTensor& multiplier);

}  // namespace diffem
