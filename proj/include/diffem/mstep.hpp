#pragma once

#include <memory>
#include <string>
#include <vector>

#include "diffem/tensor.hpp"

namespace diffem {

/// Proximal / denoising interface plugged into the HQS regularization step at
/// strength sqrt(lambda / beta). Operates on kernel grids (k x k x 1 images).
class KernelRegularizer {
public:
    virtual ~KernelRegularizer() = default;
    virtual ImageTensor denoise(const ImageTensor& noisy, double strength) const = 0;
    virtual std::string name() const = 0;
};

/// prox of (s^2/2)||k||^2: v / (1 + s^2).
class L2Regularizer : public KernelRegularizer {
public:
    ImageTensor denoise(const ImageTensor& noisy, double strength) const override;
    std::string name() const override { return "l2"; }
};

/// prox of s^2 ||k||_1: soft-threshold at s^2.
class L1Regularizer : public KernelRegularizer {
public:
    ImageTensor denoise(const ImageTensor& noisy, double strength) const override;
    std::string name() const override { return "l1"; }
};

/// Pass-through (no regularization beyond the optional simplex projection).
class IdentityRegularizer : public KernelRegularizer {
public:
    ImageTensor denoise(const ImageTensor& noisy, double strength) const override;
    std::string name() const override { return "none"; }
};

struct MStepConfig {
    int iterations = 10;   // J
    double lambda = 1.0;
    double beta_hqs = 1e5;
    std::shared_ptr<const KernelRegularizer> regularizer;  // defaults to L2 when null
    bool simplex_projection = true;
};

/// Per-frequency data solve of the HQS Z-step (samples-as-measurements form):
///   z*(w) = (sum_c yhat_c conj(mean_i xhat_i_c) + sigma^2 beta khat)
///           / (mean_i sum_c |xhat_i_c|^2 + sigma^2 beta)
/// computed on the full image grid and cropped to the kernel support.
/// Channels accumulate additively into both sums (one kernel, C observations).
ImageTensor fourier_data_solve(const ImageTensor& y, const std::vector<ImageTensor>& samples,
                               const BlurKernel& coupling_kernel, double sigma, double beta_hqs);

/// Same solve with per-timestep means xhat0^i substituting posterior samples.
ImageTensor fast_solve_dps(const ImageTensor& y, const std::vector<ImageTensor>& xhat0s,
                           const BlurKernel& coupling_kernel, double sigma, double beta_hqs);

/// Gaussian-smeared variant: each xhat0^i carries N(xhat0^i, r_t^2 I), which
/// adds r_t^2 to every frequency of the denominator (raw coefficient units,
/// unscaled by image size; the scalar toy pins the normalization).
ImageTensor fast_solve_pigdm(const ImageTensor& y, const std::vector<ImageTensor>& xhat0s,
                             const BlurKernel& coupling_kernel, double sigma, double beta_hqs,
                             double r_t);

/// J HQS alternations of the data solve and regularizer.denoise at strength
/// sqrt(lambda/beta), optionally simplex-projected after each denoise.
/// r_t > 0 selects the Pigdm data solve. When simplex projection is off the
/// returned kernel is not validated.
BlurKernel hqs_mstep(const ImageTensor& y, const std::vector<ImageTensor>& samples, double sigma,
                     const MStepConfig& config, const BlurKernel& kernel_init, double r_t = 0.0);

/// Full-grid variant: the kernel lives on the whole h x w grid (no support
/// crop). Used by degenerate toys where the image is too small to host an odd
/// square kernel window.
ImageTensor hqs_mstep_fullgrid(const ImageTensor& y, const std::vector<ImageTensor>& samples,
                               double sigma, const MStepConfig& config,
                               const ImageTensor& kernel_init_grid, double r_t = 0.0);

/// Value of the sample-based M-step objective
///   (1/(2 sigma^2 n)) sum_i ||K x_i - y||^2 + lambda * Phi(K)
/// with Phi the l2 (0.5||K||^2) or l1 norm by name; used by monotonicity tests.
double mstep_objective(const ImageTensor& y, const std::vector<ImageTensor>& samples, double sigma,
                       double lambda, const std::string& phi, const BlurKernel& kernel);

std::shared_ptr<const KernelRegularizer> make_regularizer(const std::string& name);

}  // namespace diffem
