#include "diffem/mstep.hpp"

#include <cmath>

#include "diffem/fft.hpp"
#include "diffem/simplex.hpp"

namespace diffem {

ImageTensor L2Regularizer::denoise(const ImageTensor& noisy, double strength) const {
    ImageTensor out = noisy;
    const double f = 1.0 / (1.0 + strength * strength);
    for (double& v : out.data) v *= f;
    return out;
}

ImageTensor L1Regularizer::denoise(const ImageTensor& noisy, double strength) const {
    ImageTensor out = noisy;
    const double thr = strength * strength;
    for (double& v : out.data) {
        if (v > thr) v -= thr;
        else if (v < -thr) v += thr;
        else v = 0.0;
    }
    return out;
}

ImageTensor IdentityRegularizer::denoise(const ImageTensor& noisy, double strength) const {
    (void)strength;
    return noisy;
}

namespace {

struct SolveAccumulators {
    int h = 0, w = 0;
    // numerator(w) = mean_i sum_c yhat_c conj(xhat_i_c); denominator(w) =
    // mean_i sum_c |xhat_i_c|^2 + extra. Channels are extra observations of
    // the one kernel.
    std::vector<std::complex<double>> numerator;
    std::vector<double> denominator;
};

SolveAccumulators accumulate(const ImageTensor& y, const std::vector<ImageTensor>& samples,
                             double extra_denominator) {
    if (samples.empty()) throw Error("data solve needs n >= 1 samples");
    for (const auto& s : samples) {
        if (!s.same_dims(y)) throw Error("sample dims mismatch with y");
    }
    const int c = y.channels;
    const size_t pixels = static_cast<size_t>(y.height) * y.width;
    SolveAccumulators acc;
    acc.h = y.height;
    acc.w = y.width;
    acc.numerator.assign(pixels, {0.0, 0.0});
    acc.denominator.assign(pixels, extra_denominator);
    const FreqImage y_spec = fft2(y);
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    for (const auto& sample : samples) {
        const FreqImage x_spec = fft2(sample);
        for (size_t p = 0; p < pixels; ++p) {
            for (int ch = 0; ch < c; ++ch) {
                const size_t i = p * c + ch;
                acc.numerator[p] += inv_n * y_spec.data[i] * std::conj(x_spec.data[i]);
                acc.denominator[p] += inv_n * std::norm(x_spec.data[i]);
            }
        }
    }
    return acc;
}

ImageTensor solve_full_grid(const SolveAccumulators& acc, const FreqImage& coupling_spec,
                            double sigma, double beta_hqs) {
    if (!(sigma > 0.0)) throw Error("data solve needs sigma > 0");
    if (!(beta_hqs > 0.0)) throw Error("data solve needs beta > 0");
    const double s2b = sigma * sigma * beta_hqs;
    FreqImage z_spec(acc.h, acc.w, 1);
    for (size_t p = 0; p < z_spec.data.size(); ++p) {
        z_spec.data[p] =
            (acc.numerator[p] + s2b * coupling_spec.data[p]) / (acc.denominator[p] + s2b);
    }
    return ifft2(z_spec);
}

// The Pigdm smear N(xhat0, r^2 I) adds r_t^2 to every frequency of the
// denominator, in raw coefficient units (the scalar toy, where all DFT
// conventions coincide, pins this normalization). Like the sigma^2 beta
// coupling it is deliberately not scaled by the image size, so early steps
// with weak xhat0 spectra stay anchored to the previous kernel.
double pigdm_extra(double r_t) { return r_t * r_t; }

}  // namespace

ImageTensor fourier_data_solve(const ImageTensor& y, const std::vector<ImageTensor>& samples,
                               const BlurKernel& coupling_kernel, double sigma, double beta_hqs) {
    const SolveAccumulators acc = accumulate(y, samples, 0.0);
    const FreqImage k_spec = embed_kernel(coupling_kernel, y.height, y.width);
    return crop_kernel_grid(solve_full_grid(acc, k_spec, sigma, beta_hqs), coupling_kernel.size);
}

ImageTensor fast_solve_dps(const ImageTensor& y, const std::vector<ImageTensor>& xhat0s,
                           const BlurKernel& coupling_kernel, double sigma, double beta_hqs) {
    return fourier_data_solve(y, xhat0s, coupling_kernel, sigma, beta_hqs);
}

ImageTensor fast_solve_pigdm(const ImageTensor& y, const std::vector<ImageTensor>& xhat0s,
                             const BlurKernel& coupling_kernel, double sigma, double beta_hqs,
                             double r_t) {
    if (r_t < 0.0) throw Error("r_t must be >= 0");
    const SolveAccumulators acc = accumulate(y, xhat0s, pigdm_extra(r_t));
    const FreqImage k_spec = embed_kernel(coupling_kernel, y.height, y.width);
    return crop_kernel_grid(solve_full_grid(acc, k_spec, sigma, beta_hqs), coupling_kernel.size);
}

namespace {

void check_mstep_config(const MStepConfig& config) {
    if (config.iterations < 1) throw Error("M-step needs J >= 1");
    if (!(config.beta_hqs > 0.0)) throw Error("M-step needs beta > 0");
    if (config.lambda < 0.0) throw Error("M-step needs lambda >= 0");
}

const KernelRegularizer& resolve_regularizer(const MStepConfig& config,
                                             std::shared_ptr<const KernelRegularizer>& fallback) {
    if (config.regularizer) return *config.regularizer;
    fallback = std::make_shared<L2Regularizer>();
    return *fallback;
}

ImageTensor denoise_checked(const KernelRegularizer& reg, const ImageTensor& z, double strength,
                            int iteration) {
    ImageTensor out;
    try {
        out = reg.denoise(z, strength);
    } catch (const std::exception& e) {
        throw Error("regularizer failed at HQS iteration " + std::to_string(iteration) + ": " +
                    e.what());
    }
    if (!out.same_dims(z)) {
        throw Error("regularizer changed dims at HQS iteration " + std::to_string(iteration));
    }
    if (!out.all_finite()) {
        throw Error("regularizer produced non-finite values at HQS iteration " +
                    std::to_string(iteration));
    }
    return out;
}

}  // namespace

BlurKernel hqs_mstep(const ImageTensor& y, const std::vector<ImageTensor>& samples, double sigma,
                     const MStepConfig& config, const BlurKernel& kernel_init, double r_t) {
    check_mstep_config(config);
    std::shared_ptr<const KernelRegularizer> fallback;
    const KernelRegularizer& reg = resolve_regularizer(config, fallback);
    const double strength = std::sqrt(config.lambda / config.beta_hqs);
    const double extra = r_t > 0.0 ? pigdm_extra(r_t) : 0.0;
    const SolveAccumulators acc = accumulate(y, samples, extra);

    ImageTensor kernel_grid = kernel_init.to_grid();
    for (int j = 1; j <= config.iterations; ++j) {
        const FreqImage coupling =
            embed_kernel(BlurKernel::unchecked(kernel_init.size, kernel_grid.data), y.height,
                         y.width);
        const ImageTensor z_full = solve_full_grid(acc, coupling, sigma, config.beta_hqs);
        const ImageTensor z = crop_kernel_grid(z_full, kernel_init.size);
        kernel_grid = denoise_checked(reg, z, strength, j);
        if (config.simplex_projection) project_simplex_inplace(kernel_grid.data);
    }
    BlurKernel out = BlurKernel::unchecked(kernel_init.size, std::move(kernel_grid.data));
    if (config.simplex_projection) out.validate();
    return out;
}

ImageTensor hqs_mstep_fullgrid(const ImageTensor& y, const std::vector<ImageTensor>& samples,
                               double sigma, const MStepConfig& config,
                               const ImageTensor& kernel_init_grid, double r_t) {
    check_mstep_config(config);
    if (kernel_init_grid.height != y.height || kernel_init_grid.width != y.width ||
        kernel_init_grid.channels != 1) {
        throw Error("full-grid kernel must match image dims");
    }
    std::shared_ptr<const KernelRegularizer> fallback;
    const KernelRegularizer& reg = resolve_regularizer(config, fallback);
    const double strength = std::sqrt(config.lambda / config.beta_hqs);
    const double extra = r_t > 0.0 ? pigdm_extra(r_t) : 0.0;
    const SolveAccumulators acc = accumulate(y, samples, extra);

    // Full-grid kernels live in embedded coordinates (origin at pixel (0,0)).
    ImageTensor kernel_grid = kernel_init_grid;
    for (int j = 1; j <= config.iterations; ++j) {
        const FreqImage coupling = fft2(kernel_grid);
        const ImageTensor z = solve_full_grid(acc, coupling, sigma, config.beta_hqs);
        kernel_grid = denoise_checked(reg, z, strength, j);
        if (config.simplex_projection) project_simplex_inplace(kernel_grid.data);
    }
    return kernel_grid;
}

double mstep_objective(const ImageTensor& y, const std::vector<ImageTensor>& samples, double sigma,
                       double lambda, const std::string& phi, const BlurKernel& kernel) {
    if (samples.empty()) throw Error("objective needs samples");
    double data = 0.0;
    for (const auto& sample : samples) {
        ImageTensor residual = circular_convolve(sample, kernel);
        add_scaled(residual, -1.0, y);
        data += squared_norm(residual);
    }
    data /= 2.0 * sigma * sigma * static_cast<double>(samples.size());
    double reg = 0.0;
    if (phi == "l2") {
        reg = 0.5 * squared_norm(kernel.to_grid());
    } else if (phi == "l1") {
        for (double v : kernel.data) reg += std::abs(v);
    } else if (phi != "none") {
        throw Error("unknown Phi: " + phi);
    }
    return data + lambda * reg;
}

std::shared_ptr<const KernelRegularizer> make_regularizer(const std::string& name) {
    if (name == "l2") return std::make_shared<L2Regularizer>();
    if (name == "l1") return std::make_shared<L1Regularizer>();
    if (name == "none") return std::make_shared<IdentityRegularizer>();
    throw Error("unknown regularizer: " + name + " (pnp needs trained weights)");
}

}  // namespace diffem
