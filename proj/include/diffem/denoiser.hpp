#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffem/mstep.hpp"
#include "diffem/rng.hpp"
#include "diffem/synth.hpp"
#include "diffem/tensor.hpp"

namespace diffem {

/// One bias-free 3x3 convolution layer with circular padding.
/// Weights are [out][in][3][3] row-major in a flat vector.
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<double> weights;

    double& w(int o, int i, int ky, int kx) {
        return weights[((static_cast<size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx];
    }
    double w(int o, int i, int ky, int kx) const {
        return weights[((static_cast<size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx];
    }
};

struct DenoiserConfig {
    int blocks = 5;         // conv layers; rectifiers between them
    int channels = 32;      // feature channels
};

/// Bias-free residual CNN kernel denoiser. Input is 2 planes (noisy grid +
/// constant noise-level map); the network predicts the noise and the denoised
/// grid is input minus prediction. No bias terms anywhere, so the composed
/// network is exactly scale-equivariant: denoise(a*v, a*s) = a*denoise(v, s).
class DenoiserNet {
public:
    explicit DenoiserNet(DenoiserConfig config = {});

    static DenoiserNet random_init(const DenoiserConfig& config, Rng& rng);

    ImageTensor denoise(const ImageTensor& noisy, double sigma_level) const;

    /// Raw network output (the noise prediction) for a 2-plane input.
    std::vector<double> forward(const std::vector<double>& input2, int h, int w) const;

    void save(const std::string& path) const;
    static DenoiserNet load(const std::string& path);

    std::vector<ConvLayer>& layers() { return layers_; }
    const std::vector<ConvLayer>& layers() const { return layers_; }
    const DenoiserConfig& config() const { return config_; }
    size_t parameter_count() const;

private:
    DenoiserConfig config_;
    std::vector<ConvLayer> layers_;
};

struct TrainConfig {
    double sigma_lo = 0.0;
    double sigma_hi = 0.1;  // sigma_hi == sigma_lo pins one level (degenerate tests)
    int steps = 2000;
    int batch = 8;
    double learning_rate = 0.05;
    double momentum = 0.9;
    uint64_t seed = 0;
    int crop = 32;                          // training grids are crop x crop
    std::vector<int> kernel_sizes = {7, 11, 15};
    DegradationConfig kernel_gen;           // trajectory parameters

    void validate() const;
};

struct TrainReport {
    double probe_loss_initial = 0.0;
    double probe_loss_final = 0.0;
    std::vector<double> loss_trace;  // probe loss at a fixed stride
};

/// MSE training on synthetic motion kernels with per-example noise levels
/// drawn from [sigma_lo, sigma_hi]; plain momentum SGD, deterministic given
/// the seed. Throws on divergence (NaN loss) with the step index.
TrainReport train_denoiser(DenoiserNet& net, const TrainConfig& config);

/// MSE loss over a batch and analytic gradients for every weight; exposed for
/// gradient checking. batch entries are (clean grid, noisy grid, sigma map
/// value); grads has parameter_count() entries in layer order.
struct TrainSample {
    ImageTensor clean;
    ImageTensor noisy;
    double sigma_level = 0.0;
};
double denoiser_loss_and_grads(const DenoiserNet& net, const std::vector<TrainSample>& batch,
                               std::vector<double>* grads);

/// Plug-&-Play regularizer: denoise at strength sqrt(lambda/beta) through a
/// trained net.
class PnpRegularizer : public KernelRegularizer {
public:
    explicit PnpRegularizer(DenoiserNet net) : net_(std::move(net)) {}
    ImageTensor denoise(const ImageTensor& noisy, double strength) const override;
    std::string name() const override { return "pnp"; }
    const DenoiserNet& net() const { return net_; }

private:
    DenoiserNet net_;
};

}  // namespace diffem
