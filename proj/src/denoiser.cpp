#include "diffem/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "diffem/threads.hpp"

namespace diffem {

namespace {

constexpr uint32_t kWeightFileVersion = 1;

// Planar feature maps: plane(ch) is an H*W slab. Circular padding is applied
// by copying each plane into an (H+2)*(W+2) buffer with wrapped borders so
// the 3x3 inner loops stay branch-free.
void pad_circular(const double* src, int h, int w, double* dst) {
    const int pw = w + 2;
    for (int y = -1; y <= h; ++y) {
        const int sy = (y + h) % h;
        double* row = dst + static_cast<size_t>(y + 1) * pw;
        const double* srow = src + static_cast<size_t>(sy) * w;
        row[0] = srow[w - 1];
        std::memcpy(row + 1, srow, sizeof(double) * w);
        row[w + 1] = srow[0];
    }
}

// out[o] += conv(padded_in, w[o][i]) for one (o, i) pair.
void conv3x3_acc(const double* padded, int h, int w, const double* w9, double* out) {
    const int pw = w + 2;
    for (int y = 0; y < h; ++y) {
        const double* r0 = padded + static_cast<size_t>(y) * pw;
        const double* r1 = r0 + pw;
        const double* r2 = r1 + pw;
        double* orow = out + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            orow[x] += w9[0] * r0[x] + w9[1] * r0[x + 1] + w9[2] * r0[x + 2] +
                       w9[3] * r1[x] + w9[4] * r1[x + 1] + w9[5] * r1[x + 2] +
                       w9[6] * r2[x] + w9[7] * r2[x + 1] + w9[8] * r2[x + 2];
        }
    }
}

// Transposed pass: din += conv(padded_dout, w reversed).
void conv3x3_transpose_acc(const double* padded_dout, int h, int w, const double* w9,
                           double* din) {
    const int pw = w + 2;
    for (int y = 0; y < h; ++y) {
        const double* r0 = padded_dout + static_cast<size_t>(y) * pw;
        const double* r1 = r0 + pw;
        const double* r2 = r1 + pw;
        double* orow = din + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            orow[x] += w9[8] * r0[x] + w9[7] * r0[x + 1] + w9[6] * r0[x + 2] +
                       w9[5] * r1[x] + w9[4] * r1[x + 1] + w9[3] * r1[x + 2] +
                       w9[2] * r2[x] + w9[1] * r2[x + 1] + w9[0] * r2[x + 2];
        }
    }
}

// gw[ky][kx] += sum_yx dout[y][x] * padded_in[y+ky][x+kx].
void conv3x3_weight_grad(const double* padded_in, const double* dout, int h, int w, double* gw9) {
    const int pw = w + 2;
    for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
            double acc = 0.0;
            for (int y = 0; y < h; ++y) {
                const double* irow = padded_in + static_cast<size_t>(y + ky) * pw + kx;
                const double* drow = dout + static_cast<size_t>(y) * w;
                for (int x = 0; x < w; ++x) acc += drow[x] * irow[x];
            }
            gw9[ky * 3 + kx] += acc;
        }
    }
}

struct LayerIo {
    std::vector<double> padded;  // padded input planes, in_channels * (h+2)*(w+2)
    std::vector<double> pre;     // pre-activation output planes
};

}  // namespace

DenoiserNet::DenoiserNet(DenoiserConfig config) : config_(config) {
    if (config_.blocks < 2) throw Error("denoiser needs at least 2 blocks");
    if (config_.channels < 1) throw Error("denoiser needs at least 1 channel");
    layers_.resize(config_.blocks);
    for (int l = 0; l < config_.blocks; ++l) {
        ConvLayer& layer = layers_[l];
        layer.in_channels = l == 0 ? 2 : config_.channels;
        layer.out_channels = l == config_.blocks - 1 ? 1 : config_.channels;
        layer.weights.assign(static_cast<size_t>(layer.in_channels) * layer.out_channels * 9, 0.0);
    }
}

DenoiserNet DenoiserNet::random_init(const DenoiserConfig& config, Rng& rng) {
    DenoiserNet net(config);
    for (auto& layer : net.layers_) {
        const double std = std::sqrt(2.0 / (9.0 * layer.in_channels));
        for (double& w : layer.weights) w = std * rng.gaussian();
    }
    return net;
}

size_t DenoiserNet::parameter_count() const {
    size_t n = 0;
    for (const auto& layer : layers_) n += layer.weights.size();
    return n;
}

namespace {

// Shared forward used by inference and training. Fills io (per layer) when
// keep_intermediates is set.
std::vector<double> forward_impl(const std::vector<ConvLayer>& layers, const double* input,
                                 int in_ch, int h, int w, std::vector<LayerIo>* io) {
    const size_t plane = static_cast<size_t>(h) * w;
    const size_t padded_plane = static_cast<size_t>(h + 2) * (w + 2);
    std::vector<double> act(input, input + in_ch * plane);
    for (size_t l = 0; l < layers.size(); ++l) {
        const ConvLayer& layer = layers[l];
        if (static_cast<int>(act.size() / plane) != layer.in_channels) {
            throw Error("denoiser channel mismatch");
        }
        std::vector<double> padded(layer.in_channels * padded_plane);
        for (int i = 0; i < layer.in_channels; ++i) {
            pad_circular(act.data() + i * plane, h, w, padded.data() + i * padded_plane);
        }
        std::vector<double> out(static_cast<size_t>(layer.out_channels) * plane, 0.0);
        for (int o = 0; o < layer.out_channels; ++o) {
            for (int i = 0; i < layer.in_channels; ++i) {
                conv3x3_acc(padded.data() + i * padded_plane, h, w,
                            layer.weights.data() + (static_cast<size_t>(o) * layer.in_channels + i) * 9,
                            out.data() + o * plane);
            }
        }
        if (io) {
            (*io)[l].padded = std::move(padded);
            (*io)[l].pre = out;
        }
        if (l + 1 < layers.size()) {
            for (double& v : out) v = std::max(v, 0.0);
        }
        act = std::move(out);
    }
    return act;
}

}  // namespace

std::vector<double> DenoiserNet::forward(const std::vector<double>& input2, int h, int w) const {
    if (input2.size() != static_cast<size_t>(2) * h * w) throw Error("denoiser input size mismatch");
    return forward_impl(layers_, input2.data(), 2, h, w, nullptr);
}

ImageTensor DenoiserNet::denoise(const ImageTensor& noisy, double sigma_level) const {
    if (noisy.channels != 1) throw Error("kernel denoiser expects a single-channel grid");
    const int h = noisy.height, w = noisy.width;
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<double> input(2 * plane);
    std::copy(noisy.data.begin(), noisy.data.end(), input.begin());
    std::fill(input.begin() + plane, input.end(), sigma_level);
    const std::vector<double> prediction = forward_impl(layers_, input.data(), 2, h, w, nullptr);
    ImageTensor out = noisy;
    for (size_t i = 0; i < plane; ++i) out.data[i] -= prediction[i];
    return out;
}

double denoiser_loss_and_grads(const DenoiserNet& net, const std::vector<TrainSample>& batch,
                               std::vector<double>* grads) {
    if (batch.empty()) throw Error("empty batch");
    const auto& layers = net.layers();
    const size_t param_count = net.parameter_count();
    if (grads) grads->assign(param_count, 0.0);

    std::vector<double> losses(batch.size(), 0.0);
    std::vector<std::vector<double>> sample_grads(batch.size());

    size_t total_pixels = 0;
    for (const auto& s : batch) total_pixels += s.clean.size();
    const double inv_total = 1.0 / static_cast<double>(total_pixels);

    parallel_for(static_cast<int>(batch.size()), [&](int bi) {
        const TrainSample& sample = batch[static_cast<size_t>(bi)];
        if (!sample.clean.same_dims(sample.noisy) || sample.clean.channels != 1) {
            throw Error("bad training sample dims");
        }
        const int h = sample.clean.height, w = sample.clean.width;
        const size_t plane = static_cast<size_t>(h) * w;
        const size_t padded_plane = static_cast<size_t>(h + 2) * (w + 2);

        std::vector<double> input(2 * plane);
        std::copy(sample.noisy.data.begin(), sample.noisy.data.end(), input.begin());
        std::fill(input.begin() + plane, input.end(), sample.sigma_level);

        std::vector<LayerIo> io(layers.size());
        const std::vector<double> prediction =
            forward_impl(layers, input.data(), 2, h, w, &io);

        // denoised = noisy - prediction; loss contribution sum (denoised-clean)^2.
        double loss = 0.0;
        std::vector<double> delta(plane);
        for (size_t i = 0; i < plane; ++i) {
            const double err = sample.noisy.data[i] - prediction[i] - sample.clean.data[i];
            loss += err * err;
            delta[i] = -2.0 * err * inv_total;  // d loss / d prediction
        }
        losses[static_cast<size_t>(bi)] = loss * inv_total;
        if (!grads) return;

        std::vector<double>& g = sample_grads[static_cast<size_t>(bi)];
        g.assign(param_count, 0.0);
        size_t layer_offset = param_count;
        std::vector<double> dout = std::move(delta);  // gradient wrt layer output planes
        for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
            const ConvLayer& layer = layers[static_cast<size_t>(l)];
            layer_offset -= layer.weights.size();
            // Rectifier mask (applies to the outputs of all but the last layer).
            if (l + 1 < static_cast<int>(layers.size())) {
                const std::vector<double>& pre = io[static_cast<size_t>(l)].pre;
                for (size_t i = 0; i < dout.size(); ++i) {
                    if (pre[i] <= 0.0) dout[i] = 0.0;
                }
            }
            const std::vector<double>& padded_in = io[static_cast<size_t>(l)].padded;
            for (int o = 0; o < layer.out_channels; ++o) {
                for (int i = 0; i < layer.in_channels; ++i) {
                    conv3x3_weight_grad(
                        padded_in.data() + i * padded_plane, dout.data() + o * plane, h, w,
                        g.data() + layer_offset +
                            (static_cast<size_t>(o) * layer.in_channels + i) * 9);
                }
            }
            if (l == 0) break;
            std::vector<double> padded_dout(static_cast<size_t>(layer.out_channels) * padded_plane);
            for (int o = 0; o < layer.out_channels; ++o) {
                pad_circular(dout.data() + o * plane, h, w, padded_dout.data() + o * padded_plane);
            }
            std::vector<double> din(static_cast<size_t>(layer.in_channels) * plane, 0.0);
            for (int o = 0; o < layer.out_channels; ++o) {
                for (int i = 0; i < layer.in_channels; ++i) {
                    conv3x3_transpose_acc(
                        padded_dout.data() + o * padded_plane, h, w,
                        layer.weights.data() + (static_cast<size_t>(o) * layer.in_channels + i) * 9,
                        din.data() + i * plane);
                }
            }
            dout = std::move(din);
        }
    });

    double loss = 0.0;
    for (double l : losses) loss += l;
    if (grads) {
        for (const auto& g : sample_grads) {
            for (size_t i = 0; i < param_count; ++i) (*grads)[i] += g[i];
        }
    }
    return loss;
}

void TrainConfig::validate() const {
    if (sigma_lo < 0.0 || sigma_hi < sigma_lo || steps < 1 || batch < 1 ||
        !(learning_rate > 0.0) || crop < 3) {
        throw Error("bad train config");
    }
    for (int k : kernel_sizes) {
        if (k < 3 || k % 2 == 0 || k > crop) throw Error("train kernel sizes must be odd, >= 3, <= crop");
    }
}

namespace {

TrainSample make_sample(const TrainConfig& config, Rng& rng) {
    DegradationConfig gen = config.kernel_gen;
    gen.kernel_size =
        config.kernel_sizes[static_cast<size_t>(rng.uniform() * config.kernel_sizes.size()) %
                            config.kernel_sizes.size()];
    const BlurKernel kernel = sample_motion_kernel(gen, rng);

    TrainSample sample;
    sample.clean = ImageTensor(config.crop, config.crop, 1);
    const int offset = (config.crop - kernel.size) / 2;
    for (int y = 0; y < kernel.size; ++y) {
        for (int x = 0; x < kernel.size; ++x) {
            sample.clean.at(y + offset, x + offset, 0) = kernel.at(y, x);
        }
    }
    sample.sigma_level = config.sigma_lo + (config.sigma_hi - config.sigma_lo) * rng.uniform();
    sample.noisy = sample.clean;
    for (double& v : sample.noisy.data) v += sample.sigma_level * rng.gaussian();
    return sample;
}

}  // namespace

TrainReport train_denoiser(DenoiserNet& net, const TrainConfig& config) {
    config.validate();

    std::vector<TrainSample> probe;
    {
        Rng probe_rng(Rng::derive(config.seed, 0x70726f6265ULL));  // fixed probe stream
        for (int i = 0; i < 8; ++i) probe.push_back(make_sample(config, probe_rng));
    }

    TrainReport report;
    report.probe_loss_initial = denoiser_loss_and_grads(net, probe, nullptr);
    const int trace_stride = std::max(1, config.steps / 20);

    std::vector<double> velocity(net.parameter_count(), 0.0);
    std::vector<double> grads;
    Rng data_rng(Rng::derive(config.seed, 0x64617461ULL));
    for (int step = 0; step < config.steps; ++step) {
        std::vector<TrainSample> batch;
        batch.reserve(config.batch);
        for (int b = 0; b < config.batch; ++b) batch.push_back(make_sample(config, data_rng));
        const double loss = denoiser_loss_and_grads(net, batch, &grads);
        if (!std::isfinite(loss)) {
            throw Error("training diverged (loss not finite) at step " + std::to_string(step));
        }
        size_t p = 0;
        for (auto& layer : net.layers()) {
            for (double& w : layer.weights) {
                velocity[p] = config.momentum * velocity[p] - config.learning_rate * grads[p];
                w += velocity[p];
                ++p;
            }
        }
        if (step % trace_stride == 0) {
            report.loss_trace.push_back(denoiser_loss_and_grads(net, probe, nullptr));
        }
    }
    report.probe_loss_final = denoiser_loss_and_grads(net, probe, nullptr);
    report.loss_trace.push_back(report.probe_loss_final);
    return report;
}

// ---------------------------------------------------------------------------
// Weight file "DNW1": magic, version u32, layer count u32, then per layer
// out/in/kH/kW u32 and f64 LE weights row-major.
// ---------------------------------------------------------------------------

namespace {
void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("unexpected end of weight file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
}  // namespace

void DenoiserNet::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write("DNW1", 4);
    put_u32(out, kWeightFileVersion);
    put_u32(out, static_cast<uint32_t>(layers_.size()));
    for (const auto& layer : layers_) {
        put_u32(out, static_cast<uint32_t>(layer.out_channels));
        put_u32(out, static_cast<uint32_t>(layer.in_channels));
        put_u32(out, 3);
        put_u32(out, 3);
        for (double w : layer.weights) {
            uint64_t bits;
            std::memcpy(&bits, &w, 8);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            out.write(reinterpret_cast<const char*>(b), 8);
        }
    }
    if (!out) throw Error("write failed: " + path);
}

DenoiserNet DenoiserNet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    char magic[4];
    if (!in.read(magic, 4)) throw Error("unexpected end of weight file");
    if (std::memcmp(magic, "DNW1", 4) != 0) throw Error("bad magic (expected DNW1): " + path);
    const uint32_t version = get_u32(in);
    if (version != kWeightFileVersion) {
        throw Error("unsupported weight file version " + std::to_string(version));
    }
    const uint32_t count = get_u32(in);
    if (count < 2 || count > 64) throw Error("implausible layer count in weight file");

    std::vector<ConvLayer> layers(count);
    for (uint32_t l = 0; l < count; ++l) {
        ConvLayer& layer = layers[l];
        layer.out_channels = static_cast<int>(get_u32(in));
        layer.in_channels = static_cast<int>(get_u32(in));
        const uint32_t kh = get_u32(in), kw = get_u32(in);
        if (kh != 3 || kw != 3) throw Error("unsupported kernel shape in weight file");
        if (layer.in_channels < 1 || layer.out_channels < 1) throw Error("bad layer dims in weight file");
        layer.weights.resize(static_cast<size_t>(layer.in_channels) * layer.out_channels * 9);
        std::vector<unsigned char> raw(layer.weights.size() * 8);
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
            throw Error("unexpected end of weight file");
        }
        for (size_t i = 0; i < layer.weights.size(); ++i) {
            uint64_t bits = 0;
            for (int k = 7; k >= 0; --k) bits = (bits << 8) | raw[i * 8 + k];
            std::memcpy(&layer.weights[i], &bits, 8);
        }
    }
    if (layers.front().in_channels != 2 || layers.back().out_channels != 1) {
        throw Error("weight file layer chain must map 2 planes to 1");
    }
    for (size_t l = 1; l < layers.size(); ++l) {
        if (layers[l].in_channels != layers[l - 1].out_channels) {
            throw Error("weight file layer chain mismatch");
        }
    }
    DenoiserConfig config;
    config.blocks = static_cast<int>(count);
    config.channels = layers.front().out_channels;
    DenoiserNet net(config);
    net.layers_ = std::move(layers);
    return net;
}

ImageTensor PnpRegularizer::denoise(const ImageTensor& noisy, double strength) const {
    return net_.denoise(noisy, strength);
}

}  // namespace diffem
