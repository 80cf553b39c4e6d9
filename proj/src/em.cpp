#include "diffem/em.hpp"

#include <cmath>

#include "diffem/fft.hpp"
#include "diffem/simplex.hpp"
#include "diffem/threads.hpp"

namespace diffem {

BlurKernel init_kernel(const std::string& spec, int ksize) {
    if (ksize < 1 || ksize % 2 == 0) throw Error("kernel size must be odd");
    if (spec == "delta") return BlurKernel::delta(ksize);
    if (spec == "uniform") {
        const double v = 1.0 / (static_cast<double>(ksize) * ksize);
        return BlurKernel::create(ksize, std::vector<double>(static_cast<size_t>(ksize) * ksize, v));
    }
    if (spec.rfind("gaussian", 0) == 0) {
        double std_px = ksize / 6.0;
        const auto colon = spec.find(':');
        if (colon != std::string::npos) {
            const std::string arg = spec.substr(colon + 1);
            if (arg != "auto") std_px = std::stod(arg);
        }
        if (!(std_px > 0.0)) throw Error("gaussian init needs std > 0");
        std::vector<double> data(static_cast<size_t>(ksize) * ksize);
        const int c = ksize / 2;
        for (int y = 0; y < ksize; ++y) {
            for (int x = 0; x < ksize; ++x) {
                const double d2 = static_cast<double>((y - c) * (y - c) + (x - c) * (x - c));
                data[static_cast<size_t>(y) * ksize + x] = std::exp(-0.5 * d2 / (std_px * std_px));
            }
        }
        double sum = 0.0;
        for (double v : data) sum += v;
        for (double& v : data) v /= sum;
        project_simplex_inplace(data);
        return BlurKernel::create(ksize, std::move(data));
    }
    throw Error("unknown kernel init spec: " + spec);
}

namespace {

double data_fit(const ImageTensor& y, const std::vector<ImageTensor>& samples,
                const BlurKernel& kernel, double sigma) {
    double acc = 0.0;
    for (const auto& x : samples) {
        ImageTensor residual = circular_convolve(x, kernel);
        add_scaled(residual, -1.0, y);
        acc += squared_norm(residual);
    }
    return acc / (2.0 * sigma * sigma * static_cast<double>(samples.size()));
}

void check_config(const EmConfig& config) {
    if (config.iterations < 1) throw Error("EM needs L >= 1");
    if (config.particles < 1) throw Error("EM needs n >= 1");
    if (config.schedule.T < 1) throw Error("EM needs a schedule");
    if (config.mstep_stride < 1 || config.trace_stride < 1) throw Error("strides must be >= 1");
}

void push_trace(std::vector<TraceEntry>& trace, int step, double fit, const BlurKernel& kernel,
                int stride, bool force_kernel) {
    TraceEntry entry;
    entry.step = step;
    entry.data_fit = fit;
    if (force_kernel || step % stride == 0) {
        entry.has_kernel = true;
        entry.kernel = kernel;
    }
    trace.push_back(std::move(entry));
}

}  // namespace

EmResult diffusion_em(const ImageTensor& y, double sigma, const EmConfig& config,
                      const ScoreModel& model) {
    check_config(config);
    BlurKernel kernel = init_kernel(config.kernel_init, config.kernel_size);
    const std::vector<uint64_t> seeds =
        particle_seeds(config.seed, config.particles, config.particle_seeds);

    EmResult result;
    for (int l = 1; l <= config.iterations; ++l) {
        // E-step: n fresh guided-sampler runs under the current kernel, one
        // stream per (round, particle).
        std::vector<uint64_t> round_seeds(seeds.size());
        for (size_t i = 0; i < seeds.size(); ++i) {
            round_seeds[i] = Rng::derive(seeds[i], static_cast<uint64_t>(l));
        }
        ParticleEnsemble ensemble =
            sample_nonblind(y, sigma, kernel, config.particles, config.schedule, config.guidance,
                            model, config.seed, round_seeds);
        // M-step on the sampled particles, warm-started from the kernel.
        kernel = hqs_mstep(y, ensemble.particles, sigma, config.mstep, kernel);
        push_trace(result.trace, l, data_fit(y, ensemble.particles, kernel, sigma), kernel,
                   config.trace_stride, l == config.iterations);
        if (l == config.iterations) result.particles = std::move(ensemble);
    }
    result.kernel = kernel;
    return result;
}

EmResult fast_diffusion_em(const ImageTensor& y, double sigma, const EmConfig& config,
                           const ScoreModel& model) {
    check_config(config);
    if (config.guidance.kind == GuidanceKind::ExactGaussian) {
        throw Error("fast EM supports DPS or Pigdm guidance");
    }
    const DiffusionSchedule& schedule = config.schedule;
    const int n = config.particles;
    BlurKernel kernel = init_kernel(config.kernel_init, config.kernel_size);
    GuidanceContext ctx(y, kernel, sigma, config.guidance, model);

    EmResult result;
    result.particles.seeds = particle_seeds(config.seed, n, config.particle_seeds);
    std::vector<Rng> rngs;
    rngs.reserve(n);
    std::vector<ImageTensor> x(n, ImageTensor(y.height, y.width, y.channels));
    for (int i = 0; i < n; ++i) {
        rngs.emplace_back(result.particles.seeds[i]);
        for (double& v : x[i].data) v = rngs[i].gaussian();
    }

    std::vector<ImageTensor> eps(n), xhat0(n);
    for (int t = schedule.T; t >= 1; --t) {
        parallel_for(n, [&](int i) {
            eps[i] = model.predict_eps(x[i], t, schedule);
            xhat0[i] = xhat0_from_eps(x[i], t, eps[i], schedule);
        });

        // M-step on the current conditional means; all particles share the
        // resulting kernel for this step's guidance.
        if ((schedule.T - t) % config.mstep_stride == 0) {
            const double r_t = config.guidance.kind == GuidanceKind::Pigdm ? schedule.r[t] : 0.0;
            kernel = hqs_mstep(y, xhat0, sigma, config.mstep, kernel, r_t);
            ctx.set_kernel(kernel);
        }
        if (t % config.trace_stride == 0 || t == 1) {
            push_trace(result.trace, t, data_fit(y, xhat0, kernel, sigma), kernel,
                       config.trace_stride, t == 1);
        }

        parallel_for(n, [&](int i) {
            ImageTensor s = ctx.eval(x[i], t, eps[i], xhat0[i], schedule);
            scale(s, schedule.zeta[t]);
            add_scaled(s, -1.0 / std::sqrt(1.0 - schedule.alpha_bar[t]), eps[i]);
            x[i] = ddpm_step(x[i], t, s, schedule, rngs[i]);
        });
    }
    result.particles.particles = std::move(x);
    result.kernel = kernel;
    return result;
}

}  // namespace diffem
