#include "diffem/guidance.hpp"

#include <cmath>

#include "diffem/threads.hpp"

namespace diffem {

namespace {
void check_t(int t, const DiffusionSchedule& schedule) {
    if (t < 1 || t > schedule.T) throw Error("timestep out of range");
}
}  // namespace

GuidanceContext::GuidanceContext(const ImageTensor& y, const BlurKernel& kernel, double sigma,
                                 const GuidanceConfig& config, const ScoreModel& model)
    : y_(y), kernel_(kernel), sigma_(sigma), config_(config), model_(&model) {
    y_spec_ = fft2(y_);
    h_spec_ = embed_kernel(kernel_, y_.height, y_.width);
    if (config_.kind == GuidanceKind::Dps && !(sigma_ > 0.0)) {
        throw Error("DPS guidance needs sigma > 0");
    }
    if (config_.kind == GuidanceKind::ExactGaussian) {
        gaussian_ = dynamic_cast<const StationaryGaussianPrior*>(model_);
        if (!gaussian_) throw Error("exact guidance needs a stationary Gaussian prior");
        if (!(sigma_ > 0.0)) throw Error("exact guidance needs sigma > 0");
    }
}

void GuidanceContext::set_kernel(const BlurKernel& kernel) {
    kernel_ = kernel;
    h_spec_ = embed_kernel(kernel_, y_.height, y_.width);
}

ImageTensor GuidanceContext::eval(const ImageTensor& x_t, int t, const ImageTensor& eps,
                                  const ImageTensor& xhat0, const DiffusionSchedule& schedule) const {
    check_t(t, schedule);
    (void)eps;
    const int c = y_.channels;
    const size_t pixels = static_cast<size_t>(y_.height) * y_.width;
    const double s2 = sigma_ * sigma_;

    // Residual spectrum, then the per-frequency preconditioner and H^T.
    FreqImage spec = fft2(xhat0);
    ImageTensor cond_cov;  // ExactGaussian only
    if (config_.kind == GuidanceKind::ExactGaussian) {
        cond_cov = gaussian_->cond_cov_spectrum(t, schedule);
    }
    const double r2 = config_.kind == GuidanceKind::Pigdm ? schedule.r2(t) : 0.0;
    if (config_.kind == GuidanceKind::Pigdm && !(s2 > 0.0) && !(r2 > 0.0)) {
        throw Error("Pigdm guidance needs sigma > 0 or r_t > 0");
    }
    const double dps_weight = config_.dps_step_weight > 0.0 ? config_.dps_step_weight : 1.0 / s2;

    for (size_t p = 0; p < pixels; ++p) {
        const std::complex<double> hv = h_spec_.data[p];
        const double h2 = std::norm(hv);
        for (int ch = 0; ch < c; ++ch) {
            const size_t i = p * c + ch;
            const std::complex<double> residual = y_spec_.data[i] - hv * spec.data[i];
            double denom = 1.0;
            switch (config_.kind) {
                case GuidanceKind::Dps:
                    spec.data[i] = dps_weight * std::conj(hv) * residual;
                    continue;
                case GuidanceKind::Pigdm:
                    denom = r2 * h2 + s2;
                    break;
                case GuidanceKind::ExactGaussian:
                    denom = cond_cov.data[i] * h2 + s2;
                    break;
            }
            if (!(denom > 0.0)) throw Error("degenerate frequency in guidance preconditioner");
            spec.data[i] = std::conj(hv) * residual / denom;
        }
    }
    ImageTensor preconditioned = ifft2(spec);

    if (config_.jacobian == JacobianMode::ScalarSurrogate) {
        scale(preconditioned, 1.0 / std::sqrt(schedule.alpha_bar[t]));
        return preconditioned;
    }
    return model_->jvp_xhat0(x_t, t, schedule, preconditioned);
}

ImageTensor dps_guidance(const ImageTensor& x_t, int t, const ImageTensor& y,
                         const BlurKernel& kernel, double sigma, const ScoreModel& model,
                         const DiffusionSchedule& schedule, const GuidanceConfig& config) {
    GuidanceConfig cfg = config;
    cfg.kind = GuidanceKind::Dps;
    GuidanceContext ctx(y, kernel, sigma, cfg, model);
    ImageTensor eps = model.predict_eps(x_t, t, schedule);
    ImageTensor xhat0 = xhat0_from_eps(x_t, t, eps, schedule);
    return ctx.eval(x_t, t, eps, xhat0, schedule);
}

ImageTensor pigdm_guidance(const ImageTensor& x_t, int t, const ImageTensor& y,
                           const BlurKernel& kernel, double sigma, const ScoreModel& model,
                           const DiffusionSchedule& schedule, const GuidanceConfig& config) {
    GuidanceConfig cfg = config;
    cfg.kind = GuidanceKind::Pigdm;
    GuidanceContext ctx(y, kernel, sigma, cfg, model);
    ImageTensor eps = model.predict_eps(x_t, t, schedule);
    ImageTensor xhat0 = xhat0_from_eps(x_t, t, eps, schedule);
    return ctx.eval(x_t, t, eps, xhat0, schedule);
}

ImageTensor ddpm_step(const ImageTensor& x_t, int t, const ImageTensor& score_like,
                      const DiffusionSchedule& schedule, Rng& rng) {
    check_t(t, schedule);
    ImageTensor out = x_t;
    add_scaled(out, schedule.beta[t], score_like);
    scale(out, 1.0 / std::sqrt(schedule.alpha[t]));
    // Noise suppressed at the final step.
    if (t > 1 && schedule.sigma_tilde[t] > 0.0) {
        const double st = schedule.sigma_tilde[t];
        for (double& v : out.data) v += st * rng.gaussian();
    }
    return out;
}

ImageTensor ParticleEnsemble::average() const {
    if (particles.empty()) throw Error("empty ensemble");
    ImageTensor avg = particles[0];
    for (size_t i = 1; i < particles.size(); ++i) add_scaled(avg, 1.0, particles[i]);
    scale(avg, 1.0 / static_cast<double>(particles.size()));
    return avg;
}

std::vector<uint64_t> particle_seeds(uint64_t master_seed, int n,
                                     const std::vector<uint64_t>& explicit_seeds) {
    if (!explicit_seeds.empty()) {
        if (static_cast<int>(explicit_seeds.size()) != n) throw Error("seed count mismatch");
        return explicit_seeds;
    }
    std::vector<uint64_t> seeds(n);
    for (int i = 0; i < n; ++i) seeds[i] = Rng::derive(master_seed, static_cast<uint64_t>(i));
    return seeds;
}

ParticleEnsemble sample_nonblind(const ImageTensor& y, double sigma, const BlurKernel& kernel,
                                 int n, const DiffusionSchedule& schedule,
                                 const GuidanceConfig& guidance, const ScoreModel& model,
                                 uint64_t master_seed, const std::vector<uint64_t>& explicit_seeds) {
    if (n < 1) throw Error("need n >= 1 particles");
    GuidanceContext ctx(y, kernel, sigma, guidance, model);

    ParticleEnsemble ensemble;
    ensemble.seeds = particle_seeds(master_seed, n, explicit_seeds);
    ensemble.particles.assign(n, ImageTensor(y.height, y.width, y.channels));

    parallel_for(n, [&](int i) {
        Rng rng(ensemble.seeds[i]);
        ImageTensor x(y.height, y.width, y.channels);
        for (double& v : x.data) v = rng.gaussian();
        for (int t = schedule.T; t >= 1; --t) {
            const ImageTensor eps = model.predict_eps(x, t, schedule);
            const ImageTensor xhat0 = xhat0_from_eps(x, t, eps, schedule);
            ImageTensor s = ctx.eval(x, t, eps, xhat0, schedule);
            scale(s, schedule.zeta[t]);
            add_scaled(s, -1.0 / std::sqrt(1.0 - schedule.alpha_bar[t]), eps);
            x = ddpm_step(x, t, s, schedule, rng);
        }
        ensemble.particles[i] = std::move(x);
    });
    return ensemble;
}

}  // namespace diffem
