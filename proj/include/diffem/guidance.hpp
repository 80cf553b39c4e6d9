#pragma once

#include <cstdint>
#include <vector>

#include "diffem/fft.hpp"
#include "diffem/rng.hpp"
#include "diffem/schedule.hpp"
#include "diffem/score.hpp"
#include "diffem/tensor.hpp"

namespace diffem {

/// Likelihood-gradient approximation used by the guided sampler. Dps treats
/// p(x0|x_t) as a point mass at xhat0; Pigdm as N(xhat0, r_t^2), giving a
/// per-frequency preconditioned residual; ExactGaussian is the oracle
/// configuration where p(y|x_t) is computed exactly under a
/// StationaryGaussianPrior (test/verification use).
enum class GuidanceKind { Dps, Pigdm, ExactGaussian };

enum class JacobianMode {
    Exact,            // use model.jvp_xhat0
    ScalarSurrogate,  // (d xhat0 / d x_t)^T ~ (1/sqrt(alpha_bar_t)) I
};

struct GuidanceConfig {
    GuidanceKind kind = GuidanceKind::Pigdm;
    /// Weight applied to J^T H^T residual in DPS mode; <= 0 selects the
    /// default 1/sigma^2 (the exact Gaussian log-likelihood gradient scale).
    double dps_step_weight = 0.0;
    JacobianMode jacobian = JacobianMode::Exact;
};

ImageTensor dps_guidance(const ImageTensor& x_t, int t, const ImageTensor& y, const BlurKernel& kernel,
                         double sigma, const ScoreModel& model, const DiffusionSchedule& schedule,
                         const GuidanceConfig& config = {GuidanceKind::Dps, 0.0, JacobianMode::Exact});

ImageTensor pigdm_guidance(const ImageTensor& x_t, int t, const ImageTensor& y, const BlurKernel& kernel,
                           double sigma, const ScoreModel& model, const DiffusionSchedule& schedule,
                           const GuidanceConfig& config = {GuidanceKind::Pigdm, 0.0, JacobianMode::Exact});

/// Precomputes the observation/kernel spectra once per (y, H) pair; the
/// samplers re-evaluate guidance thousands of times against it. set_kernel
/// refreshes the kernel spectrum when the blind loop updates H.
class GuidanceContext {
public:
    GuidanceContext(const ImageTensor& y, const BlurKernel& kernel, double sigma,
                    const GuidanceConfig& config, const ScoreModel& model);

    void set_kernel(const BlurKernel& kernel);
    const BlurKernel& kernel() const { return kernel_; }

    /// Guidance gradient for one particle. eps and xhat0 are the values
    /// already computed for this step (they are never recomputed here).
    ImageTensor eval(const ImageTensor& x_t, int t, const ImageTensor& eps,
                     const ImageTensor& xhat0, const DiffusionSchedule& schedule) const;

private:
    ImageTensor y_;
    BlurKernel kernel_;
    FreqImage y_spec_;
    FreqImage h_spec_;
    double sigma_;
    GuidanceConfig config_;
    const ScoreModel* model_;
    const StationaryGaussianPrior* gaussian_ = nullptr;  // required by ExactGaussian
};

/// One reverse step: x_{t-1} = (x_t + beta_t * s) / sqrt(alpha_t) + sigma_tilde_t * z,
/// with the noise suppressed at t = 1.
ImageTensor ddpm_step(const ImageTensor& x_t, int t, const ImageTensor& score_like,
                      const DiffusionSchedule& schedule, Rng& rng);

/// n jointly evolved posterior samples plus their RNG stream seeds.
struct ParticleEnsemble {
    std::vector<ImageTensor> particles;
    std::vector<uint64_t> seeds;
    int count() const { return static_cast<int>(particles.size()); }
    /// Pixel-wise average of the particles (the "SA" image).
    ImageTensor average() const;
};

/// Seeds for n particle streams: derive(master, index) unless explicit seeds
/// are supplied.
std::vector<uint64_t> particle_seeds(uint64_t master_seed, int n,
                                     const std::vector<uint64_t>& explicit_seeds = {});

/// Non-blind guided sampler: n independent reverse trajectories under a known
/// kernel. Particles run in parallel; each owns its RNG stream, so results do
/// not depend on the thread count.
ParticleEnsemble sample_nonblind(const ImageTensor& y, double sigma, const BlurKernel& kernel, int n,
                                 const DiffusionSchedule& schedule, const GuidanceConfig& guidance,
                                 const ScoreModel& model, uint64_t master_seed,
                                 const std::vector<uint64_t>& explicit_seeds = {});

}  // namespace diffem
