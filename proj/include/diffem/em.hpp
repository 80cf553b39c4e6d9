#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffem/guidance.hpp"
#include "diffem/mstep.hpp"
#include "diffem/schedule.hpp"
#include "diffem/score.hpp"
#include "diffem/tensor.hpp"

namespace diffem {

struct EmConfig {
    int iterations = 10;     // L (EM rounds; unused by the fast driver)
    int particles = 1;       // n
    int kernel_size = 11;
    std::string kernel_init = "gaussian:auto";  // delta | uniform | gaussian:STD ("auto" = k/6)
    GuidanceConfig guidance;
    DiffusionSchedule schedule;
    MStepConfig mstep;
    uint64_t seed = 0;
    int mstep_stride = 1;    // fast driver: run the M-step every m timesteps
    int trace_stride = 1;    // kernel snapshot cadence in the trace
    std::vector<uint64_t> particle_seeds;  // optional explicit per-index seeds
};

/// "delta", "uniform", or "gaussian:STD" (STD in pixels; "gaussian:auto"
/// uses k/6). Always simplex-valid.
BlurKernel init_kernel(const std::string& spec, int ksize);

struct TraceEntry {
    int step = 0;          // EM iteration l, or diffusion timestep t
    double data_fit = 0.0; // (1/(2 sigma^2 n)) sum_i ||y - H x^i||^2
    bool has_kernel = false;
    BlurKernel kernel;
};

struct EmResult {
    ParticleEnsemble particles;
    BlurKernel kernel;
    std::vector<TraceEntry> trace;
};

/// Diffusion EM: L rounds of {E-step: n full guided-sampler runs under the
/// current kernel; M-step: HQS on those samples, warm-started from it}.
EmResult diffusion_em(const ImageTensor& y, double sigma, const EmConfig& config,
                      const ScoreModel& model);

/// Fast Diffusion EM: one reverse pass over the particle batch; at every
/// timestep the M-step runs on the current xhat0 estimates (DPS or Pigdm
/// variant per the guidance kind) and the resulting kernel guides the update.
/// All particles share the kernel estimate at every step.
EmResult fast_diffusion_em(const ImageTensor& y, double sigma, const EmConfig& config,
                           const ScoreModel& model);

}  // namespace diffem
