#pragma once

#include <vector>

namespace diffem {

enum class SigmaTildeKind { PosteriorVariance, SqrtBeta };
enum class ZetaMode { SqrtAlphaBar, One };
enum class RMode { VarianceRatio, Zero };

/// Per-timestep tables for the DDPM reverse process. All vectors have length
/// T + 1 with index 0 the data level: beta[0] = 0, alpha_bar[0] = 1.
struct DiffusionSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> sigma_tilde;
    std::vector<double> zeta;
    std::vector<double> r;

    double r2(int t) const { return r[t] * r[t]; }
    /// True when alpha_bar[T] < 1e-2, i.e. x_T is near pure noise. Short test
    /// schedules may legitimately violate this; samplers do not enforce it.
    bool near_noise_terminal() const;
};

/// Linear beta ramp from beta_min to beta_max over t = 1..T.
DiffusionSchedule make_schedule(int T, double beta_min, double beta_max,
                                SigmaTildeKind sigma_kind = SigmaTildeKind::PosteriorVariance,
                                ZetaMode zeta_mode = ZetaMode::SqrtAlphaBar,
                                RMode r_mode = RMode::VarianceRatio);

}  // namespace diffem
