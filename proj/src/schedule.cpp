#include "diffem/schedule.hpp"

#include <cmath>

#include "diffem/tensor.hpp"

namespace diffem {

bool DiffusionSchedule::near_noise_terminal() const { return alpha_bar[T] < 1e-2; }

DiffusionSchedule make_schedule(int T, double beta_min, double beta_max, SigmaTildeKind sigma_kind,
                                ZetaMode zeta_mode, RMode r_mode) {
    if (T < 1) throw Error("schedule needs T >= 1");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
        throw Error("schedule needs 0 < beta_min <= beta_max < 1");
    }
    DiffusionSchedule s;
    s.T = T;
    s.beta.assign(T + 1, 0.0);
    s.alpha.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    s.sigma_tilde.assign(T + 1, 0.0);
    s.zeta.assign(T + 1, 1.0);
    s.r.assign(T + 1, 0.0);
    for (int t = 1; t <= T; ++t) {
        s.beta[t] = T == 1 ? beta_min
                           : beta_min + (beta_max - beta_min) * static_cast<double>(t - 1) / (T - 1);
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        switch (sigma_kind) {
            case SigmaTildeKind::PosteriorVariance:
                s.sigma_tilde[t] =
                    std::sqrt((1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t]);
                break;
            case SigmaTildeKind::SqrtBeta:
                s.sigma_tilde[t] = std::sqrt(s.beta[t]);
                break;
        }
        s.zeta[t] = zeta_mode == ZetaMode::SqrtAlphaBar ? std::sqrt(s.alpha_bar[t]) : 1.0;
        s.r[t] = r_mode == RMode::VarianceRatio ? std::sqrt(1.0 - s.alpha_bar[t]) : 0.0;
    }
    return s;
}

}  // namespace diffem
