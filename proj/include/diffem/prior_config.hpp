#pragma once

#include <memory>
#include <string>

#include "diffem/score.hpp"

namespace diffem {

/// A loaded score model; gaussian is non-null when the model is a
/// StationaryGaussianPrior (required by ExactGaussian guidance and the
/// analytic-posterior oracle).
struct LoadedPrior {
    std::shared_ptr<ScoreModel> model;
    std::shared_ptr<StationaryGaussianPrior> gaussian;
};

/// Prior specification file (JSON):
///   {"type": "gaussian", "mu": "mu.rtf1", "cov_spectrum": "spec.rtf1"}
///   {"type": "gmm", "variance": v, "weights": [...], "means": ["m0.rtf1", ...]}
/// Relative paths resolve against the config file's directory.
LoadedPrior load_prior(const std::string& path);

/// Built-in stationary texture prior: constant mean 0.5 and a radial
/// power-law covariance spectrum, scaled so pixel std is pixel_std.
LoadedPrior make_texture_prior(int h, int w, int c, double pixel_std = 0.12,
                               double exponent = 1.4, double corr_freq = 0.04);

}  // namespace diffem
