#pragma once

#include <memory>
#include <vector>

#include "diffem/rng.hpp"
#include "diffem/schedule.hpp"
#include "diffem/tensor.hpp"

namespace diffem {

/// Noise-predictor abstraction the samplers consume. predict_eps returns
/// eps(x_t, t); jvp_xhat0 returns the action of (d xhat0 / d x_t)^T on v.
/// Both analytic priors below have symmetric Jacobians, so the transpose
/// action coincides with the forward directional derivative.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    virtual ImageTensor predict_eps(const ImageTensor& x_t, int t,
                                    const DiffusionSchedule& schedule) const = 0;
    virtual ImageTensor jvp_xhat0(const ImageTensor& x_t, int t, const DiffusionSchedule& schedule,
                                  const ImageTensor& v) const = 0;
};

/// xhat0 = (x_t - sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_bar_t)
ImageTensor xhat0_from_eps(const ImageTensor& x_t, int t, const ImageTensor& eps,
                           const DiffusionSchedule& schedule);

/// Tweedie: score = -eps / sqrt(1 - alpha_bar_t). Errors when alpha_bar_t = 1.
ImageTensor score_from_eps(const ImageTensor& x_t, int t, const ImageTensor& eps,
                           const DiffusionSchedule& schedule);

/// Stationary Gaussian prior N(mu, Sigma) with circulant per-channel
/// covariance given by a real non-negative Fourier spectrum. Every marginal,
/// conditional and Jacobian is Fourier-diagonal, which makes this prior the
/// analytic oracle for the samplers.
class StationaryGaussianPrior : public ScoreModel {
public:
    /// cov_spectrum has the dims of mu and is symmetrized under frequency
    /// negation on construction (a real covariance operator requires it).
    StationaryGaussianPrior(ImageTensor mu, ImageTensor cov_spectrum);

    ImageTensor predict_eps(const ImageTensor& x_t, int t,
                            const DiffusionSchedule& schedule) const override;
    ImageTensor jvp_xhat0(const ImageTensor& x_t, int t, const DiffusionSchedule& schedule,
                          const ImageTensor& v) const override;

    /// Exact score of the time-t marginal N(sqrt(ab)*mu, ab*Sigma + (1-ab)I).
    ImageTensor score_t(const ImageTensor& x_t, int t, const DiffusionSchedule& schedule) const;
    /// Full log-density of the time-t marginal (normalization included).
    double log_marginal_density(const ImageTensor& x_t, int t,
                                const DiffusionSchedule& schedule) const;
    /// Spectrum of Cov(x_0 | x_t) = (1-ab) * Sigma / (ab*Sigma + (1-ab)).
    ImageTensor cond_cov_spectrum(int t, const DiffusionSchedule& schedule) const;

    /// Draws x = mu + ifft2(sqrt(Sigma_hat) . fft2(white)).
    ImageTensor sample(Rng& rng) const;

    const ImageTensor& mean() const { return mu_; }
    const ImageTensor& cov_spectrum() const { return cov_spec_; }

private:
    ImageTensor mu_;
    ImageTensor cov_spec_;
};

/// Posterior of x0 given y = Hx0 + sigma*n under a StationaryGaussianPrior:
/// per-frequency Gaussian conditioning. var_spectrum is the circulant
/// spectrum of the posterior covariance operator.
struct PosteriorGaussian {
    ImageTensor mean;
    ImageTensor var_spectrum;
};

PosteriorGaussian analytic_posterior(const ImageTensor& y, const BlurKernel& kernel, double sigma,
                                     const StationaryGaussianPrior& prior);

/// Draws one sample from an analytic posterior (or any Fourier-diagonal
/// Gaussian given as mean + covariance spectrum).
ImageTensor sample_fourier_gaussian(const ImageTensor& mean, const ImageTensor& var_spectrum,
                                    Rng& rng);

/// Isotropic Gaussian mixture over whole images: component means, one shared
/// variance, weights on the simplex. Multimodality stress-test with exact
/// scores via responsibility-weighted component scores.
class GmmPrior : public ScoreModel {
public:
    GmmPrior(std::vector<ImageTensor> means, double variance, std::vector<double> weights);

    ImageTensor predict_eps(const ImageTensor& x_t, int t,
                            const DiffusionSchedule& schedule) const override;
    ImageTensor jvp_xhat0(const ImageTensor& x_t, int t, const DiffusionSchedule& schedule,
                          const ImageTensor& v) const override;

    ImageTensor score_t(const ImageTensor& x_t, int t, const DiffusionSchedule& schedule) const;
    double log_marginal_density(const ImageTensor& x_t, int t,
                                const DiffusionSchedule& schedule) const;
    std::vector<double> responsibilities(const ImageTensor& x_t, int t,
                                         const DiffusionSchedule& schedule) const;

private:
    std::vector<ImageTensor> means_;
    double variance_;
    std::vector<double> weights_;
};

}  // namespace diffem
