#include "diffem/score.hpp"

#include <algorithm>
#include <cmath>

#include "diffem/fft.hpp"

namespace diffem {

namespace {

void check_t(int t, const DiffusionSchedule& schedule) {
    if (t < 1 || t > schedule.T) throw Error("timestep out of range");
}

double require_alpha_bar(int t, const DiffusionSchedule& schedule) {
    check_t(t, schedule);
    const double ab = schedule.alpha_bar[t];
    if (!(ab > 0.0)) throw Error("schedule has alpha_bar <= 0");
    return ab;
}

}  // namespace

ImageTensor xhat0_from_eps(const ImageTensor& x_t, int t, const ImageTensor& eps,
                           const DiffusionSchedule& schedule) {
    const double ab = require_alpha_bar(t, schedule);
    ImageTensor out = x_t;
    add_scaled(out, -std::sqrt(1.0 - ab), eps);
    scale(out, 1.0 / std::sqrt(ab));
    return out;
}

ImageTensor score_from_eps(const ImageTensor& x_t, int t, const ImageTensor& eps,
                           const DiffusionSchedule& schedule) {
    const double ab = require_alpha_bar(t, schedule);
    if (ab >= 1.0) throw Error("score undefined at zero noise level (alpha_bar = 1)");
    (void)x_t;
    return (-1.0 / std::sqrt(1.0 - ab)) * eps;
}

// ---------------------------------------------------------------------------
// StationaryGaussianPrior. Everything is a per-frequency (circulant) operation
// per channel: marginal spectrum at t is ab*Sigma_hat + (1 - ab).
// ---------------------------------------------------------------------------

StationaryGaussianPrior::StationaryGaussianPrior(ImageTensor mu, ImageTensor cov_spectrum)
    : mu_(std::move(mu)), cov_spec_(std::move(cov_spectrum)) {
    if (!mu_.same_dims(cov_spec_)) throw Error("mu / cov_spectrum dims mismatch");
    // A real covariance operator needs a spectrum symmetric under frequency
    // negation; symmetrize so callers can hand in any non-negative grid.
    const int h = mu_.height, w = mu_.width, c = mu_.channels;
    ImageTensor sym = cov_spec_;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int yn = (h - y) % h, xn = (w - x) % w;
            for (int ch = 0; ch < c; ++ch) {
                sym.at(y, x, ch) = 0.5 * (cov_spec_.at(y, x, ch) + cov_spec_.at(yn, xn, ch));
            }
        }
    }
    cov_spec_ = std::move(sym);
    for (double v : cov_spec_.data) {
        if (!std::isfinite(v) || v < 0.0) throw Error("cov spectrum must be finite and >= 0");
    }
}

ImageTensor StationaryGaussianPrior::score_t(const ImageTensor& x_t, int t,
                                             const DiffusionSchedule& schedule) const {
    const double ab = require_alpha_bar(t, schedule);
    if (!x_t.same_dims(mu_)) throw Error("x_t dims mismatch with prior");
    ImageTensor centered = x_t;
    add_scaled(centered, -std::sqrt(ab), mu_);
    FreqImage spec = fft2(centered);
    for (size_t i = 0; i < spec.data.size(); ++i) {
        const double vt = ab * cov_spec_.data[i] + (1.0 - ab);
        spec.data[i] /= -vt;
    }
    return ifft2(spec);
}

ImageTensor StationaryGaussianPrior::predict_eps(const ImageTensor& x_t, int t,
                                                 const DiffusionSchedule& schedule) const {
    const double ab = require_alpha_bar(t, schedule);
    ImageTensor s = score_t(x_t, t, schedule);
    scale(s, -std::sqrt(1.0 - ab));
    return s;
}

ImageTensor StationaryGaussianPrior::jvp_xhat0(const ImageTensor& x_t, int t,
                                               const DiffusionSchedule& schedule,
                                               const ImageTensor& v) const {
    const double ab = require_alpha_bar(t, schedule);
    (void)x_t;
    // d xhat0 / d x_t is the circulant multiplier sqrt(ab)*Sigma / v_t;
    // symmetric, so the transpose action is the same multiplier.
    FreqImage spec = fft2(v);
    for (size_t i = 0; i < spec.data.size(); ++i) {
        const double vt = ab * cov_spec_.data[i] + (1.0 - ab);
        spec.data[i] *= std::sqrt(ab) * cov_spec_.data[i] / vt;
    }
    return ifft2(spec);
}

double StationaryGaussianPrior::log_marginal_density(const ImageTensor& x_t, int t,
                                                     const DiffusionSchedule& schedule) const {
    const double ab = require_alpha_bar(t, schedule);
    ImageTensor centered = x_t;
    add_scaled(centered, -std::sqrt(ab), mu_);
    FreqImage spec = fft2(centered);
    const double n = static_cast<double>(x_t.height) * x_t.width;
    double quad = 0.0, logdet = 0.0;
    for (size_t i = 0; i < spec.data.size(); ++i) {
        const double vt = ab * cov_spec_.data[i] + (1.0 - ab);
        quad += std::norm(spec.data[i]) / vt;
        logdet += std::log(vt);
    }
    const double dims = static_cast<double>(x_t.size());
    return -0.5 * (quad / n + logdet + dims * std::log(2.0 * M_PI));
}

ImageTensor StationaryGaussianPrior::cond_cov_spectrum(int t,
                                                       const DiffusionSchedule& schedule) const {
    const double ab = require_alpha_bar(t, schedule);
    ImageTensor out = cov_spec_;
    for (double& v : out.data) {
        const double vt = ab * v + (1.0 - ab);
        v = (1.0 - ab) * v / vt;
    }
    return out;
}

ImageTensor StationaryGaussianPrior::sample(Rng& rng) const {
    return sample_fourier_gaussian(mu_, cov_spec_, rng);
}

ImageTensor sample_fourier_gaussian(const ImageTensor& mean, const ImageTensor& var_spectrum,
                                    Rng& rng) {
    if (!mean.same_dims(var_spectrum)) throw Error("mean / var_spectrum dims mismatch");
    ImageTensor white(mean.height, mean.width, mean.channels);
    for (double& v : white.data) v = rng.gaussian();
    FreqImage spec = fft2(white);
    for (size_t i = 0; i < spec.data.size(); ++i) {
        spec.data[i] *= std::sqrt(std::max(var_spectrum.data[i], 0.0));
    }
    ImageTensor out = ifft2(spec);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += mean.data[i];
    return out;
}

PosteriorGaussian analytic_posterior(const ImageTensor& y, const BlurKernel& kernel, double sigma,
                                     const StationaryGaussianPrior& prior) {
    if (!(sigma > 0.0)) throw Error("analytic_posterior needs sigma > 0");
    if (!y.same_dims(prior.mean())) throw Error("y dims mismatch with prior");
    const FreqImage h_spec = embed_kernel(kernel, y.height, y.width);
    const FreqImage y_spec = fft2(y);
    const FreqImage mu_spec = fft2(prior.mean());
    const ImageTensor& cov = prior.cov_spectrum();
    const int c = y.channels;
    const double inv_s2 = 1.0 / (sigma * sigma);

    FreqImage mean_spec(y.height, y.width, c);
    ImageTensor var_spec(y.height, y.width, c);
    const size_t pixels = static_cast<size_t>(y.height) * y.width;
    for (size_t p = 0; p < pixels; ++p) {
        const std::complex<double> hv = h_spec.data[p];
        const double h2 = std::norm(hv);
        for (int ch = 0; ch < c; ++ch) {
            const size_t i = p * c + ch;
            const double sv = cov.data[i];
            if (sv <= 0.0) {
                if (h2 == 0.0) throw Error("degenerate frequency: zero prior variance and zero kernel response");
                // Dogmatic prior pins this frequency to the mean.
                mean_spec.data[i] = mu_spec.data[i];
                var_spec.data[i] = 0.0;
                continue;
            }
            const double precision = h2 * inv_s2 + 1.0 / sv;
            mean_spec.data[i] =
                (std::conj(hv) * y_spec.data[i] * inv_s2 + mu_spec.data[i] / sv) / precision;
            var_spec.data[i] = 1.0 / precision;
        }
    }
    return {ifft2(mean_spec), std::move(var_spec)};
}

// ---------------------------------------------------------------------------
// GmmPrior: isotropic components, exact mixture score via responsibilities.
// ---------------------------------------------------------------------------

GmmPrior::GmmPrior(std::vector<ImageTensor> means, double variance, std::vector<double> weights)
    : means_(std::move(means)), variance_(variance), weights_(std::move(weights)) {
    if (means_.empty() || means_.size() != weights_.size()) {
        throw Error("GMM needs matching means/weights");
    }
    if (!(variance_ > 0.0)) throw Error("GMM variance must be > 0");
    double sum = 0.0;
    for (double w : weights_) {
        if (w < 0.0) throw Error("GMM weights must be >= 0");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error("GMM weights must sum to 1");
    for (double& w : weights_) w /= sum;
    for (size_t k = 1; k < means_.size(); ++k) {
        if (!means_[k].same_dims(means_[0])) throw Error("GMM means dims mismatch");
    }
}

std::vector<double> GmmPrior::responsibilities(const ImageTensor& x_t, int t,
                                               const DiffusionSchedule& schedule) const {
    const double ab = require_alpha_bar(t, schedule);
    const double vt = ab * variance_ + (1.0 - ab);
    const double sab = std::sqrt(ab);
    std::vector<double> logp(means_.size());
    for (size_t k = 0; k < means_.size(); ++k) {
        double d2 = 0.0;
        for (size_t i = 0; i < x_t.data.size(); ++i) {
            const double d = x_t.data[i] - sab * means_[k].data[i];
            d2 += d * d;
        }
        logp[k] = std::log(std::max(weights_[k], 1e-300)) - 0.5 * d2 / vt;
    }
    const double m = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    for (double& lp : logp) {
        lp = std::exp(lp - m);
        z += lp;
    }
    for (double& lp : logp) lp /= z;
    return logp;
}

ImageTensor GmmPrior::score_t(const ImageTensor& x_t, int t,
                              const DiffusionSchedule& schedule) const {
    const double ab = require_alpha_bar(t, schedule);
    const double vt = ab * variance_ + (1.0 - ab);
    const double sab = std::sqrt(ab);
    const std::vector<double> gamma = responsibilities(x_t, t, schedule);
    ImageTensor s(x_t.height, x_t.width, x_t.channels);
    for (size_t k = 0; k < means_.size(); ++k) {
        for (size_t i = 0; i < s.data.size(); ++i) {
            s.data[i] += gamma[k] * (sab * means_[k].data[i] - x_t.data[i]) / vt;
        }
    }
    return s;
}

double GmmPrior::log_marginal_density(const ImageTensor& x_t, int t,
                                      const DiffusionSchedule& schedule) const {
    const double ab = require_alpha_bar(t, schedule);
    const double vt = ab * variance_ + (1.0 - ab);
    const double sab = std::sqrt(ab);
    const double dims = static_cast<double>(x_t.size());
    std::vector<double> logp(means_.size());
    for (size_t k = 0; k < means_.size(); ++k) {
        double d2 = 0.0;
        for (size_t i = 0; i < x_t.data.size(); ++i) {
            const double d = x_t.data[i] - sab * means_[k].data[i];
            d2 += d * d;
        }
        logp[k] = std::log(std::max(weights_[k], 1e-300)) - 0.5 * d2 / vt -
                  0.5 * dims * std::log(2.0 * M_PI * vt);
    }
    const double m = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    for (double lp : logp) z += std::exp(lp - m);
    return m + std::log(z);
}

ImageTensor GmmPrior::predict_eps(const ImageTensor& x_t, int t,
                                  const DiffusionSchedule& schedule) const {
    const double ab = require_alpha_bar(t, schedule);
    ImageTensor s = score_t(x_t, t, schedule);
    scale(s, -std::sqrt(1.0 - ab));
    return s;
}

ImageTensor GmmPrior::jvp_xhat0(const ImageTensor& x_t, int t, const DiffusionSchedule& schedule,
                                const ImageTensor& v) const {
    const double ab = require_alpha_bar(t, schedule);
    const double vt = ab * variance_ + (1.0 - ab);
    const double sab = std::sqrt(ab);
    const std::vector<double> gamma = responsibilities(x_t, t, schedule);

    // Hessian of the mixture log-density applied to v:
    //   S'v = (1/vt^2) [ sum_k g_k a_k d_k - (m^T v) m ] - v / vt
    // with d_k = sqrt(ab) mu_k - x_t, a_k = d_k^T v, m = sum_k g_k d_k.
    // J^T v = (v + (1-ab) S'v) / sqrt(ab); symmetric, so J^T = J.
    const size_t n = x_t.data.size();
    std::vector<double> mvec(n, 0.0);
    ImageTensor acc(x_t.height, x_t.width, x_t.channels);
    double m_dot_v = 0.0;
    for (size_t k = 0; k < means_.size(); ++k) {
        double a_k = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double d = sab * means_[k].data[i] - x_t.data[i];
            a_k += d * v.data[i];
        }
        for (size_t i = 0; i < n; ++i) {
            const double d = sab * means_[k].data[i] - x_t.data[i];
            acc.data[i] += gamma[k] * a_k * d;
            mvec[i] += gamma[k] * d;
        }
    }
    for (size_t i = 0; i < n; ++i) m_dot_v += mvec[i] * v.data[i];

    ImageTensor out(x_t.height, x_t.width, x_t.channels);
    for (size_t i = 0; i < n; ++i) {
        const double hess_v = (acc.data[i] - m_dot_v * mvec[i]) / (vt * vt) - v.data[i] / vt;
        out.data[i] = (v.data[i] + (1.0 - ab) * hess_v) / sab;
    }
    return out;
}

}  // namespace diffem
