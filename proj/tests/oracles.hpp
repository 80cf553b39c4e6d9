// Independent verification routes used by the unit and acceptance suites.
// Everything here recomputes results from first principles (direct sums,
// dense linear algebra, finite differences) without touching the FFT- or
// solver-based implementation paths it checks.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "diffem/rng.hpp"
#include "diffem/tensor.hpp"

namespace oracles {

using diffem::BlurKernel;
using diffem::ImageTensor;

// Direct O(N^2) 2-D DFT of one channel (forward unnormalized).
inline std::vector<std::complex<double>> naive_dft2(const ImageTensor& image, int channel) {
    const int h = image.height, w = image.width;
    std::vector<std::complex<double>> out(static_cast<size_t>(h) * w);
    for (int ky = 0; ky < h; ++ky) {
        for (int kx = 0; kx < w; ++kx) {
            std::complex<double> acc(0.0, 0.0);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double phase = -2.0 * M_PI *
                        (static_cast<double>(ky) * y / h + static_cast<double>(kx) * x / w);
                    acc += image.at(y, x, channel) * std::complex<double>(std::cos(phase), std::sin(phase));
                }
            }
            out[static_cast<size_t>(ky) * w + kx] = acc;
        }
    }
    return out;
}

// Spatial cyclic convolution by direct double sum; kernel center (k/2, k/2).
inline ImageTensor spatial_convolve(const ImageTensor& image, const BlurKernel& kernel) {
    const int h = image.height, w = image.width, c = kernel.center();
    ImageTensor out(h, w, image.channels);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < image.channels; ++ch) {
                double acc = 0.0;
                for (int ky = 0; ky < kernel.size; ++ky) {
                    for (int kx = 0; kx < kernel.size; ++kx) {
                        const int sy = ((y - (ky - c)) % h + h) % h;
                        const int sx = ((x - (kx - c)) % w + w) % w;
                        acc += kernel.at(ky, kx) * image.at(sy, sx, ch);
                    }
                }
                out.at(y, x, ch) = acc;
            }
        }
    }
    return out;
}

// Dense matrix of the circular convolution operator for one channel
// (d x d, d = h*w), built from the spatial definition.
inline Eigen::MatrixXd dense_convolution_matrix(const BlurKernel& kernel, int h, int w) {
    const int d = h * w;
    const int c = kernel.center();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ky = 0; ky < kernel.size; ++ky) {
                for (int kx = 0; kx < kernel.size; ++kx) {
                    const int sy = ((y - (ky - c)) % h + h) % h;
                    const int sx = ((x - (kx - c)) % w + w) % w;
                    m(y * w + x, sy * w + sx) += kernel.at(ky, kx);
                }
            }
        }
    }
    return m;
}

// Dense circulant covariance C[p][q] = (1/d) sum_w spec(w) cos(<w, p - q>)
// from the spectrum, by direct summation.
inline Eigen::MatrixXd dense_circulant_from_spectrum(const ImageTensor& spectrum, int channel) {
    const int h = spectrum.height, w = spectrum.width;
    const int d = h * w;
    Eigen::MatrixXd m(d, d);
    for (int py = 0; py < h; ++py) {
        for (int px = 0; px < w; ++px) {
            for (int qy = 0; qy < h; ++qy) {
                for (int qx = 0; qx < w; ++qx) {
                    double acc = 0.0;
                    for (int ky = 0; ky < h; ++ky) {
                        for (int kx = 0; kx < w; ++kx) {
                            const double phase = 2.0 * M_PI *
                                (static_cast<double>(ky) * (py - qy) / h +
                                 static_cast<double>(kx) * (px - qx) / w);
                            acc += spectrum.at(ky, kx, channel) * std::cos(phase);
                        }
                    }
                    m(py * w + px, qy * w + qx) = acc / d;
                }
            }
        }
    }
    return m;
}

inline Eigen::VectorXd flatten_channel(const ImageTensor& image, int channel) {
    Eigen::VectorXd v(image.height * image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) v(y * image.width + x) = image.at(y, x, channel);
    }
    return v;
}

inline ImageTensor unflatten_channel(const Eigen::VectorXd& v, int h, int w) {
    ImageTensor out(h, w, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) out.at(y, x, 0) = v(y * w + x);
    }
    return out;
}

// Central finite difference of a scalar function along direction v.
inline double directional_derivative(const std::function<double(const ImageTensor&)>& f,
                                     const ImageTensor& x, const ImageTensor& v, double step) {
    ImageTensor xp = x, xm = x;
    diffem::add_scaled(xp, step, v);
    diffem::add_scaled(xm, -step, v);
    return (f(xp) - f(xm)) / (2.0 * step);
}

// Gradient of a scalar function by per-coordinate central differences.
inline ImageTensor fd_gradient(const std::function<double(const ImageTensor&)>& f,
                               const ImageTensor& x, double step) {
    ImageTensor g(x.height, x.width, x.channels);
    ImageTensor probe = x;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double keep = probe.data[i];
        probe.data[i] = keep + step;
        const double fp = f(probe);
        probe.data[i] = keep - step;
        const double fm = f(probe);
        probe.data[i] = keep;
        g.data[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

// Simplex projection by bisection on the threshold: g(theta) =
// sum max(v - theta, 0) - 1 is piecewise linear and decreasing.
inline std::vector<double> simplex_projection_bisection(const std::vector<double>& v) {
    double lo = -2.0, hi = 2.0;
    for (double x : v) {
        lo = std::min(lo, x - 2.0);
        hi = std::max(hi, x);
    }
    auto mass = [&v](double theta) {
        double acc = 0.0;
        for (double x : v) acc += std::max(x - theta, 0.0);
        return acc;
    };
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mass(mid) > 1.0) lo = mid;
        else hi = mid;
    }
    const double theta = 0.5 * (lo + hi);
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
    return out;
}

// Exhaustive active-set solve of the simplex-projection QP (small n only):
// for each support S the KKT candidate is v_i - theta on S with theta =
// (sum_S v - 1)/|S|; feasibility is checked and the best objective wins.
inline std::vector<double> simplex_projection_active_set(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<double> best;
    double best_obj = std::numeric_limits<double>::infinity();
    for (size_t mask = 1; mask < (1ull << n); ++mask) {
        double sum = 0.0;
        int count = 0;
        for (size_t i = 0; i < n; ++i) {
            if (mask & (1ull << i)) {
                sum += v[i];
                ++count;
            }
        }
        const double theta = (sum - 1.0) / count;
        bool feasible = true;
        double obj = 0.0;
        std::vector<double> x(n, 0.0);
        for (size_t i = 0; i < n; ++i) {
            if (mask & (1ull << i)) {
                x[i] = v[i] - theta;
                if (x[i] < -1e-12) feasible = false;
            } else if (v[i] - theta > 1e-12) {
                feasible = false;  // KKT: inactive coords must not want in
            }
            obj += (x[i] - v[i]) * (x[i] - v[i]);
        }
        if (feasible && obj < best_obj) {
            best_obj = obj;
            best = x;
        }
    }
    return best;
}

inline ImageTensor random_image(int h, int w, int c, diffem::Rng& rng, double scale = 1.0) {
    ImageTensor out(h, w, c);
    for (double& v : out.data) v = scale * rng.gaussian();
    return out;
}

inline BlurKernel random_simplex_kernel(int k, diffem::Rng& rng) {
    std::vector<double> data(static_cast<size_t>(k) * k);
    double sum = 0.0;
    for (double& v : data) {
        v = rng.uniform();
        sum += v;
    }
    for (double& v : data) v /= sum;
    return BlurKernel::create(k, std::move(data));
}

inline double relative_error(double got, double want) {
    return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

}  // namespace oracles
