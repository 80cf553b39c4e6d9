#include "diffem/metrics.hpp"

#include <cmath>

#include "diffem/fft.hpp"

namespace diffem {

double psnr(const ImageTensor& x, const ImageTensor& ref) {
    if (!x.same_dims(ref)) throw Error("psnr dims mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double d = x.data[i] - ref.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.data.size());
    if (mse < 1e-10) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

double kernel_mse(const BlurKernel& estimate, const BlurKernel& reference) {
    const int k = std::max(estimate.size, reference.size);

    // Center-pad both to k x k.
    auto pad = [k](const BlurKernel& src) {
        std::vector<double> grid(static_cast<size_t>(k) * k, 0.0);
        const int off = (k - src.size) / 2;
        for (int y = 0; y < src.size; ++y) {
            for (int x = 0; x < src.size; ++x) {
                grid[static_cast<size_t>(y + off) * k + x + off] = src.at(y, x);
            }
        }
        return grid;
    };
    const std::vector<double> a = pad(estimate);
    const std::vector<double> b = pad(reference);

    // The circular model fixes H only up to a shift, so take the minimum over
    // all circular shifts.
    double best = std::numeric_limits<double>::infinity();
    for (int sy = 0; sy < k; ++sy) {
        for (int sx = 0; sx < k; ++sx) {
            double acc = 0.0;
            for (int y = 0; y < k; ++y) {
                const int ys = (y + sy) % k;
                for (int x = 0; x < k; ++x) {
                    const int xs = (x + sx) % k;
                    const double d = a[static_cast<size_t>(ys) * k + xs] -
                                     b[static_cast<size_t>(y) * k + x];
                    acc += d * d;
                }
            }
            best = std::min(best, acc);
        }
    }
    return best / (static_cast<double>(k) * k);
}

double reblur_loss(const ImageTensor& y, const ImageTensor& xhat, const BlurKernel& kernel_hat,
                   double sigma) {
    if (!y.same_dims(xhat)) throw Error("reblur dims mismatch");
    ImageTensor residual = circular_convolve(xhat, kernel_hat);
    add_scaled(residual, -1.0, y);
    const double elements = static_cast<double>(y.size());
    return squared_norm(residual) - sigma * sigma * elements;
}

}  // namespace diffem
