#include "diffem/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace diffem {

namespace {

// Plan creation is the only non-thread-safe part of FFTW; plans are cached
// per (h, w, direction) under a mutex and executed via the new-array API.
// FFTW_ESTIMATE keeps planning deterministic (no timing-based choices).
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int h, int w, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_tuple(h, w, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<std::complex<double>> dummy(static_cast<size_t>(h) * w);
        auto* buf = reinterpret_cast<fftw_complex*>(dummy.data());
        fftw_plan plan =
            fftw_plan_dft_2d(h, w, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!plan) throw Error("fftw plan creation failed");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

void run_dft(const std::complex<double>* in, std::complex<double>* out, int h, int w, int sign) {
    fftw_plan plan = PlanCache::instance().get(h, w, sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

}  // namespace

FreqImage fft2(const ImageTensor& image) {
    const int h = image.height, w = image.width, c = image.channels;
    FreqImage out(h, w, c);
    std::vector<std::complex<double>> plane(static_cast<size_t>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        for (size_t p = 0; p < plane.size(); ++p) plane[p] = image.data[p * c + ch];
        run_dft(plane.data(), plane.data(), h, w, FFTW_FORWARD);
        for (size_t p = 0; p < plane.size(); ++p) out.data[p * c + ch] = plane[p];
    }
    return out;
}

ImageTensor ifft2(const FreqImage& freq) {
    const int h = freq.height, w = freq.width, c = freq.channels;
    ImageTensor out(h, w, c);
    const double inv = 1.0 / (static_cast<double>(h) * w);
    std::vector<std::complex<double>> plane(static_cast<size_t>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        for (size_t p = 0; p < plane.size(); ++p) plane[p] = freq.data[p * c + ch];
        run_dft(plane.data(), plane.data(), h, w, FFTW_BACKWARD);
        for (size_t p = 0; p < plane.size(); ++p) out.data[p * c + ch] = plane[p].real() * inv;
    }
    return out;
}

ImageTensor embed_kernel_grid(const BlurKernel& kernel, int h, int w) {
    if (kernel.size > h || kernel.size > w) throw Error("kernel exceeds image support");
    ImageTensor grid(h, w, 1);
    const int c = kernel.center();
    for (int y = 0; y < kernel.size; ++y) {
        const int gy = ((y - c) % h + h) % h;
        for (int x = 0; x < kernel.size; ++x) {
            const int gx = ((x - c) % w + w) % w;
            grid.at(gy, gx, 0) += kernel.at(y, x);
        }
    }
    return grid;
}

FreqImage embed_kernel(const BlurKernel& kernel, int h, int w) {
    return fft2(embed_kernel_grid(kernel, h, w));
}

ImageTensor crop_kernel_grid(const ImageTensor& grid, int k) {
    if (k > grid.height || k > grid.width) throw Error("kernel exceeds image support");
    ImageTensor out(k, k, 1);
    const int c = k / 2;
    for (int y = 0; y < k; ++y) {
        const int gy = ((y - c) % grid.height + grid.height) % grid.height;
        for (int x = 0; x < k; ++x) {
            const int gx = ((x - c) % grid.width + grid.width) % grid.width;
            out.at(y, x, 0) = grid.at(gy, gx, 0);
        }
    }
    return out;
}

namespace {
ImageTensor convolve_with_spectrum(const ImageTensor& image, const FreqImage& kernel_spec,
                                   bool conjugate) {
    FreqImage spec = fft2(image);
    const int c = image.channels;
    for (size_t p = 0; p < kernel_spec.data.size(); ++p) {
        const std::complex<double> k =
            conjugate ? std::conj(kernel_spec.data[p]) : kernel_spec.data[p];
        for (int ch = 0; ch < c; ++ch) spec.data[p * c + ch] *= k;
    }
    return ifft2(spec);
}
}  // namespace

ImageTensor circular_convolve(const ImageTensor& image, const BlurKernel& kernel) {
    return convolve_with_spectrum(image, embed_kernel(kernel, image.height, image.width), false);
}

ImageTensor circular_correlate(const ImageTensor& image, const BlurKernel& kernel) {
    return convolve_with_spectrum(image, embed_kernel(kernel, image.height, image.width), true);
}

double spectrum_squared_norm(const FreqImage& freq) {
    double acc = 0.0;
    for (const auto& z : freq.data) acc += std::norm(z);
    return acc;
}

void multiply_spectrum(FreqImage& freq, const ImageTensor& multiplier) {
    const bool per_channel = multiplier.channels == freq.channels;
    if (multiplier.height != freq.height || multiplier.width != freq.width ||
        (!per_channel && multiplier.channels != 1)) {
        throw Error("spectrum multiplier dims mismatch");
    }
    const int c = freq.channels;
    const size_t pixels = static_cast<size_t>(freq.height) * freq.width;
    for (size_t p = 0; p < pixels; ++p) {
        for (int ch = 0; ch < c; ++ch) {
            const double m = per_channel ? multiplier.data[p * c + ch] : multiplier.data[p];
            freq.data[p * c + ch] *= m;
        }
    }
}

}  // namespace diffem
