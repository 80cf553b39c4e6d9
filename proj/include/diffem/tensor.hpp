#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffem {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Real H x W x C grid of 64-bit floats, row-major, channel-interleaved:
/// data[(y * width + x) * channels + c]. Intensities are nominally in [0,1]
/// but values outside that range are legal (noise is unclipped).
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> data;

    ImageTensor() = default;
    ImageTensor(int h, int w, int c, double fill = 0.0);

    double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }

    size_t size() const { return data.size(); }
    bool same_dims(const ImageTensor& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    bool all_finite() const;
};

/// Complex spectrum with the same dims/layout as its source image.
struct FreqImage {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<std::complex<double>> data;

    FreqImage() = default;
    FreqImage(int h, int w, int c);

    std::complex<double>& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    std::complex<double> at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return data.size(); }
};

/// k x k blur kernel, k odd, entries >= 0 summing to 1 (probability simplex).
/// The kernel center is index (k/2, k/2).
struct BlurKernel {
    int size = 1;
    std::vector<double> data;

    /// Validating factory; throws Error on any invariant violation.
    static BlurKernel create(int size, std::vector<double> data);
    /// Builds without validation. For internal intermediates only.
    static BlurKernel unchecked(int size, std::vector<double> data);
    static BlurKernel delta(int size);

    double& at(int y, int x) { return data[static_cast<size_t>(y) * size + x]; }
    double at(int y, int x) const { return data[static_cast<size_t>(y) * size + x]; }
    int center() const { return size / 2; }

    void validate() const;
    /// Kernel entries as a k x k x 1 image grid.
    ImageTensor to_grid() const;
    /// Interprets a k x k x 1 grid as a kernel, without validation.
    static BlurKernel from_grid_unchecked(const ImageTensor& grid);
};

// Element-wise helpers shared by the samplers and solvers. All require
// matching dims (checked) and never alias-break (in-place forms are explicit).
ImageTensor operator+(const ImageTensor& a, const ImageTensor& b);
ImageTensor operator-(const ImageTensor& a, const ImageTensor& b);
ImageTensor operator*(double s, const ImageTensor& a);
void add_scaled(ImageTensor& dst, double s, const ImageTensor& v);  // dst += s*v
void scale(ImageTensor& dst, double s);

double dot(const ImageTensor& a, const ImageTensor& b);
double squared_norm(const ImageTensor& a);
double max_abs_diff(const ImageTensor& a, const ImageTensor& b);

}  // namespace diffem
