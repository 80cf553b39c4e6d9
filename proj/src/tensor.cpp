#include "diffem/tensor.hpp"

#include <cmath>
#include <cstdlib>

namespace diffem {

ImageTensor::ImageTensor(int h, int w, int c, double fill)
    : height(h), width(w), channels(c) {
    if (h < 1 || w < 1 || (c != 1 && c != 3)) {
        throw Error("ImageTensor dims must be >= 1 with 1 or 3 channels");
    }
    data.assign(static_cast<size_t>(h) * w * c, fill);
}

bool ImageTensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

FreqImage::FreqImage(int h, int w, int c) : height(h), width(w), channels(c) {
    data.assign(static_cast<size_t>(h) * w * c, {0.0, 0.0});
}

BlurKernel BlurKernel::create(int size, std::vector<double> data) {
    BlurKernel k = unchecked(size, std::move(data));
    k.validate();
    return k;
}

BlurKernel BlurKernel::unchecked(int size, std::vector<double> data) {
    BlurKernel k;
    k.size = size;
    k.data = std::move(data);
    return k;
}

BlurKernel BlurKernel::delta(int size) {
    BlurKernel k = unchecked(size, std::vector<double>(static_cast<size_t>(size) * size, 0.0));
    k.at(k.center(), k.center()) = 1.0;
    k.validate();
    return k;
}

void BlurKernel::validate() const {
    if (size < 1 || size % 2 == 0) throw Error("kernel size must be odd and >= 1");
    if (data.size() != static_cast<size_t>(size) * size) throw Error("kernel data size mismatch");
    double sum = 0.0;
    for (double v : data) {
        if (!std::isfinite(v)) throw Error("kernel entry not finite");
        if (v < 0.0) throw Error("kernel entry negative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw Error("kernel entries do not sum to 1");
}

ImageTensor BlurKernel::to_grid() const {
    ImageTensor g(size, size, 1);
    g.data = data;
    return g;
}

BlurKernel BlurKernel::from_grid_unchecked(const ImageTensor& grid) {
    if (grid.height != grid.width || grid.channels != 1) {
        throw Error("kernel grid must be square single-channel");
    }
    return unchecked(grid.height, grid.data);
}

namespace {
void require_same_dims(const ImageTensor& a, const ImageTensor& b) {
    if (!a.same_dims(b)) throw Error("tensor dims mismatch");
}
}  // namespace

ImageTensor operator+(const ImageTensor& a, const ImageTensor& b) {
    require_same_dims(a, b);
    ImageTensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

ImageTensor operator-(const ImageTensor& a, const ImageTensor& b) {
    require_same_dims(a, b);
    ImageTensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

ImageTensor operator*(double s, const ImageTensor& a) {
    ImageTensor out = a;
    for (double& v : out.data) v *= s;
    return out;
}

void add_scaled(ImageTensor& dst, double s, const ImageTensor& v) {
    require_same_dims(dst, v);
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += s * v.data[i];
}

void scale(ImageTensor& dst, double s) {
    for (double& v : dst.data) v *= s;
}

double dot(const ImageTensor& a, const ImageTensor& b) {
    require_same_dims(a, b);
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

double squared_norm(const ImageTensor& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v * v;
    return acc;
}

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
    require_same_dims(a, b);
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

}  // namespace diffem
