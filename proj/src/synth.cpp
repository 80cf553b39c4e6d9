#include "diffem/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "diffem/fft.hpp"
#include "diffem/io.hpp"
#include "diffem/simplex.hpp"

namespace fs = std::filesystem;

namespace diffem {

void DegradationConfig::validate() const {
    if (sigma < 0.0) throw Error("sigma must be >= 0");
    if (kernel_size < 3 || kernel_size % 2 == 0) throw Error("kernel_size must be odd and >= 3");
    if (trajectory_steps < 0) throw Error("trajectory_steps must be >= 0");
    if (step_std < 0.0 || inertia < 0.0 || inertia >= 1.0) {
        throw Error("trajectory params out of range");
    }
}

namespace {

void splat_bilinear(std::vector<double>& grid, int k, double py, double px) {
    const int y0 = static_cast<int>(std::floor(py));
    const int x0 = static_cast<int>(std::floor(px));
    const double fy = py - y0;
    const double fx = px - x0;
    for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
            const int y = y0 + dy, x = x0 + dx;
            if (y < 0 || y >= k || x < 0 || x >= k) continue;
            const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
            grid[static_cast<size_t>(y) * k + x] += wgt;
        }
    }
}

// Small truncated gaussian smoothing (std 0.5 px, radius 2) applied on the
// compact kernel grid with zero boundary; mass is restored by the simplex
// projection that follows.
std::vector<double> smooth_half_px(const std::vector<double>& grid, int k) {
    double taps[5];
    double sum = 0.0;
    for (int i = -2; i <= 2; ++i) {
        taps[i + 2] = std::exp(-0.5 * i * i / 0.25);
        sum += taps[i + 2];
    }
    for (double& t : taps) t /= sum;
    std::vector<double> tmp(grid.size(), 0.0), out(grid.size(), 0.0);
    for (int y = 0; y < k; ++y) {
        for (int x = 0; x < k; ++x) {
            double acc = 0.0;
            for (int i = -2; i <= 2; ++i) {
                const int xx = x + i;
                if (xx >= 0 && xx < k) acc += taps[i + 2] * grid[static_cast<size_t>(y) * k + xx];
            }
            tmp[static_cast<size_t>(y) * k + x] = acc;
        }
    }
    for (int y = 0; y < k; ++y) {
        for (int x = 0; x < k; ++x) {
            double acc = 0.0;
            for (int i = -2; i <= 2; ++i) {
                const int yy = y + i;
                if (yy >= 0 && yy < k) acc += taps[i + 2] * tmp[static_cast<size_t>(yy) * k + x];
            }
            out[static_cast<size_t>(y) * k + x] = acc;
        }
    }
    return out;
}

}  // namespace

BlurKernel sample_motion_kernel(const DegradationConfig& config, Rng& rng) {
    config.validate();
    const int k = config.kernel_size;
    std::vector<double> grid(static_cast<size_t>(k) * k, 0.0);

    const double lo = 0.0, hi = static_cast<double>(k - 1);
    double py = hi / 2.0, px = hi / 2.0;
    double vy = 0.0, vx = 0.0;
    splat_bilinear(grid, k, py, px);
    for (int s = 0; s < config.trajectory_steps; ++s) {
        vy = config.inertia * vy + config.step_std * rng.gaussian();
        vx = config.inertia * vx + config.step_std * rng.gaussian();
        py += vy;
        px += vx;
        // Reflect at the window walls so the support stays inside k x k.
        if (py < lo) { py = lo + (lo - py); vy = -vy; }
        if (py > hi) { py = hi - (py - hi); vy = -vy; }
        if (px < lo) { px = lo + (lo - px); vx = -vx; }
        if (px > hi) { px = hi - (px - hi); vx = -vx; }
        py = std::clamp(py, lo, hi);
        px = std::clamp(px, lo, hi);
        splat_bilinear(grid, k, py, px);
    }

    if (config.smooth && config.trajectory_steps > 0) grid = smooth_half_px(grid, k);

    double sum = 0.0;
    for (double v : grid) sum += v;
    if (sum <= 0.0) return BlurKernel::delta(k);
    for (double& v : grid) v /= sum;
    project_simplex_inplace(grid);
    return BlurKernel::create(k, std::move(grid));
}

ImageTensor degrade(const ImageTensor& x, const BlurKernel& kernel, double sigma, Rng& rng) {
    if (sigma < 0.0) throw Error("sigma must be >= 0");
    ImageTensor y = circular_convolve(x, kernel);
    if (sigma > 0.0) {
        for (double& v : y.data) v += sigma * rng.gaussian();
    }
    return y;
}

namespace {
bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".png" || ext == ".rtf1";
}
}  // namespace

DatasetManifest make_dataset(const std::string& images_dir, const std::string& out_dir,
                             const DegradationConfig& config) {
    config.validate();
    if (!fs::is_directory(images_dir)) throw Error("not a directory: " + images_dir);
    fs::create_directories(out_dir);

    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end());

    DatasetManifest manifest;
    for (size_t idx = 0; idx < inputs.size(); ++idx) {
        DatasetItem item;
        item.sigma = config.sigma;
        item.seed = Rng::derive(config.rng_seed, idx);
        const std::string stem = inputs[idx].stem().string();
        try {
            ImageTensor clean = read_image(inputs[idx].string());
            Rng rng(item.seed);
            BlurKernel kernel = sample_motion_kernel(config, rng);
            ImageTensor degraded = degrade(clean, kernel, config.sigma, rng);

            item.clean = stem + "_clean.rtf1";
            item.kernel = stem + "_kernel.rtf1";
            item.degraded = stem + "_degraded.rtf1";
            write_rtf1((fs::path(out_dir) / item.clean).string(), clean);
            write_kernel_rtf1((fs::path(out_dir) / item.kernel).string(), kernel);
            write_rtf1((fs::path(out_dir) / item.degraded).string(), degraded);
        } catch (const std::exception& e) {
            item.error = std::string(e.what());
            item.clean = inputs[idx].filename().string();
        }
        manifest.items.push_back(std::move(item));
    }
    write_manifest((fs::path(out_dir) / "manifest.txt").string(), manifest);
    return manifest;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& item : manifest.items) {
        if (item.ok()) {
            out << item.clean << "," << item.kernel << "," << item.degraded << "," << item.sigma
                << "," << item.seed << "\n";
        } else {
            out << "error:" << item.clean << ":" << item.error << "\n";
        }
    }
    if (!out) throw Error("write failed: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    DatasetManifest manifest;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        DatasetItem item;
        if (line.rfind("error:", 0) == 0) {
            const auto second = line.find(':', 6);
            item.clean = line.substr(6, second == std::string::npos ? std::string::npos : second - 6);
            item.error = second == std::string::npos ? "unknown" : line.substr(second + 1);
        } else {
            std::stringstream ss(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(ss, field, ',')) fields.push_back(field);
            if (fields.size() != 5) throw Error("bad manifest line: " + line);
            item.clean = fields[0];
            item.kernel = fields[1];
            item.degraded = fields[2];
            item.sigma = std::stod(fields[3]);
            item.seed = std::stoull(fields[4]);
        }
        manifest.items.push_back(std::move(item));
    }
    return manifest;
}

}  // namespace diffem
