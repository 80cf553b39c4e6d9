#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffem/rng.hpp"
#include "diffem/tensor.hpp"

namespace diffem {

/// Parameters for the forward model y = Hx + n and for the random camera
/// trajectory the motion kernels are rasterized from.
struct DegradationConfig {
    double sigma = 5.0 / 255.0;  // noise std, [0,1] intensity units
    int kernel_size = 11;        // odd, >= 3 for motion kernels
    uint64_t rng_seed = 0;

    // Trajectory: AR(1) velocity v' = inertia * v + eta, eta ~ N(0, step_std^2).
    int trajectory_steps = 96;
    double step_std = 0.35;
    double inertia = 0.92;
    bool smooth = true;  // 0.5 px gaussian over the rasterized track

    void validate() const;
};

/// Simulates a 2-D random camera trajectory with inertia, rasterizes it with
/// bilinear splatting onto the k x k grid, optionally smooths, and projects
/// to the simplex. trajectory_steps == 0 yields the delta kernel.
BlurKernel sample_motion_kernel(const DegradationConfig& config, Rng& rng);

/// y = circular_convolve(x, H) + sigma * g with g i.i.d. standard normal.
/// Unclipped: y may leave [0,1].
ImageTensor degrade(const ImageTensor& x, const BlurKernel& kernel, double sigma, Rng& rng);

struct DatasetItem {
    std::string clean;     // paths relative to the manifest directory
    std::string kernel;
    std::string degraded;
    double sigma = 0.0;
    uint64_t seed = 0;
    std::string error;     // non-empty when this item failed
    bool ok() const { return error.empty(); }
};

struct DatasetManifest {
    std::vector<DatasetItem> items;
};

/// Degrades every RTF1/PNG image found in images_dir (sorted by filename)
/// into out_dir and writes out_dir/manifest.txt. Unreadable inputs are
/// recorded as error items; the run continues.
DatasetManifest make_dataset(const std::string& images_dir, const std::string& out_dir,
                             const DegradationConfig& config);

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

}  // namespace diffem
