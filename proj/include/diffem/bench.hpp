#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "diffem/em.hpp"
#include "diffem/mstep.hpp"
#include "diffem/synth.hpp"

namespace diffem {

struct ItemMetrics {
    std::string id;
    double psnr_db = 0.0;      // first particle vs clean
    double psnr_sa_db = 0.0;   // particle average vs clean
    double kernel_mse = 0.0;
    double reblur = 0.0;       // mean over particles
    double runtime_sec = 0.0;  // only populated when timing is enabled
    bool ok = true;
    std::string error;
};

struct MetricsReport {
    std::vector<ItemMetrics> items;
    double mean_psnr_db = 0.0;
    double mean_psnr_sa_db = 0.0;
    double mean_kernel_mse = 0.0;
    double mean_reblur = 0.0;
    int failed = 0;

    void finalize();  // recomputes aggregates over ok items
};

/// JSONL: one record per item plus a trailing aggregate record. Timings are
/// included only when with_timing is set, keeping default reports
/// byte-reproducible under a fixed seed.
void write_report_jsonl(const std::string& path, const MetricsReport& report, bool with_timing);
MetricsReport read_report_jsonl(const std::string& path);
std::string format_report_table(const MetricsReport& report, bool with_timing);

enum class EmAlgo { Em, FastEm };

struct BenchConfig {
    EmAlgo algo = EmAlgo::FastEm;
    EmConfig em;                 // schedule/guidance/mstep/particles template
    std::string prior_path;      // empty: built-in texture prior per item
    bool timing = false;
};

/// Runs the configured algorithm on every manifest item and computes all
/// metrics. Per-item failures are recorded and the run continues.
MetricsReport benchmark(const DatasetManifest& manifest, const std::string& manifest_dir,
                        const BenchConfig& config);

struct SweepCell {
    double sigma = 0.0;
    std::string reg;
    double mean_kernel_mse = 0.0;
    int items = 0;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    double cell(double sigma, const std::string& reg) const;
};

/// Non-blind kernel-estimation sweep: for each (sigma, regularizer) the true
/// sharp image is the single sample and HQS re-estimates the kernel from a
/// freshly degraded observation; reports mean kernel MSE per cell.
SweepResult regularizer_sweep(const DatasetManifest& manifest, const std::string& manifest_dir,
                              const std::vector<double>& sigmas,
                              const std::vector<std::shared_ptr<const KernelRegularizer>>& regs,
                              const MStepConfig& base_config, uint64_t seed);

std::string format_sweep_table(const SweepResult& sweep);
std::string format_sweep_csv(const SweepResult& sweep);

}  // namespace diffem
