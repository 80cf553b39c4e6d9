#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <memory>
#include <string>

#include "diffem/em.hpp"
#include "diffem/mstep.hpp"
#include "diffem/prior_config.hpp"

struct GlobalOptions {
    int threads = 0;       // 0: DIFFEM_THREADS env, then hardware
    uint64_t seed = 0;     // fallback when a subcommand seed is not given
    bool verbose = false;
};

// Shared flag bundle for the EM-driving subcommands (deblur, benchmark).
struct AlgoOptions {
    std::string algo = "fastem";
    std::string guidance = "pigdm";
    int particles = 1;
    int em_iterations = 10;
    int timesteps = 0;  // 0: 1000 for dps, 100 for pigdm
    int ksize = 11;
    std::string init = "gaussian:auto";
    std::string reg = "l2";
    std::string weights;
    std::string prior;
    double lambda = 1.0;
    double beta = 1e5;
    int hqs_iters = 10;
    uint64_t seed = 0;
    bool seed_set = false;

    void add_flags(CLI::App* cmd, bool with_algo);
    diffem::EmConfig build_em_config(const GlobalOptions& global) const;
    bool fast() const { return algo == "fastem"; }
};

diffem::GuidanceKind parse_guidance(const std::string& name);
std::shared_ptr<const diffem::KernelRegularizer> resolve_regularizer(const std::string& name,
                                                                     const std::string& weights);
int default_timesteps(diffem::GuidanceKind kind);

void register_degrade(CLI::App& app, GlobalOptions& global);
void register_sample(CLI::App& app, GlobalOptions& global);
void register_estimate_kernel(CLI::App& app, GlobalOptions& global);
void register_train_denoiser(CLI::App& app, GlobalOptions& global);
void register_deblur(CLI::App& app, GlobalOptions& global);
void register_sweep_reg(CLI::App& app, GlobalOptions& global);
void register_benchmark(CLI::App& app, GlobalOptions& global);
