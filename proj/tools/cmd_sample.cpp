#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "commands.hpp"
#include "diffem/denoiser.hpp"
#include "diffem/io.hpp"

namespace fs = std::filesystem;
using namespace diffem;

GuidanceKind parse_guidance(const std::string& name) {
    if (name == "dps") return GuidanceKind::Dps;
    if (name == "pigdm") return GuidanceKind::Pigdm;
    throw Error("guidance must be dps or pigdm");
}

int default_timesteps(GuidanceKind kind) { return kind == GuidanceKind::Dps ? 1000 : 100; }

std::shared_ptr<const KernelRegularizer> resolve_regularizer(const std::string& name,
                                                             const std::string& weights) {
    if (name == "pnp") {
        if (weights.empty()) throw Error("--reg pnp needs --weights");
        return std::make_shared<PnpRegularizer>(DenoiserNet::load(weights));
    }
    return make_regularizer(name);
}

void AlgoOptions::add_flags(CLI::App* cmd, bool with_algo) {
    if (with_algo) {
        cmd->add_option("--algo", algo, "em | fastem")->check(CLI::IsMember({"em", "fastem"}));
        cmd->add_option("--L", em_iterations, "EM iterations (em algo)");
    }
    cmd->add_option("--guidance", guidance, "dps | pigdm")->check(CLI::IsMember({"dps", "pigdm"}));
    cmd->add_option("--n", particles, "particles");
    cmd->add_option("--T", timesteps, "diffusion steps (0: 1000 dps / 100 pigdm)");
    cmd->add_option("--ksize", ksize, "kernel size (odd)");
    cmd->add_option("--init", init, "kernel init: gaussian:STD | delta | uniform");
    cmd->add_option("--reg", reg, "kernel regularizer: pnp | l1 | l2 | none");
    cmd->add_option("--weights", weights, "denoiser weights (DNW1), required for pnp");
    cmd->add_option("--prior", prior, "prior config JSON (default: built-in texture prior)");
    cmd->add_option("--lambda", lambda, "regularizer strength");
    cmd->add_option("--beta", beta, "HQS coupling");
    cmd->add_option("--iters", hqs_iters, "HQS iterations per M-step");
    auto* seed_opt = cmd->add_option("--seed", seed, "master seed");
    seed_opt->each([this](const std::string&) { seed_set = true; });
}

EmConfig AlgoOptions::build_em_config(const GlobalOptions& global) const {
    EmConfig config;
    config.iterations = em_iterations;
    config.particles = particles;
    config.kernel_size = ksize;
    config.kernel_init = init;
    config.guidance.kind = parse_guidance(guidance);
    const int T = timesteps > 0 ? timesteps : default_timesteps(config.guidance.kind);
    config.schedule = make_schedule(T, 1e-4, 0.02);
    config.mstep.iterations = hqs_iters;
    config.mstep.lambda = lambda;
    config.mstep.beta_hqs = beta;
    config.mstep.regularizer = resolve_regularizer(reg, weights);
    config.seed = seed_set ? seed : global.seed;
    return config;
}

namespace {

std::string particle_name(int index) {
    std::ostringstream name;
    name << "particle_" << std::setw(3) << std::setfill('0') << index << ".rtf1";
    return name.str();
}

void write_ensemble(const std::string& out_dir, const ParticleEnsemble& ensemble, bool png) {
    fs::create_directories(out_dir);
    for (int i = 0; i < ensemble.count(); ++i) {
        fs::path path = fs::path(out_dir) / particle_name(i);
        write_rtf1(path.string(), ensemble.particles[i]);
        if (png) write_png(path.replace_extension(".png").string(), ensemble.particles[i]);
    }
}

void write_trace(const std::string& out_dir, const std::vector<TraceEntry>& trace) {
    fs::create_directories(fs::path(out_dir) / "kernels");
    std::ofstream out(fs::path(out_dir) / "trace.txt");
    out << std::setprecision(17);
    for (const auto& entry : trace) {
        std::string kernel_path;
        if (entry.has_kernel) {
            kernel_path = "kernels/step_" + std::to_string(entry.step) + ".rtf1";
            write_kernel_rtf1((fs::path(out_dir) / kernel_path).string(), entry.kernel);
        }
        out << entry.step << "," << entry.data_fit << "," << kernel_path << "\n";
    }
}

}  // namespace

void register_sample(CLI::App& app, GlobalOptions& global) {
    auto cmd = app.add_subcommand("sample", "non-blind posterior sampling with a known kernel");
    struct Options {
        std::string y_path, kernel_path, out_dir, guidance = "pigdm", prior;
        double sigma = 5.0 / 255.0;
        int timesteps = 0, particles = 1;
        uint64_t seed = 0;
        bool seed_set = false, png = false;
    };
    auto opt = std::make_shared<Options>();
    cmd->add_option("--y", opt->y_path, "degraded observation (RTF1/PNG)")->required();
    cmd->add_option("--kernel", opt->kernel_path, "blur kernel (RTF1)")->required();
    cmd->add_option("--sigma", opt->sigma, "noise std");
    cmd->add_option("--guidance", opt->guidance, "dps | pigdm")
        ->check(CLI::IsMember({"dps", "pigdm"}));
    cmd->add_option("--T", opt->timesteps, "diffusion steps (0: per-guidance default)");
    cmd->add_option("--n", opt->particles, "particles");
    cmd->add_option("--out", opt->out_dir, "output directory")->required();
    cmd->add_option("--prior", opt->prior, "prior config JSON");
    cmd->add_flag("--png", opt->png, "also write PNG previews");
    cmd->add_option("--seed", opt->seed, "master seed")->each([opt](const std::string&) {
        opt->seed_set = true;
    });

    cmd->callback([&global, opt] {
        const ImageTensor y = read_image(opt->y_path);
        const BlurKernel kernel = read_kernel_rtf1(opt->kernel_path);
        LoadedPrior prior = opt->prior.empty()
                                ? make_texture_prior(y.height, y.width, y.channels)
                                : load_prior(opt->prior);
        GuidanceConfig guidance;
        guidance.kind = parse_guidance(opt->guidance);
        const int T = opt->timesteps > 0 ? opt->timesteps : default_timesteps(guidance.kind);
        DiffusionSchedule schedule = make_schedule(T, 1e-4, 0.02);
        const uint64_t seed = opt->seed_set ? opt->seed : global.seed;
        ParticleEnsemble ensemble = sample_nonblind(y, opt->sigma, kernel, opt->particles,
                                                    schedule, guidance, *prior.model, seed);
        write_ensemble(opt->out_dir, ensemble, opt->png);
        if (global.verbose) std::cerr << "wrote " << ensemble.count() << " particles\n";
        std::cout << opt->out_dir << "\n";
    });
}

void register_deblur(CLI::App& app, GlobalOptions& global) {
    auto cmd = app.add_subcommand("deblur", "blind deconvolution via diffusion EM or fast diffusion EM");
    struct Options {
        std::string y_path, out_dir;
        double sigma = 5.0 / 255.0;
        int trace_stride = 10;
        bool png = false;
    };
    auto opt = std::make_shared<Options>();
    auto algo = std::make_shared<AlgoOptions>();
    cmd->add_option("--y", opt->y_path, "degraded observation (RTF1/PNG)")->required();
    cmd->add_option("--sigma", opt->sigma, "noise std");
    cmd->add_option("--out", opt->out_dir, "output directory")->required();
    cmd->add_option("--trace-stride", opt->trace_stride, "kernel snapshot stride in the trace");
    cmd->add_flag("--png", opt->png, "also write PNG previews");
    algo->add_flags(cmd, true);

    cmd->callback([&global, opt, algo] {
        const ImageTensor y = read_image(opt->y_path);
        LoadedPrior prior = algo->prior.empty()
                                ? make_texture_prior(y.height, y.width, y.channels)
                                : load_prior(algo->prior);
        EmConfig config = algo->build_em_config(global);
        config.trace_stride = opt->trace_stride;
        EmResult result = algo->fast() ? fast_diffusion_em(y, opt->sigma, config, *prior.model)
                                       : diffusion_em(y, opt->sigma, config, *prior.model);
        write_ensemble(opt->out_dir, result.particles, opt->png);
        write_rtf1((fs::path(opt->out_dir) / "average.rtf1").string(), result.particles.average());
        write_kernel_rtf1((fs::path(opt->out_dir) / "kernel.rtf1").string(), result.kernel);
        write_trace(opt->out_dir, result.trace);
        if (global.verbose) {
            std::cerr << "deblurred with " << algo->algo << "/" << algo->guidance << ", n="
                      << algo->particles << "\n";
        }
        std::cout << opt->out_dir << "\n";
    });
}
