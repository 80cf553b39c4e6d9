#include <iostream>
#include <memory>

#include "commands.hpp"
#include "diffem/denoiser.hpp"
#include "diffem/synth.hpp"

using namespace diffem;

void register_degrade(CLI::App& app, GlobalOptions& global) {
    auto cmd = app.add_subcommand("degrade", "synthesize blurred/noisy observations from a directory of images");
    auto config = std::make_shared<DegradationConfig>();
    auto input = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto seed = std::make_shared<uint64_t>(0);
    auto seed_opt = cmd->add_option("--seed", *seed, "master seed");
    cmd->add_option("--input", *input, "directory of RTF1 or PNG images")->required();
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->add_option("--sigma", config->sigma, "noise std in [0,1] units");
    cmd->add_option("--ksize", config->kernel_size, "motion kernel size (odd)");
    cmd->add_option("--steps", config->trajectory_steps, "trajectory steps");
    cmd->add_option("--step-std", config->step_std, "trajectory step std (px)");
    cmd->add_option("--inertia", config->inertia, "trajectory velocity inertia");

    cmd->callback([&global, config, input, out, seed, seed_opt] {
        config->rng_seed = seed_opt->count() ? *seed : global.seed;
        DatasetManifest manifest = make_dataset(*input, *out, *config);
        int failed = 0;
        for (const auto& item : manifest.items) {
            if (!item.ok()) ++failed;
        }
        if (global.verbose) {
            std::cerr << "degraded " << manifest.items.size() - failed << " images, " << failed
                      << " failures\n";
        }
        std::cout << *out << "/manifest.txt\n";
    });
}

void register_train_denoiser(CLI::App& app, GlobalOptions& global) {
    auto cmd = app.add_subcommand("train-denoiser", "train the PnP kernel denoiser on synthetic motion kernels");
    auto out = std::make_shared<std::string>();
    auto config = std::make_shared<TrainConfig>();
    auto arch = std::make_shared<DenoiserConfig>();
    auto seed = std::make_shared<uint64_t>(0);
    auto seed_opt = cmd->add_option("--seed", *seed, "training seed");
    cmd->add_option("--out", *out, "weight file path (DNW1)")->required();
    cmd->add_option("--steps", config->steps, "SGD steps");
    cmd->add_option("--batch", config->batch, "batch size");
    cmd->add_option("--lr", config->learning_rate, "learning rate");
    cmd->add_option("--sigma-lo", config->sigma_lo, "lowest training noise level");
    cmd->add_option("--sigma-hi", config->sigma_hi, "highest training noise level");
    cmd->add_option("--blocks", arch->blocks, "conv blocks");
    cmd->add_option("--channels", arch->channels, "feature channels");

    cmd->callback([&global, out, config, arch, seed, seed_opt] {
        config->seed = seed_opt->count() ? *seed : global.seed;
        Rng init_rng(Rng::derive(config->seed, 0x696e6974ULL));
        DenoiserNet net = DenoiserNet::random_init(*arch, init_rng);
        TrainReport report = train_denoiser(net, *config);
        net.save(*out);
        if (global.verbose) {
            std::cerr << "probe loss " << report.probe_loss_initial << " -> "
                      << report.probe_loss_final << "\n";
        }
        std::cout << *out << "\n";
    });
}
