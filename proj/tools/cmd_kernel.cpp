#include <iostream>
#include <memory>
#include <sstream>

#include "commands.hpp"
#include "diffem/io.hpp"

using namespace diffem;

void register_estimate_kernel(CLI::App& app, GlobalOptions& global) {
    auto cmd = app.add_subcommand("estimate-kernel",
                                  "non-blind kernel estimation from known sharp image(s)");
    struct Options {
        std::string y_path, sharp_list, out_path, reg = "l2", weights, init = "delta";
        double sigma = 5.0 / 255.0, lambda = 1.0, beta = 1e5;
        int iters = 10, ksize = 11;
    };
    auto opt = std::make_shared<Options>();
    cmd->add_option("--y", opt->y_path, "degraded observation (RTF1/PNG)")->required();
    cmd->add_option("--sharp", opt->sharp_list, "sharp image path(s), comma-separated")->required();
    cmd->add_option("--sigma", opt->sigma, "noise std (> 0)");
    cmd->add_option("--reg", opt->reg, "l1 | l2 | pnp | none");
    cmd->add_option("--weights", opt->weights, "denoiser weights for pnp");
    cmd->add_option("--lambda", opt->lambda, "regularizer strength");
    cmd->add_option("--beta", opt->beta, "HQS coupling");
    cmd->add_option("--iters", opt->iters, "HQS iterations");
    cmd->add_option("--ksize", opt->ksize, "kernel size (odd)");
    cmd->add_option("--init", opt->init, "kernel init: delta | uniform | gaussian:STD");
    cmd->add_option("--out", opt->out_path, "output kernel path (RTF1)")->required();

    cmd->callback([&global, opt] {
        const ImageTensor y = read_image(opt->y_path);
        std::vector<ImageTensor> sharps;
        std::stringstream ss(opt->sharp_list);
        std::string token;
        while (std::getline(ss, token, ',')) {
            if (!token.empty()) sharps.push_back(read_image(token));
        }
        if (sharps.empty()) throw Error("--sharp needs at least one path");

        MStepConfig config;
        config.iterations = opt->iters;
        config.lambda = opt->lambda;
        config.beta_hqs = opt->beta;
        config.regularizer = resolve_regularizer(opt->reg, opt->weights);
        BlurKernel kernel =
            hqs_mstep(y, sharps, opt->sigma, config, init_kernel(opt->init, opt->ksize));
        write_kernel_rtf1(opt->out_path, kernel);
        if (global.verbose) std::cerr << "estimated " << opt->ksize << "x" << opt->ksize << " kernel\n";
        std::cout << opt->out_path << "\n";
    });
}
