#include <exception>
#include <iostream>

#include "commands.hpp"
#include "diffem/threads.hpp"

int main(int argc, char** argv) {
    CLI::App app{"diffem: blind deconvolution with diffusion EM"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--threads", global.threads, "worker threads (fallback: DIFFEM_THREADS, then hardware)");
    app.add_option("--seed", global.seed, "seed fallback for subcommands that omit --seed");
    app.add_flag("--verbose", global.verbose, "progress output on stderr");

    register_degrade(app, global);
    register_sample(app, global);
    register_estimate_kernel(app, global);
    register_train_denoiser(app, global);
    register_deblur(app, global);
    register_sweep_reg(app, global);
    register_benchmark(app, global);

    try {
        app.preparse_callback([&global](size_t) {
            if (global.threads > 0) diffem::set_thread_count(global.threads);
        });
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors exit 1, help/version exit 0
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
