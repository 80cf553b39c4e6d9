#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "diffem/bench.hpp"
#include "diffem/denoiser.hpp"
#include "diffem/em.hpp"
#include "diffem/fft.hpp"
#include "diffem/metrics.hpp"
#include "diffem/prior_config.hpp"
#include "diffem/simplex.hpp"
#include "diffem/synth.hpp"

namespace py = pybind11;
using namespace diffem;

namespace {

ImageTensor image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() == 2) {
        ImageTensor img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)), 1);
        std::memcpy(img.data.data(), arr.data(), sizeof(double) * img.size());
        return img;
    }
    if (arr.ndim() == 3) {
        ImageTensor img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                        static_cast<int>(arr.shape(2)));
        std::memcpy(img.data.data(), arr.data(), sizeof(double) * img.size());
        return img;
    }
    throw Error("expected a (H, W) or (H, W, C) array");
}

py::array_t<double> image_to_array(const ImageTensor& img) {
    py::array_t<double> arr({img.height, img.width, img.channels});
    std::memcpy(arr.mutable_data(), img.data.data(), sizeof(double) * img.size());
    return arr;
}

BlurKernel kernel_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2 || arr.shape(0) != arr.shape(1)) throw Error("kernel must be square 2-D");
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return BlurKernel::create(static_cast<int>(arr.shape(0)), std::move(data));
}

py::array_t<double> kernel_to_array(const BlurKernel& kernel) {
    py::array_t<double> arr({kernel.size, kernel.size});
    std::memcpy(arr.mutable_data(), kernel.data.data(), sizeof(double) * kernel.data.size());
    return arr;
}

GuidanceConfig guidance_from_name(const std::string& name) {
    GuidanceConfig config;
    if (name == "dps") config.kind = GuidanceKind::Dps;
    else if (name == "pigdm") config.kind = GuidanceKind::Pigdm;
    else if (name == "exact") config.kind = GuidanceKind::ExactGaussian;
    else throw Error("guidance must be dps, pigdm or exact");
    return config;
}

MStepConfig mstep_from_args(int iters, double lambda, double beta, const std::string& reg,
                            const std::string& weights, bool simplex) {
    MStepConfig config;
    config.iterations = iters;
    config.lambda = lambda;
    config.beta_hqs = beta;
    config.simplex_projection = simplex;
    if (reg == "pnp") {
        if (weights.empty()) throw Error("pnp regularizer needs a weights path");
        config.regularizer = std::make_shared<PnpRegularizer>(DenoiserNet::load(weights));
    } else {
        config.regularizer = make_regularizer(reg);
    }
    return config;
}

py::dict em_result_to_dict(const EmResult& result) {
    py::list particles;
    for (const auto& p : result.particles.particles) particles.append(image_to_array(p));
    py::list trace;
    for (const auto& entry : result.trace) {
        trace.append(py::make_tuple(entry.step, entry.data_fit));
    }
    py::dict out;
    out["particles"] = particles;
    out["kernel"] = kernel_to_array(result.kernel);
    out["trace"] = trace;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Blind deconvolution with diffusion EM: core operations";

    py::register_exception<Error>(m, "DiffemError");

    py::class_<DiffusionSchedule>(m, "DiffusionSchedule")
        .def_readonly("T", &DiffusionSchedule::T)
        .def_readonly("beta", &DiffusionSchedule::beta)
        .def_readonly("alpha_bar", &DiffusionSchedule::alpha_bar)
        .def_readonly("sigma_tilde", &DiffusionSchedule::sigma_tilde)
        .def_readonly("zeta", &DiffusionSchedule::zeta)
        .def_readonly("r", &DiffusionSchedule::r);

    m.def(
        "make_schedule",
        [](int T, double beta_min, double beta_max, const std::string& zeta) {
            return make_schedule(T, beta_min, beta_max, SigmaTildeKind::PosteriorVariance,
                                 zeta == "one" ? ZetaMode::One : ZetaMode::SqrtAlphaBar);
        },
        py::arg("T"), py::arg("beta_min") = 1e-4, py::arg("beta_max") = 0.02,
        py::arg("zeta") = "sqrt_alpha_bar");

    py::class_<LoadedPrior>(m, "Prior");
    m.def(
        "texture_prior",
        [](int h, int w, int c, double pixel_std) { return make_texture_prior(h, w, c, pixel_std); },
        py::arg("h"), py::arg("w"), py::arg("c") = 1, py::arg("pixel_std") = 0.12);
    m.def(
        "gaussian_prior",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& mu,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& cov_spectrum) {
            LoadedPrior prior;
            prior.gaussian = std::make_shared<StationaryGaussianPrior>(image_from_array(mu),
                                                                       image_from_array(cov_spectrum));
            prior.model = prior.gaussian;
            return prior;
        },
        py::arg("mu"), py::arg("cov_spectrum"));
    m.def(
        "prior_sample",
        [](const LoadedPrior& prior, uint64_t seed) {
            if (!prior.gaussian) throw Error("sampling needs a gaussian prior");
            Rng rng(seed);
            return image_to_array(prior.gaussian->sample(rng));
        },
        py::arg("prior"), py::arg("seed"));

    m.def(
        "project_simplex",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
            std::vector<double> data(v.data(), v.data() + v.size());
            std::vector<double> out = project_simplex(std::move(data));
            return py::array_t<double>(static_cast<py::ssize_t>(out.size()), out.data());
        },
        py::arg("v"));

    m.def(
        "circular_convolve",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& kernel) {
            return image_to_array(circular_convolve(image_from_array(image), kernel_from_array(kernel)));
        },
        py::arg("image"), py::arg("kernel"));

    m.def(
        "sample_motion_kernel",
        [](int ksize, uint64_t seed, int steps, double step_std, double inertia) {
            DegradationConfig config;
            config.kernel_size = ksize;
            config.trajectory_steps = steps;
            config.step_std = step_std;
            config.inertia = inertia;
            Rng rng(seed);
            return kernel_to_array(sample_motion_kernel(config, rng));
        },
        py::arg("ksize") = 11, py::arg("seed") = 0, py::arg("steps") = 96,
        py::arg("step_std") = 0.35, py::arg("inertia") = 0.92);

    m.def(
        "degrade",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& kernel,
           double sigma, uint64_t seed) {
            Rng rng(seed);
            return image_to_array(degrade(image_from_array(x), kernel_from_array(kernel), sigma, rng));
        },
        py::arg("x"), py::arg("kernel"), py::arg("sigma"), py::arg("seed") = 0);

    m.def(
        "sample_nonblind",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& y, double sigma,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& kernel, int n,
           const DiffusionSchedule& schedule, const std::string& guidance, const LoadedPrior& prior,
           uint64_t seed) {
            ParticleEnsemble ensemble =
                sample_nonblind(image_from_array(y), sigma, kernel_from_array(kernel), n, schedule,
                                guidance_from_name(guidance), *prior.model, seed);
            py::list out;
            for (const auto& p : ensemble.particles) out.append(image_to_array(p));
            return out;
        },
        py::arg("y"), py::arg("sigma"), py::arg("kernel"), py::arg("n"), py::arg("schedule"),
        py::arg("guidance"), py::arg("prior"), py::arg("seed") = 0);

    m.def(
        "fourier_data_solve",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
           const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& samples,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& coupling,
           double sigma, double beta, double r_t) {
            std::vector<ImageTensor> imgs;
            for (const auto& s : samples) imgs.push_back(image_from_array(s));
            ImageTensor z = fast_solve_pigdm(image_from_array(y), imgs, kernel_from_array(coupling),
                                             sigma, beta, r_t);
            py::array_t<double> out({z.height, z.width});
            std::memcpy(out.mutable_data(), z.data.data(), sizeof(double) * z.size());
            return out;
        },
        py::arg("y"), py::arg("samples"), py::arg("coupling"), py::arg("sigma"), py::arg("beta"),
        py::arg("r_t") = 0.0);

    m.def(
        "hqs_mstep",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
           const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& samples,
           double sigma,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& kernel_init,
           int iters, double lambda, double beta, const std::string& reg,
           const std::string& weights, bool simplex, double r_t) {
            std::vector<ImageTensor> imgs;
            for (const auto& s : samples) imgs.push_back(image_from_array(s));
            MStepConfig config = mstep_from_args(iters, lambda, beta, reg, weights, simplex);
            return kernel_to_array(hqs_mstep(image_from_array(y), imgs, sigma, config,
                                             kernel_from_array(kernel_init), r_t));
        },
        py::arg("y"), py::arg("samples"), py::arg("sigma"), py::arg("kernel_init"),
        py::arg("iters") = 10, py::arg("lambda_") = 1.0, py::arg("beta") = 1e5,
        py::arg("reg") = "l2", py::arg("weights") = "", py::arg("simplex") = true,
        py::arg("r_t") = 0.0);

    m.def(
        "init_kernel",
        [](const std::string& spec, int ksize) { return kernel_to_array(init_kernel(spec, ksize)); },
        py::arg("spec"), py::arg("ksize"));

    auto run_em = [](const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
                     double sigma, const LoadedPrior& prior, bool fast, const std::string& guidance,
                     int n, int L, int T, int ksize, const std::string& init,
                     const std::string& reg, const std::string& weights, double lambda, double beta,
                     int hqs_iters, uint64_t seed) {
        EmConfig config;
        config.iterations = L;
        config.particles = n;
        config.kernel_size = ksize;
        config.kernel_init = init;
        config.guidance = guidance_from_name(guidance);
        config.schedule = make_schedule(T, 1e-4, 0.02);
        config.mstep = mstep_from_args(hqs_iters, lambda, beta, reg, weights, true);
        config.seed = seed;
        const ImageTensor img = image_from_array(y);
        return em_result_to_dict(fast ? fast_diffusion_em(img, sigma, config, *prior.model)
                                      : diffusion_em(img, sigma, config, *prior.model));
    };
    m.def(
        "fast_diffusion_em",
        [run_em](const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
                 double sigma, const LoadedPrior& prior, const std::string& guidance, int n, int T,
                 int ksize, const std::string& init, const std::string& reg,
                 const std::string& weights, double lambda, double beta, int hqs_iters,
                 uint64_t seed) {
            return run_em(y, sigma, prior, true, guidance, n, 1, T, ksize, init, reg, weights,
                          lambda, beta, hqs_iters, seed);
        },
        py::arg("y"), py::arg("sigma"), py::arg("prior"), py::arg("guidance") = "pigdm",
        py::arg("n") = 1, py::arg("T") = 100, py::arg("ksize") = 11,
        py::arg("init") = "gaussian:auto", py::arg("reg") = "l2", py::arg("weights") = "",
        py::arg("lambda_") = 1.0, py::arg("beta") = 1e5, py::arg("hqs_iters") = 10,
        py::arg("seed") = 0);
    m.def(
        "diffusion_em",
        [run_em](const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
                 double sigma, const LoadedPrior& prior, const std::string& guidance, int n, int L,
                 int T, int ksize, const std::string& init, const std::string& reg,
                 const std::string& weights, double lambda, double beta, int hqs_iters,
                 uint64_t seed) {
            return run_em(y, sigma, prior, false, guidance, n, L, T, ksize, init, reg, weights,
                          lambda, beta, hqs_iters, seed);
        },
        py::arg("y"), py::arg("sigma"), py::arg("prior"), py::arg("guidance") = "pigdm",
        py::arg("n") = 1, py::arg("L") = 10, py::arg("T") = 100, py::arg("ksize") = 11,
        py::arg("init") = "gaussian:auto", py::arg("reg") = "l2", py::arg("weights") = "",
        py::arg("lambda_") = 1.0, py::arg("beta") = 1e5, py::arg("hqs_iters") = 10,
        py::arg("seed") = 0);

    m.def(
        "psnr",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& ref) {
            return psnr(image_from_array(x), image_from_array(ref));
        },
        py::arg("x"), py::arg("ref"));
    m.def(
        "kernel_mse",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
            return kernel_mse(kernel_from_array(a), kernel_from_array(b));
        },
        py::arg("estimate"), py::arg("reference"));
    m.def(
        "reblur_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& xhat,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& kernel,
           double sigma) {
            return reblur_loss(image_from_array(y), image_from_array(xhat),
                               kernel_from_array(kernel), sigma);
        },
        py::arg("y"), py::arg("xhat"), py::arg("kernel"), py::arg("sigma"));

    py::class_<DenoiserNet>(m, "DenoiserNet")
        .def_static("load", &DenoiserNet::load, py::arg("path"))
        .def("save", &DenoiserNet::save, py::arg("path"))
        .def(
            "denoise",
            [](const DenoiserNet& net,
               const py::array_t<double, py::array::c_style | py::array::forcecast>& noisy,
               double sigma_level) {
                ImageTensor out = net.denoise(image_from_array(noisy), sigma_level);
                py::array_t<double> arr({out.height, out.width});
                std::memcpy(arr.mutable_data(), out.data.data(), sizeof(double) * out.size());
                return arr;
            },
            py::arg("noisy"), py::arg("sigma_level"));
    m.def(
        "train_denoiser",
        [](const std::string& out_path, int steps, int batch, double lr, double sigma_lo,
           double sigma_hi, int blocks, int channels, uint64_t seed) {
            TrainConfig config;
            config.steps = steps;
            config.batch = batch;
            config.learning_rate = lr;
            config.sigma_lo = sigma_lo;
            config.sigma_hi = sigma_hi;
            config.seed = seed;
            Rng rng(Rng::derive(seed, 0x696e6974ULL));
            DenoiserNet net = DenoiserNet::random_init({blocks, channels}, rng);
            TrainReport report = train_denoiser(net, config);
            net.save(out_path);
            return py::make_tuple(report.probe_loss_initial, report.probe_loss_final);
        },
        py::arg("out_path"), py::arg("steps") = 2000, py::arg("batch") = 8, py::arg("lr") = 0.05,
        py::arg("sigma_lo") = 0.0, py::arg("sigma_hi") = 0.1, py::arg("blocks") = 5,
        py::arg("channels") = 32, py::arg("seed") = 0);
}
