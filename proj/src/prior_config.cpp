#include "diffem/prior_config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "diffem/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace diffem {

LoadedPrior make_texture_prior(int h, int w, int c, double pixel_std, double exponent,
                               double corr_freq) {
    ImageTensor mu(h, w, c, 0.5);
    ImageTensor spec(h, w, c);
    double total = 0.0;
    for (int y = 0; y < h; ++y) {
        const double fy = static_cast<double>(std::min(y, h - y)) / h;
        for (int x = 0; x < w; ++x) {
            const double fx = static_cast<double>(std::min(x, w - x)) / w;
            const double f = std::sqrt(fy * fy + fx * fx);
            const double v = std::pow(1.0 + (f / corr_freq) * (f / corr_freq), -exponent);
            for (int ch = 0; ch < c; ++ch) spec.at(y, x, ch) = v;
            total += v;
        }
    }
    // Pixel variance of a stationary field equals the mean of its spectrum.
    const double mean_spec = total / (static_cast<double>(h) * w);
    const double gain = pixel_std * pixel_std / mean_spec;
    for (double& v : spec.data) v *= gain;

    LoadedPrior out;
    out.gaussian = std::make_shared<StationaryGaussianPrior>(std::move(mu), std::move(spec));
    out.model = out.gaussian;
    return out;
}

LoadedPrior load_prior(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open prior config: " + path);
    json config;
    try {
        in >> config;
    } catch (const json::exception& e) {
        throw Error("bad prior config " + path + ": " + e.what());
    }
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&base](const std::string& p) {
        return fs::path(p).is_absolute() ? p : (base / p).string();
    };

    const std::string type = config.value("type", "");
    LoadedPrior out;
    if (type == "gaussian") {
        ImageTensor mu = read_rtf1(resolve(config.at("mu").get<std::string>()));
        ImageTensor spec = read_rtf1(resolve(config.at("cov_spectrum").get<std::string>()));
        out.gaussian = std::make_shared<StationaryGaussianPrior>(std::move(mu), std::move(spec));
        out.model = out.gaussian;
    } else if (type == "gmm") {
        const double variance = config.at("variance").get<double>();
        std::vector<double> weights = config.at("weights").get<std::vector<double>>();
        std::vector<ImageTensor> means;
        for (const auto& m : config.at("means")) {
            means.push_back(read_rtf1(resolve(m.get<std::string>())));
        }
        out.model = std::make_shared<GmmPrior>(std::move(means), variance, std::move(weights));
    } else {
        throw Error("prior config type must be \"gaussian\" or \"gmm\"");
    }
    return out;
}

}  // namespace diffem
