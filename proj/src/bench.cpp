#include "diffem/bench.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "diffem/io.hpp"
#include "diffem/metrics.hpp"
#include "diffem/prior_config.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace diffem {

void MetricsReport::finalize() {
    mean_psnr_db = mean_psnr_sa_db = mean_kernel_mse = mean_reblur = 0.0;
    failed = 0;
    int ok_count = 0;
    for (const auto& item : items) {
        if (!item.ok) {
            ++failed;
            continue;
        }
        ++ok_count;
        mean_psnr_db += item.psnr_db;
        mean_psnr_sa_db += item.psnr_sa_db;
        mean_kernel_mse += item.kernel_mse;
        mean_reblur += item.reblur;
    }
    if (ok_count > 0) {
        mean_psnr_db /= ok_count;
        mean_psnr_sa_db /= ok_count;
        mean_kernel_mse /= ok_count;
        mean_reblur /= ok_count;
    }
}

void write_report_jsonl(const std::string& path, const MetricsReport& report, bool with_timing) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& item : report.items) {
        json record{{"id", item.id}, {"ok", item.ok}};
        if (item.ok) {
            record["psnr_db"] = item.psnr_db;
            record["psnr_sa_db"] = item.psnr_sa_db;
            record["kernel_mse"] = item.kernel_mse;
            record["reblur"] = item.reblur;
            if (with_timing) record["runtime_sec"] = item.runtime_sec;
        } else {
            record["error"] = item.error;
        }
        out << record.dump() << "\n";
    }
    json aggregate{{"aggregate", true},
                   {"items", report.items.size()},
                   {"failed", report.failed},
                   {"mean_psnr_db", report.mean_psnr_db},
                   {"mean_psnr_sa_db", report.mean_psnr_sa_db},
                   {"mean_kernel_mse", report.mean_kernel_mse},
                   {"mean_reblur", report.mean_reblur}};
    out << aggregate.dump() << "\n";
    if (!out) throw Error("write failed: " + path);
}

MetricsReport read_report_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    MetricsReport report;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json record = json::parse(line);
        if (record.value("aggregate", false)) continue;
        ItemMetrics item;
        item.id = record.at("id").get<std::string>();
        item.ok = record.at("ok").get<bool>();
        if (item.ok) {
            item.psnr_db = record.at("psnr_db").get<double>();
            item.psnr_sa_db = record.at("psnr_sa_db").get<double>();
            item.kernel_mse = record.at("kernel_mse").get<double>();
            item.reblur = record.at("reblur").get<double>();
            item.runtime_sec = record.value("runtime_sec", 0.0);
        } else {
            item.error = record.value("error", "");
        }
        report.items.push_back(std::move(item));
    }
    report.finalize();
    return report;
}

std::string format_report_table(const MetricsReport& report, bool with_timing) {
    std::ostringstream out;
    out << std::left << std::setw(24) << "item" << std::right << std::setw(10) << "PSNR"
        << std::setw(10) << "PSNR-SA" << std::setw(14) << "kernelMSE" << std::setw(14) << "reblur";
    if (with_timing) out << std::setw(10) << "sec";
    out << "\n";
    for (const auto& item : report.items) {
        out << std::left << std::setw(24) << item.id << std::right;
        if (item.ok) {
            out << std::setw(10) << std::fixed << std::setprecision(2) << item.psnr_db
                << std::setw(10) << item.psnr_sa_db << std::setw(14) << std::scientific
                << std::setprecision(3) << item.kernel_mse << std::setw(14) << item.reblur;
            if (with_timing) {
                out << std::setw(10) << std::fixed << std::setprecision(2) << item.runtime_sec;
            }
            out << "\n";
        } else {
            out << "  FAILED: " << item.error << "\n";
        }
        out.unsetf(std::ios::floatfield);
    }
    out << "mean PSNR " << std::fixed << std::setprecision(2) << report.mean_psnr_db
        << " dB, mean PSNR-SA " << report.mean_psnr_sa_db << " dB, mean kernel MSE "
        << std::scientific << std::setprecision(3) << report.mean_kernel_mse << ", mean reblur "
        << report.mean_reblur << ", failed " << report.failed << "/" << report.items.size()
        << "\n";
    return out.str();
}

MetricsReport benchmark(const DatasetManifest& manifest, const std::string& manifest_dir,
                        const BenchConfig& config) {
    MetricsReport report;
    for (const auto& entry : manifest.items) {
        ItemMetrics item;
        item.id = fs::path(entry.clean).stem().string();
        if (!entry.ok()) {
            item.ok = false;
            item.error = "dataset item failed: " + entry.error;
            report.items.push_back(std::move(item));
            continue;
        }
        try {
            const auto started = std::chrono::steady_clock::now();
            const ImageTensor clean = read_image((fs::path(manifest_dir) / entry.clean).string());
            const BlurKernel truth =
                read_kernel_rtf1((fs::path(manifest_dir) / entry.kernel).string());
            const ImageTensor y = read_image((fs::path(manifest_dir) / entry.degraded).string());

            EmConfig em = config.em;
            em.seed = Rng::derive(config.em.seed, std::hash<std::string>{}(item.id));
            LoadedPrior prior = config.prior_path.empty()
                                    ? make_texture_prior(y.height, y.width, y.channels)
                                    : load_prior(config.prior_path);
            const EmResult result = config.algo == EmAlgo::FastEm
                                        ? fast_diffusion_em(y, entry.sigma, em, *prior.model)
                                        : diffusion_em(y, entry.sigma, em, *prior.model);

            item.psnr_db = psnr(result.particles.particles.front(), clean);
            item.psnr_sa_db = psnr(result.particles.average(), clean);
            item.kernel_mse = kernel_mse(result.kernel, truth);
            double reblur_mean = 0.0;
            for (const auto& particle : result.particles.particles) {
                reblur_mean += reblur_loss(y, particle, result.kernel, entry.sigma);
            }
            item.reblur = reblur_mean / result.particles.count();
            if (config.timing) {
                item.runtime_sec =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                        .count();
            }
        } catch (const std::exception& e) {
            item.ok = false;
            item.error = e.what();
        }
        report.items.push_back(std::move(item));
    }
    report.finalize();
    return report;
}

double SweepResult::cell(double sigma, const std::string& reg) const {
    for (const auto& c : cells) {
        if (c.reg == reg && std::abs(c.sigma - sigma) < 1e-12) return c.mean_kernel_mse;
    }
    throw Error("sweep cell not found");
}

SweepResult regularizer_sweep(const DatasetManifest& manifest, const std::string& manifest_dir,
                              const std::vector<double>& sigmas,
                              const std::vector<std::shared_ptr<const KernelRegularizer>>& regs,
                              const MStepConfig& base_config, uint64_t seed) {
    SweepResult result;
    for (double sigma : sigmas) {
        if (!(sigma >= 0.0)) throw Error("sweep sigma must be >= 0");
        for (const auto& reg : regs) {
            SweepCell cell;
            cell.sigma = sigma;
            cell.reg = reg->name();
            double total = 0.0;
            for (size_t idx = 0; idx < manifest.items.size(); ++idx) {
                const auto& entry = manifest.items[idx];
                if (!entry.ok()) continue;
                const ImageTensor clean =
                    read_image((fs::path(manifest_dir) / entry.clean).string());
                const BlurKernel truth =
                    read_kernel_rtf1((fs::path(manifest_dir) / entry.kernel).string());
                // Re-degrade at the requested noise level; the same stream per
                // (item, sigma index) keeps the sweep reproducible.
                Rng rng(Rng::derive(seed, idx, static_cast<uint64_t>(sigma * 1e9)));
                const double sigma_solve = std::max(sigma, 1e-6);  // solver needs sigma > 0
                const ImageTensor y = degrade(clean, truth, sigma, rng);

                MStepConfig cfg = base_config;
                cfg.regularizer = reg;
                const BlurKernel estimate =
                    hqs_mstep(y, {clean}, sigma_solve, cfg, BlurKernel::delta(truth.size));
                total += kernel_mse(estimate, truth);
                ++cell.items;
            }
            if (cell.items > 0) cell.mean_kernel_mse = total / cell.items;
            result.cells.push_back(cell);
        }
    }
    return result;
}

std::string format_sweep_table(const SweepResult& sweep) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "sigma" << std::setw(8) << "reg" << std::right
        << std::setw(16) << "mean kernel MSE" << std::setw(8) << "items" << "\n";
    for (const auto& cell : sweep.cells) {
        out << std::left << std::setw(12) << cell.sigma << std::setw(8) << cell.reg << std::right
            << std::setw(16) << std::scientific << std::setprecision(4) << cell.mean_kernel_mse
            << std::setw(8) << cell.items << "\n";
        out.unsetf(std::ios::floatfield);
    }
    return out.str();
}

std::string format_sweep_csv(const SweepResult& sweep) {
    std::ostringstream out;
    out << "sigma,reg,mean_kernel_mse,items\n";
    for (const auto& cell : sweep.cells) {
        out << cell.sigma << "," << cell.reg << "," << std::scientific << std::setprecision(9)
            << cell.mean_kernel_mse << "," << cell.items << "\n";
        out.unsetf(std::ios::floatfield);
    }
    return out.str();
}

}  // namespace diffem
