#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "diffem/bench.hpp"
#include "diffem/fft.hpp"
#include "diffem/io.hpp"
#include "diffem/metrics.hpp"
#include "diffem/prior_config.hpp"
#include "oracles.hpp"

using namespace diffem;
namespace fs = std::filesystem;

TEST_CASE("psnr") {
    Rng rng(1);
    ImageTensor x = oracles::random_image(8, 8, 3, rng, 0.2);
    SUBCASE("identical images hit the 99 dB cap") { CHECK(psnr(x, x) == 99.0); }
    SUBCASE("constant offset of one half is 6.0206 dB") {
        ImageTensor shifted = x;
        for (double& v : shifted.data) v += 0.5;
        CHECK(psnr(shifted, x) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-6));
    }
    SUBCASE("random pair matches the direct formula") {
        ImageTensor other = oracles::random_image(8, 8, 3, rng, 0.3);
        double mse = 0.0;
        for (size_t i = 0; i < x.data.size(); ++i) {
            mse += (x.data[i] - other.data[i]) * (x.data[i] - other.data[i]);
        }
        mse /= static_cast<double>(x.data.size());
        CHECK(psnr(x, other) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-9));
    }
    SUBCASE("dim mismatch is an error") {
        CHECK_THROWS_AS(psnr(x, ImageTensor(4, 4, 1)), Error);
    }
}

TEST_CASE("kernel_mse") {
    Rng rng(2);
    BlurKernel a = oracles::random_simplex_kernel(5, rng);
    SUBCASE("identical kernels score zero") { CHECK(kernel_mse(a, a) == 0.0); }
    SUBCASE("circular shifts are free") {
        // Shift by one pixel with wraparound.
        BlurKernel shifted = a;
        for (int y = 0; y < 5; ++y) {
            for (int x = 0; x < 5; ++x) shifted.at(y, x) = a.at((y + 1) % 5, x);
        }
        CHECK(kernel_mse(shifted, a) < 1e-18);
    }
    SUBCASE("matches the brute-force shift search and is symmetric") {
        BlurKernel b = oracles::random_simplex_kernel(5, rng);
        double best = 1e300;
        for (int sy = 0; sy < 5; ++sy) {
            for (int sx = 0; sx < 5; ++sx) {
                double acc = 0.0;
                for (int y = 0; y < 5; ++y) {
                    for (int x = 0; x < 5; ++x) {
                        const double d = a.at((y + sy) % 5, (x + sx) % 5) - b.at(y, x);
                        acc += d * d;
                    }
                }
                best = std::min(best, acc / 25.0);
            }
        }
        CHECK(kernel_mse(a, b) == doctest::Approx(best).epsilon(1e-12));
        CHECK(kernel_mse(a, b) == doctest::Approx(kernel_mse(b, a)).epsilon(1e-12));
    }
    SUBCASE("different sizes are center-padded") {
        BlurKernel small = BlurKernel::delta(3);
        BlurKernel big = BlurKernel::delta(7);
        CHECK(kernel_mse(small, big) < 1e-18);
    }
}

TEST_CASE("reblur_loss") {
    Rng rng(3);
    ImageTensor x = oracles::random_image(16, 16, 3, rng, 0.3);
    BlurKernel kernel = oracles::random_simplex_kernel(5, rng);
    SUBCASE("exact forward model with sigma 0 scores exactly zero") {
        ImageTensor y = circular_convolve(x, kernel);
        CHECK(reblur_loss(y, x, kernel, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("the trivially consistent degenerate solution also scores zero") {
        // xhat = y, Hhat = delta: documents why this metric alone is not enough.
        ImageTensor y = circular_convolve(x, kernel);
        CHECK(std::abs(reblur_loss(y, y, BlurKernel::delta(3), 0.0)) < 1e-12);
    }
    SUBCASE("expectation over noise seeds is near zero relative to sigma^2 M") {
        const double sigma = 0.06;
        const double m = static_cast<double>(x.size());
        const ImageTensor hx = circular_convolve(x, kernel);
        double acc = 0.0;
        for (int seed = 0; seed < 200; ++seed) {
            Rng noise(Rng::derive(50, seed));
            ImageTensor y = hx;
            for (double& v : y.data) v += sigma * noise.gaussian();
            acc += reblur_loss(y, x, kernel, sigma);
        }
        acc /= 200.0;
        CHECK(std::abs(acc) / (sigma * sigma * m) < 0.05);
    }
}

TEST_CASE("report serialization round-trips") {
    MetricsReport report;
    for (int i = 0; i < 3; ++i) {
        ItemMetrics item;
        item.id = "item" + std::to_string(i);
        item.psnr_db = 20.0 + i;
        item.psnr_sa_db = 21.0 + i;
        item.kernel_mse = 1e-5 * (i + 1);
        item.reblur = -0.01 * i;
        report.items.push_back(item);
    }
    ItemMetrics broken;
    broken.id = "broken";
    broken.ok = false;
    broken.error = "could not read";
    report.items.push_back(broken);
    report.finalize();

    const std::string path = (fs::temp_directory_path() / "diffem_report.jsonl").string();
    write_report_jsonl(path, report, false);
    MetricsReport back = read_report_jsonl(path);
    REQUIRE(back.items.size() == report.items.size());
    for (size_t i = 0; i < report.items.size(); ++i) {
        CHECK(back.items[i].id == report.items[i].id);
        CHECK(back.items[i].ok == report.items[i].ok);
        if (report.items[i].ok) {
            CHECK(back.items[i].psnr_db == report.items[i].psnr_db);
            CHECK(back.items[i].kernel_mse == report.items[i].kernel_mse);
        }
    }
    CHECK(back.failed == 1);
    CHECK(format_report_table(back, false).find("broken") != std::string::npos);
    fs::remove(path);
}

namespace {
// Small dataset of texture images blurred by motion kernels, written to disk.
std::string make_bench_dataset(int items, int hw, int ksize, double sigma, uint64_t seed) {
    const fs::path base =
        fs::temp_directory_path() / ("diffem_bench_ds_" + std::to_string(seed));
    fs::remove_all(base);
    fs::create_directories(base / "in");
    LoadedPrior prior = make_texture_prior(hw, hw, 1);
    Rng rng(seed);
    for (int i = 0; i < items; ++i) {
        ImageTensor img = prior.gaussian->sample(rng);
        write_rtf1((base / "in" / ("t" + std::to_string(i) + ".rtf1")).string(), img);
    }
    DegradationConfig config;
    config.kernel_size = ksize;
    config.sigma = sigma;
    config.rng_seed = seed + 1;
    make_dataset((base / "in").string(), (base / "out").string(), config);
    return (base / "out").string();
}
}  // namespace

TEST_CASE("regularizer_sweep") {
    const std::string dir = make_bench_dataset(3, 24, 5, 0.02, 61);
    DatasetManifest manifest = read_manifest(dir + "/manifest.txt");
    MStepConfig base;
    base.iterations = 10;
    base.lambda = 1e-8;
    base.beta_hqs = 1e-2;
    base.simplex_projection = true;

    SUBCASE("noiseless estimation with a weak prior is near exact") {
        SweepResult sweep = regularizer_sweep(manifest, dir, {0.0},
                                              {std::make_shared<L2Regularizer>()}, base, 5);
        CHECK(sweep.cell(0.0, "l2") < 1e-6);
    }
    SUBCASE("a regularizer compared with itself gives identical columns") {
        SweepResult sweep = regularizer_sweep(
            manifest, dir, {0.03},
            {std::make_shared<L2Regularizer>(), std::make_shared<L2Regularizer>()}, base, 5);
        CHECK(sweep.cells.size() == 2);
        CHECK(sweep.cells[0].mean_kernel_mse == sweep.cells[1].mean_kernel_mse);
    }
    SUBCASE("csv and table formats carry every cell") {
        SweepResult sweep = regularizer_sweep(manifest, dir, {0.0, 0.03},
                                              {std::make_shared<L2Regularizer>()}, base, 5);
        const std::string csv = format_sweep_csv(sweep);
        CHECK(csv.find("sigma,reg,mean_kernel_mse,items") != std::string::npos);
        CHECK(format_sweep_table(sweep).find("l2") != std::string::npos);
    }
    fs::remove_all(fs::path(dir).parent_path());
}

TEST_CASE("benchmark") {
    SUBCASE("empty manifest gives an empty successful report") {
        DatasetManifest manifest;
        BenchConfig config;
        config.em.schedule = make_schedule(5, 0.01, 0.1);
        MetricsReport report = benchmark(manifest, ".", config);
        CHECK(report.items.empty());
        CHECK(report.failed == 0);
    }
    SUBCASE("two items produce two finite rows, deterministically") {
        const std::string dir = make_bench_dataset(2, 16, 5, 0.02, 71);
        DatasetManifest manifest = read_manifest(dir + "/manifest.txt");
        BenchConfig config;
        config.algo = EmAlgo::FastEm;
        config.em.particles = 1;
        config.em.kernel_size = 5;
        config.em.guidance.kind = GuidanceKind::Pigdm;
        config.em.schedule = make_schedule(20, 1e-3, 0.3);
        config.em.mstep.lambda = 1e-6;
        config.em.mstep.beta_hqs = 1e3;
        config.em.mstep.regularizer = std::make_shared<L2Regularizer>();
        config.em.seed = 5;
        MetricsReport a = benchmark(manifest, dir, config);
        REQUIRE(a.items.size() == 2);
        for (const auto& item : a.items) {
            REQUIRE(item.ok);
            CHECK(std::isfinite(item.psnr_db));
            CHECK(std::isfinite(item.psnr_sa_db));
            CHECK(std::isfinite(item.kernel_mse));
            CHECK(std::isfinite(item.reblur));
        }
        MetricsReport b = benchmark(manifest, dir, config);
        for (size_t i = 0; i < a.items.size(); ++i) {
            CHECK(a.items[i].psnr_db == b.items[i].psnr_db);
            CHECK(a.items[i].kernel_mse == b.items[i].kernel_mse);
        }
        fs::remove_all(fs::path(dir).parent_path());
    }
    SUBCASE("per-item failures are recorded and the run continues") {
        const std::string dir = make_bench_dataset(1, 16, 5, 0.02, 81);
        DatasetManifest manifest = read_manifest(dir + "/manifest.txt");
        DatasetItem ghost;
        ghost.clean = "missing.rtf1";
        ghost.kernel = "missing.rtf1";
        ghost.degraded = "missing.rtf1";
        ghost.sigma = 0.02;
        manifest.items.insert(manifest.items.begin(), ghost);
        BenchConfig config;
        config.em.particles = 1;
        config.em.kernel_size = 5;
        config.em.schedule = make_schedule(10, 1e-3, 0.3);
        config.em.mstep.regularizer = std::make_shared<L2Regularizer>();
        MetricsReport report = benchmark(manifest, dir, config);
        REQUIRE(report.items.size() == 2);
        CHECK(!report.items[0].ok);
        CHECK(report.items[1].ok);
        CHECK(report.failed == 1);
        fs::remove_all(fs::path(dir).parent_path());
    }
}
