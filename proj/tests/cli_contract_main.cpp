// Contract checks for the CLI surface: exit codes, fail-fast validation and
// output files. Spawns the real binary.
//
// Usage: cli_contract --cli PATH --workdir DIR

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void expect(bool ok, const std::string& what) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
    if (!ok) ++g_failures;
}

int run(const std::string& cli, const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string capture(const std::string& cli, const std::string& args) {
    const std::string out = "/tmp/unite_cli_contract_capture.txt";
    const std::string cmd = "\"" + cli + "\" " + args + " >" + out + " 2>&1";
    const int rc = std::system(cmd.c_str());
    (void)rc;  // the caller inspects the captured text, not the status
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kGaussianConfig = R"json({
  "schedule": {"kind": "linear", "steps": 1000, "beta_start": 1e-4,
               "beta_end": 0.02},
  "experts": [
    {"type": "gaussian", "condition": "null",
     "entries": [{"condition": "null", "mu": [2.0], "sigma": [0.5]}]}
  ],
  "composition": {"a": [1.0], "w": [1.0]},
  "sampler": {"kind": "ancestral", "seed": 99, "record_trajectory": true},
  "chains": 10000,
  "grid": {"lo": [-1.0], "hi": [5.0], "bins": [64]}
})json";

const char* kBadComposition = R"json({
  "schedule": {"kind": "linear", "steps": 10, "beta_start": 1e-4,
               "beta_end": 0.02},
  "experts": [
    {"type": "gaussian", "condition": "null",
     "entries": [{"condition": "null", "mu": [0.0], "sigma": [1.0]}]}
  ],
  "composition": {"a": [0.7], "w": [1.0]}
})json";

}  // namespace

int main(int argc, char** argv) {
    std::string cli;
    std::string workdir = "cli_contract_work";
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--cli") cli = argv[i + 1];
        if (flag == "--workdir") workdir = argv[i + 1];
    }
    if (cli.empty()) {
        std::printf("FAIL: --cli is required\n");
        return 1;
    }
    const fs::path work(workdir);
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);

    const fs::path good_cfg = work / "gaussian.json";
    std::ofstream(good_cfg) << kGaussianConfig;
    const fs::path bad_cfg = work / "bad.json";
    std::ofstream(bad_cfg) << kBadComposition;

    // invalid composition fails fast with exit 2 and names the invariant
    {
        const auto start = std::chrono::steady_clock::now();
        const int rc = run(cli, "sample --config " + bad_cfg.string() +
                                    " --out " + (work / "never").string());
        const double ms =
            std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - start)
                .count();
        expect(rc == 2, "invalid composition exits 2");
        expect(ms < 100.0, "rejection is fast (" + std::to_string(ms) + " ms)");
        expect(!fs::exists(work / "never" / "samples.csv"),
               "no outputs written for a rejected config");
        const std::string msg =
            capture(cli, "sample --config " + bad_cfg.string());
        expect(msg.find("sum to 1") != std::string::npos,
               "diagnostic names the violated constraint");
    }

    // unknown keys are config errors
    {
        const fs::path cfg = work / "unknown_key.json";
        std::ofstream(cfg) << R"({"schedule": {"kind": "linear", "steps": 10,
            "beta_start": 1e-4, "beta_end": 0.02}, "spurious": true,
            "experts": [{"type": "gaussian", "condition": "null",
              "entries": [{"condition": "null", "mu": [0.0], "sigma": [1.0]}]}],
            "composition": {"a": [1.0], "w": [1.0]}})";
        expect(run(cli, "sample --config " + cfg.string()) == 2,
               "unknown config key exits 2");
    }

    // unwritable output directory fails before sampling
    expect(run(cli, "sample --config " + good_cfg.string() +
                        " --out /proc/unwritable") == 2,
           "unwritable output directory exits 2");

    // sampling writes the expected files and hits the analytic moments
    {
        const fs::path out = work / "gauss_out";
        expect(run(cli, "sample --config " + good_cfg.string() + " --out " +
                            out.string()) == 0,
               "sample succeeds on a valid config");
        for (const char* f : {"samples.csv", "moments.json", "histogram.csv",
                              "histogram.pgm", "trajectory.csv"})
            expect(fs::exists(out / f), std::string("writes ") + f);
        const std::string moments = read_file(out / "moments.json");
        const auto pos = moments.find("\"mean\"");
        double mean = 0.0;
        if (pos != std::string::npos)
            mean = std::atof(moments.c_str() + moments.find('[', pos) + 1);
        expect(std::abs(mean - 2.0) <= 0.05,
               "moments.json mean within 0.05 of the analytic target");
    }

    // forcing the scalar kernels must not change a single output byte
    {
        const fs::path out = work / "gauss_scalar";
        expect(run(cli, "--kernel scalar sample --config " + good_cfg.string() +
                            " --out " + out.string()) == 0,
               "sampling with forced scalar kernels succeeds");
        const std::string a = read_file(work / "gauss_out" / "samples.csv");
        const std::string b = read_file(out / "samples.csv");
        expect(!a.empty() && a == b,
               "scalar and simd kernel variants sample identical bytes");
    }

    // a one-value weight sweep with shared noise reproduces cmd_sample
    {
        const fs::path sweep_out = work / "sweep_one";
        expect(run(cli, "sweep --config " + good_cfg.string() +
                            " --param w --index 0 --values 1 --shared-noise "
                            "--out " + sweep_out.string()) == 0,
               "degenerate weight sweep succeeds");
        const std::string cell = read_file(sweep_out / "cell_0_hist.csv");
        const std::string direct =
            read_file(work / "gauss_out" / "histogram.csv");
        expect(!cell.empty() && cell == direct,
               "degenerate sweep cell equals the plain sampling histogram");
    }

    // invalid sweep values are recorded as skipped cells, run continues
    {
        const fs::path sweep_out = work / "sweep_skip";
        expect(run(cli, "sweep --config " + good_cfg.string() +
                            " --param w --index 0 --values 0.5,1,2 "
                            "--chains 64 --out " + sweep_out.string()) == 0,
               "sweep with one invalid cell still succeeds");
        const std::string summary = read_file(sweep_out / "sweep_summary.csv");
        expect(summary.find("skipped") != std::string::npos,
               "sweep summary records the skipped cell");
        expect(fs::exists(sweep_out / "cell_1_hist.csv") &&
                   !fs::exists(sweep_out / "cell_0_hist.csv"),
               "only valid cells emit histograms");
    }

    // train writes a loadable model and its loss curve; retraining is
    // byte-identical
    {
        const fs::path cfg = work / "train.json";
        std::ofstream(cfg) << R"({
  "schedule": {"kind": "linear", "steps": 200, "beta_start": 1e-4,
               "beta_end": 0.05},
  "experts": [
    {"type": "gaussian", "condition": "null",
     "entries": [{"condition": "null", "mu": [0.0, 0.0],
                  "sigma": [1.0, 1.0]}]}
  ],
  "composition": {"a": [1.0], "w": [1.0]},
  "train": {
    "dataset": {"generator": "gaussian_blobs",
                "blobs": [{"label": 0, "mu": [-1.0, 0.0], "sigma": 0.4},
                          {"label": 1, "mu": [1.0, 0.0], "sigma": 0.4}],
                "count": 512, "seed": 4},
    "hidden": [16], "epochs": 4, "batch_size": 64,
    "learning_rate": 0.02, "seed": 12, "p_uncond": 0.1
  }
})";
        const fs::path m1 = work / "m1.udme", m2 = work / "m2.udme";
        expect(run(cli, "train --config " + cfg.string() + " --out " +
                            m1.string()) == 0,
               "train succeeds");
        expect(fs::exists(work / "loss_curve.csv"), "train writes loss_curve.csv");
        run(cli, "train --config " + cfg.string() + " --out " + m2.string());
        expect(read_file(m1) == read_file(m2) && fs::file_size(m1) > 0,
               "retraining with the same seed is byte-identical");

        // a model with a flipped byte is rejected at config load with exit 2
        std::string bytes = read_file(m1);
        bytes[100] = static_cast<char>(bytes[100] ^ 0x10);
        std::ofstream(work / "bad.udme", std::ios::binary) << bytes;
        const fs::path mlp_cfg = work / "mlp.json";
        std::ofstream(mlp_cfg) << R"({
  "schedule": {"kind": "linear", "steps": 200, "beta_start": 1e-4,
               "beta_end": 0.05},
  "experts": [{"type": "mlp", "path": "bad.udme", "condition": {"label": 0}}],
  "composition": {"a": [1.0], "w": [1.0]}
})";
        expect(run(cli, "sample --config " + mlp_cfg.string()) == 2,
               "corrupt model file exits 2 at config load");
        const std::string msg =
            capture(cli, "sample --config " + mlp_cfg.string());
        expect(msg.find("checksum") != std::string::npos,
               "corrupt model diagnostic mentions the checksum");
    }

    // verify writes its reports, exits 0, and is idempotent
    {
        const fs::path out = work / "verify_out";
        expect(run(cli, "verify --out " + out.string()) == 0,
               "verify exits 0 with all checks passing");
        const std::string report = read_file(out / "verify_report.csv");
        expect(report.find("two_gaussian_tv_to_product") != std::string::npos,
               "verify report records the measured product-distance check");
        expect(fs::exists(out / "verify_report.txt"),
               "verify writes the human-readable table too");
        const fs::path again = work / "verify_out2";
        run(cli, "verify --out " + again.string());
        expect(report == read_file(again / "verify_report.csv"),
               "verify reports are byte-identical run to run");
    }

    if (g_failures) {
        std::printf("%d contract check(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all cli contract checks passed\n");
    return 0;
}
