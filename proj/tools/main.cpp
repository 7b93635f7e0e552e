// unite-sampler: compose several diffusion experts at sampling time and
// check the engine against its closed-form ground truth.
//
//   unite-sampler verify [--config PATH] [--out DIR]
//   unite-sampler sample --config PATH [--chains M] [--seed S] [--out DIR]
//   unite-sampler sweep  --config PATH --param a|w --index I --values LIST
//                        [--shared-noise] [--chains M] [--seed S] [--out DIR]
//   unite-sampler train  --config PATH --out MODEL_FILE
//
// Exit codes: 0 success, 1 runtime/check failure, 2 configuration or usage
// error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unite/density.hpp"
#include "unite/kernels.hpp"
#include "unite/model_io.hpp"
#include "unite/run_config.hpp"
#include "unite/sampler.hpp"
#include "unite/sweep.hpp"
#include "unite/trainer.hpp"
#include "unite/verify.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void ensure_writable_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw unite::ConfigError("cannot create output directory " + dir +
                                 ": " + ec.message());
    const fs::path probe = fs::path(dir) / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f)
            throw unite::ConfigError("output directory " + dir +
                                     " is not writable");
    }
    fs::remove(probe, ec);
}

unite::RunConfig load_config_or_default(const std::string& path) {
    if (path.empty())
        return unite::parse_run_config(unite::default_config_json(), "");
    return unite::load_run_config(path);
}

void write_samples_csv(const unite::SampleBatch& batch,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << (batch.dim == 1 ? "x\n" : "x,y\n");
    for (std::size_t i = 0; i < batch.count; ++i) {
        for (int d = 0; d < batch.dim; ++d) {
            if (d) out << ',';
            out << fmt(batch.states[i * static_cast<std::size_t>(batch.dim) +
                                    static_cast<std::size_t>(d)]);
        }
        out << '\n';
    }
}

void write_trajectory_csv(const unite::SampleBatch& batch,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << (batch.dim == 1 ? "t,x\n" : "t,x,y\n");
    for (const auto& [t, state] : batch.trajectory) {
        out << t;
        for (double v : state) out << ',' << fmt(v);
        out << '\n';
    }
}

void write_moments_json(const unite::Moments& m, const unite::SampleBatch& batch,
                        const std::string& path) {
    json doc;
    doc["count"] = batch.count;
    doc["seed"] = batch.seed;
    doc["mean"] = m.mean;
    const auto dim = m.mean.size();
    json cov = json::array();
    for (std::size_t r = 0; r < dim; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < dim; ++c)
            row.push_back(m.covariance[r * dim + c]);
        cov.push_back(std::move(row));
    }
    doc["covariance"] = std::move(cov);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << doc.dump(2) << '\n';
}

int cmd_verify(const std::string& config_path, const std::string& out_dir) {
    // config is validated up front; verification itself runs on built-in
    // fixtures so its numbers are comparable run to run
    load_config_or_default(config_path);
    ensure_writable_dir(out_dir);

    const auto results = unite::run_verification();
    const fs::path csv_path = fs::path(out_dir) / "verify_report.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
    csv << "name,pass,measured,threshold,detail\n";
    const fs::path txt_path = fs::path(out_dir) / "verify_report.txt";
    std::ofstream txt(txt_path);
    if (!txt) throw std::runtime_error("cannot open " + txt_path.string());

    bool all_pass = true;
    char line[256];
    std::snprintf(line, sizeof line, "%-44s %-6s %-14s %-14s\n", "check",
                  "pass", "measured", "threshold");
    std::fputs(line, stdout);
    txt << line;
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        std::snprintf(line, sizeof line, "%-44s %-6s %-14.6g %-14.6g %s\n",
                      r.name.c_str(), r.pass ? "PASS" : "FAIL", r.measured,
                      r.threshold, r.detail.c_str());
        std::fputs(line, stdout);
        txt << line;
        csv << r.name << ',' << (r.pass ? "1" : "0") << ',' << fmt(r.measured)
            << ',' << fmt(r.threshold) << ",\"" << r.detail << "\"\n";
    }
    std::string variants;
    for (const auto& v : unite::kernels::available_variants())
        variants += " " + v;
    std::snprintf(line, sizeof line, "kernel variant: %s (available:%s)\n%s\n",
                  unite::kernels::active_ops().name, variants.c_str(),
                  all_pass ? "all checks passed" : "CHECKS FAILED");
    std::fputs(line, stdout);
    txt << line;
    return all_pass ? 0 : 1;
}

int cmd_sample(const std::string& config_path, std::optional<int> chains,
               std::optional<std::int64_t> seed, std::optional<std::string> out) {
    unite::RunConfig cfg = load_config_or_default(config_path);
    if (chains) {
        if (*chains < 1) throw unite::ConfigError("--chains must be >= 1");
        cfg.chains = static_cast<std::size_t>(*chains);
    }
    if (seed) cfg.sampler.seed = static_cast<std::uint64_t>(*seed);
    if (out) cfg.output_dir = *out;
    ensure_writable_dir(cfg.output_dir);

    const unite::ExpertBundle bundle = cfg.build_bundle();
    const unite::SampleBatch batch =
        sample(bundle, cfg.composition, cfg.sampler, cfg.chains);
    const unite::Moments m =
        unite::moments(batch.states, batch.count, batch.dim);
    const unite::HistogramResult hist =
        unite::histogram(batch.states, batch.count, batch.dim, cfg.grid);

    const fs::path dir(cfg.output_dir);
    write_samples_csv(batch, (dir / "samples.csv").string());
    write_moments_json(m, batch, (dir / "moments.json").string());
    unite::write_density_csv(hist.density, (dir / "histogram.csv").string());
    unite::write_density_pgm(hist.density, (dir / "histogram.pgm").string());
    if (cfg.sampler.record_trajectory)
        write_trajectory_csv(batch, (dir / "trajectory.csv").string());

    std::printf("%zu chains -> %s (out-of-grid samples: %zu)\n", batch.count,
                cfg.output_dir.c_str(), hist.out_of_range);
    std::printf("mean:");
    for (double v : m.mean) std::printf(" %.6g", v);
    std::printf("\n");
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              int index, const std::string& values_csv, bool shared_noise,
              std::optional<int> chains, std::optional<std::int64_t> seed,
              std::optional<std::string> out) {
    unite::RunConfig cfg = load_config_or_default(config_path);
    if (chains) {
        if (*chains < 1) throw unite::ConfigError("--chains must be >= 1");
        cfg.chains = static_cast<std::size_t>(*chains);
    }
    if (seed) cfg.sampler.seed = static_cast<std::uint64_t>(*seed);
    if (out) cfg.output_dir = *out;

    unite::SweepRequest req;
    if (param == "a")
        req.param = unite::SweepParam::reliability;
    else if (param == "w")
        req.param = unite::SweepParam::weight;
    else
        throw unite::ConfigError("--param must be \"a\" or \"w\"");
    req.index = index;
    req.shared_noise = shared_noise;
    {
        std::stringstream ss(values_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) req.values.push_back(std::stod(tok));
    }
    if (req.values.empty()) throw unite::ConfigError("--values is empty");
    ensure_writable_dir(cfg.output_dir);

    const auto cells = unite::run_sweep(cfg, req);

    const fs::path dir(cfg.output_dir);
    std::ofstream summary(dir / "sweep_summary.csv");
    if (!summary) throw std::runtime_error("cannot open sweep_summary.csv");
    const int dim = cfg.experts.front().built->dim();
    summary << "cell,param,index,value,status,seed";
    for (int d = 0; d < dim; ++d) summary << ",mean_" << d;
    for (int d = 0; d < dim; ++d) summary << ",std_" << d;
    summary << ",tv_to_product,note\n";

    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& cell = cells[k];
        summary << k << ',' << param << ',' << index << ',' << fmt(cell.value)
                << ',' << (cell.skipped ? "skipped" : "ok") << ',' << cell.seed;
        if (cell.skipped) {
            for (int d = 0; d < 2 * dim; ++d) summary << ',';
            summary << ",,\"" << cell.skip_reason << "\"\n";
            continue;
        }
        for (double v : cell.mean) summary << ',' << fmt(v);
        for (double v : cell.stddev) summary << ',' << fmt(v);
        summary << ',' << fmt(cell.tv_to_product) << ",\n";

        const unite::HistogramResult hist = unite::histogram(
            cell.batch.states, cell.batch.count, cell.batch.dim, cfg.grid);
        const std::string stem = "cell_" + std::to_string(k);
        unite::write_density_csv(hist.density,
                                 (dir / (stem + "_hist.csv")).string());
        unite::write_density_pgm(hist.density,
                                 (dir / (stem + "_hist.pgm")).string());
    }

    std::size_t produced = 0;
    for (const auto& c : cells)
        if (!c.skipped) ++produced;
    std::printf("sweep over %s[%d]: %zu cells (%zu skipped) -> %s\n",
                param.c_str(), index, cells.size(), cells.size() - produced,
                cfg.output_dir.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_file) {
    unite::RunConfig cfg = load_config_or_default(config_path);
    if (!cfg.train.present)
        throw unite::ConfigError("config has no \"train\" section");
    const fs::path out_path(out_file);
    if (out_path.has_parent_path())
        ensure_writable_dir(out_path.parent_path().string());

    const unite::Dataset2D dataset = unite::generate_dataset(cfg.train.dataset);
    const unite::TrainResult result = unite::train_expert(
        dataset, cfg.train.hidden_dims, *cfg.master, cfg.train.config);

    unite::save_model(result.expert, out_file);
    const fs::path curve_path =
        out_path.has_parent_path()
            ? out_path.parent_path() / "loss_curve.csv"
            : fs::path("loss_curve.csv");
    std::ofstream curve(curve_path);
    if (!curve) throw std::runtime_error("cannot open " + curve_path.string());
    curve << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        curve << e << ',' << fmt(result.epoch_loss[e]) << '\n';

    std::printf("trained %zu epochs -> %s\n", result.epoch_loss.size(),
                out_file.c_str());
    if (!result.epoch_loss.empty())
        std::printf("loss: %.6g -> %.6g\n", result.epoch_loss.front(),
                    result.epoch_loss.back());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compositional diffusion sampling engine"};
    app.require_subcommand(1);

    std::string kernel_variant;
    app.add_option("--kernel", kernel_variant,
                   "force a kernel variant (scalar, avx2, neon)");

    std::string config_path;
    std::string out_dir = ".";
    auto* verify = app.add_subcommand("verify", "run the built-in check suite");
    verify->add_option("--config", config_path, "config JSON (validated)");
    verify->add_option("--out", out_dir, "directory for verify_report.csv");

    std::string s_config;
    std::optional<int> s_chains;
    std::optional<std::int64_t> s_seed;
    std::optional<std::string> s_out;
    auto* sampled = app.add_subcommand("sample", "draw samples and write them");
    sampled->add_option("--config", s_config, "config JSON");
    sampled->add_option("--chains", s_chains, "number of chains");
    sampled->add_option("--seed", s_seed, "sampler seed");
    sampled->add_option("--out", s_out, "output directory");

    std::string w_config, w_param, w_values;
    int w_index = 0;
    bool w_shared = false;
    std::optional<int> w_chains;
    std::optional<std::int64_t> w_seed;
    std::optional<std::string> w_out;
    auto* sweep = app.add_subcommand("sweep", "sweep a composition parameter");
    sweep->add_option("--config", w_config, "config JSON");
    sweep->add_option("--param", w_param, "a or w")->required();
    sweep->add_option("--index", w_index, "expert index")->required();
    sweep->add_option("--values", w_values, "comma-separated values")
        ->required();
    sweep->add_flag("--shared-noise", w_shared,
                    "same initial noise in every cell");
    sweep->add_option("--chains", w_chains, "number of chains");
    sweep->add_option("--seed", w_seed, "sampler seed");
    sweep->add_option("--out", w_out, "output directory");

    std::string t_config, t_out;
    auto* train = app.add_subcommand("train", "train an expert");
    train->add_option("--config", t_config, "config JSON")->required();
    train->add_option("--out", t_out, "model file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!kernel_variant.empty() &&
            !unite::kernels::force_variant(kernel_variant))
            throw unite::ConfigError("kernel variant not available: " +
                                     kernel_variant);
        if (verify->parsed()) return cmd_verify(config_path, out_dir);
        if (sampled->parsed())
            return cmd_sample(s_config, s_chains, s_seed, s_out);
        if (sweep->parsed())
            return cmd_sweep(w_config, w_param, w_index, w_values, w_shared,
                             w_chains, w_seed, w_out);
        if (train->parsed()) return cmd_train(t_config, t_out);
    } catch (const unite::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
