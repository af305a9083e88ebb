// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: fit the GELU derivative table, gradient-check the
// encoder, train on a fixed batch, time full steps, and print the analytic
// memory report. Exits 0 when every requested check passes, 1 otherwise.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tempo/config.hpp"
#include "tempo/encoder.hpp"
#include "tempo/errors.hpp"
#include "tempo/gelu_fit.hpp"
#include "tempo/gradcheck.hpp"
#include "tempo/memory_model.hpp"
#include "tempo/train.hpp"

namespace {

using namespace tempo;

struct CommonArgs {
    std::string config_path;
    std::string variant = "reference";
    std::string table_path;
};

memory_model::EncoderConfig load_config(const std::string& path) {
    memory_model::EncoderConfig cfg;
    if (!path.empty()) {
        cfg = config::load(path).apply(cfg);
    }
    cfg.validate();
    return cfg;
}

// Loads the table from disk or, when the variant needs one and no path was
// given, fits a fresh one in process.
GeluPolyTable resolve_table(const CommonArgs& args,
                            const encoder::OpToggles& toggles) {
    if (!args.table_path.empty()) {
        return GeluPolyTable::load(args.table_path);
    }
    if (toggles.inplace_gelu) {
        std::cout << "no --table given; fitting one (tol 1e-4)\n";
        return fit::fit_table();
    }
    return GeluPolyTable();
}

encoder::LayerSpec make_spec(const memory_model::EncoderConfig& cfg,
                             const std::string& variant,
                             const GeluPolyTable* table, Dtype dt) {
    encoder::LayerSpec spec;
    spec.cfg = cfg;
    spec.variant = encoder::variant_from_name(variant);
    spec.dtype = dt;
    spec.gelu_table = table;
    return spec;
}

int cmd_fit_gelu(double tol, int max_degree, std::int64_t samples,
                 const std::string& out) {
    fit::FitOptions opts;
    opts.tolerance = tol;
    opts.max_degree = max_degree;
    opts.verify_samples = samples;
    GeluPolyTable table = fit::fit_table(opts);
    std::printf("segments: %zu left, %zu right\n", table.segments(0).size(),
                table.segments(1).size());
    std::printf("verified max |error|: %.6e over %lld samples\n",
                table.verified_max_error(),
                static_cast<long long>(samples));
    if (!out.empty()) {
        table.save(out);
        std::printf("wrote %s\n", out.c_str());
    }
    return table.verified() && table.verified_max_error() <= tol ? 0 : 1;
}

int cmd_gradcheck(const CommonArgs& args, int trials, std::uint64_t seed,
                  int samples_per_tensor) {
    auto cfg = load_config(args.config_path);
    encoder::LayerSpec probe_spec =
        make_spec(cfg, args.variant, nullptr, Dtype::F64);
    auto toggles = encoder::resolve_toggles(probe_spec.variant,
                                            probe_spec.mixed);
    GeluPolyTable table = resolve_table(args, toggles);
    probe_spec.gelu_table = &table;

    gradcheck::Options opts;
    opts.samples_per_tensor = samples_per_tensor;
    if (toggles.inplace_gelu) {
        // The table is a 1e-4-accurate derivative surrogate; widen the gate
        // so only genuine wiring mistakes trip it.
        opts.tol = 5e-4;
    }
    gradcheck::Result total;
    for (int t = 0; t < trials; ++t) {
        opts.seed = seed + static_cast<std::uint64_t>(t);
        total.absorb(gradcheck::check_layer(probe_spec, opts.seed, opts));
    }
    std::printf("gradcheck %s: %lld components, %lld failed, worst %.3e%s%s\n",
                args.variant.c_str(), static_cast<long long>(total.checked),
                static_cast<long long>(total.failed), total.worst,
                total.worst_loc.empty() ? "" : " at ",
                total.worst_loc.c_str());
    return total.pass() ? 0 : 1;
}

int cmd_train(const CommonArgs& args, int steps, double lr,
              std::uint64_t seed) {
    auto cfg = load_config(args.config_path);
    encoder::LayerSpec spec = make_spec(cfg, args.variant, nullptr, Dtype::F32);
    auto toggles = encoder::resolve_toggles(spec.variant, spec.mixed);
    GeluPolyTable table = resolve_table(args, toggles);
    spec.gelu_table = &table;

    train::TrainConfig tc;
    tc.steps = steps;
    tc.lr = lr;
    tc.seed = seed;
    auto result = train::run(spec, tc);
    int stride = steps > 10 ? steps / 10 : 1;
    for (const auto& s : result.history) {
        if (s.step % stride == 0 || s.step + 1 == steps) {
            std::printf("step %4d  loss %.6f\n", s.step, s.loss);
        }
    }
    std::printf("final loss %.6f\n", result.final_loss);
    std::printf("peak stashed bytes per step: %lld\n",
                static_cast<long long>(result.peak_bytes));
    bool improved = result.final_loss < result.history.front().loss;
    std::printf("loss decreased: %s\n", improved ? "yes" : "no");
    return improved ? 0 : 1;
}

int cmd_bench(const CommonArgs& args, int reps, const std::string& format) {
    auto cfg = load_config(args.config_path);
    encoder::OpToggles all_on{true, true, true, true};
    GeluPolyTable table = resolve_table(args, all_on);
    auto report = train::bench(cfg, &table, reps);
    if (format == "csv") {
        std::cout << train::bench_csv(report);
    } else {
        for (const auto& row : report.rows) {
            std::printf("%-10s reps %3d  %10.3f ms/step  %12.1f tokens/s\n",
                        row.variant.c_str(), row.reps, row.mean_ms,
                        row.tokens_per_s);
        }
    }
    return 0;
}

void print_report_text(const memory_model::MemoryReport& r) {
    std::printf("config: B=%lld S=%lld H=%lld A=%lld L=%lld\n",
                static_cast<long long>(r.cfg.batch),
                static_cast<long long>(r.cfg.seq),
                static_cast<long long>(r.cfg.hidden),
                static_cast<long long>(r.cfg.heads),
                static_cast<long long>(r.cfg.layers));
    std::printf("%-20s %18s %10s\n", "activation", "shape", "bytes");
    for (const auto& item : r.inventory) {
        std::printf("%-20s %18s %10lld\n", item.name.c_str(),
                    shape_str(item.shape).c_str(),
                    static_cast<long long>(item.bytes));
    }
    std::printf("reference bytes/token: %lld\n",
                static_cast<long long>(r.reference_per_token));
    std::printf("reference bytes/layer: %lld\n",
                static_cast<long long>(r.reference_per_layer));
    std::printf("reference bytes total: %lld\n",
                static_cast<long long>(r.reference_total));
    std::printf("attention maps share:  %.2f%%\n",
                100.0 * r.fractions.attention_maps_share);
    std::printf("gelu input share:      %.2f%%\n",
                100.0 * r.fractions.gelu_input_share);
    for (const auto& line : r.savings) {
        std::printf("%-22s saves %6lld B/token (%.2f%%)\n",
                    memory_model::optimization_name(line.opt),
                    static_cast<long long>(line.bytes_per_token),
                    100.0 * line.fraction);
    }
    std::printf("rstd overhead:         %lld B/token\n",
                static_cast<long long>(r.rstd_overhead_per_token));
    std::printf("optimized bytes/token: %lld\n",
                static_cast<long long>(r.optimized_per_token));
}

void print_report_csv(const memory_model::MemoryReport& r) {
    std::printf("optimization,bytes_per_token,fraction\n");
    std::printf("none,%lld,0\n",
                static_cast<long long>(r.reference_per_token));
    for (const auto& line : r.savings) {
        std::printf("%s,%lld,%.6f\n",
                    memory_model::optimization_name(line.opt),
                    static_cast<long long>(line.bytes_per_token),
                    line.fraction);
    }
    std::printf("combined,%lld,%.6f\n",
                static_cast<long long>(r.reference_per_token -
                                       r.optimized_per_token),
                static_cast<double>(r.reference_per_token -
                                    r.optimized_per_token) /
                    static_cast<double>(r.reference_per_token));
}

void print_report_json(const memory_model::MemoryReport& r) {
    nlohmann::json j;
    j["config"] = {{"B", r.cfg.batch},   {"S", r.cfg.seq},
                   {"H", r.cfg.hidden},  {"A", r.cfg.heads},
                   {"L", r.cfg.layers}};
    j["reference_bytes_per_token"] = r.reference_per_token;
    j["reference_bytes_per_layer"] = r.reference_per_layer;
    j["reference_bytes_total"] = r.reference_total;
    j["attention_maps_share"] = r.fractions.attention_maps_share;
    j["gelu_input_share"] = r.fractions.gelu_input_share;
    j["inventory"] = nlohmann::json::array();
    for (const auto& item : r.inventory) {
        j["inventory"].push_back({{"name", item.name},
                                  {"shape", item.shape},
                                  {"bytes", item.bytes}});
    }
    j["savings"] = nlohmann::json::array();
    for (const auto& line : r.savings) {
        j["savings"].push_back(
            {{"optimization", memory_model::optimization_name(line.opt)},
             {"bytes_per_token", line.bytes_per_token},
             {"fraction", line.fraction}});
    }
    j["rstd_overhead_per_token"] = r.rstd_overhead_per_token;
    j["optimized_bytes_per_token"] = r.optimized_per_token;
    std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"activation-memory-aware encoder toolkit"};
    app.require_subcommand(1);

    // fit-gelu
    double fit_tol = 1e-4;
    int fit_max_degree = 13;
    std::int64_t fit_samples = 1'000'000;
    std::string fit_out;
    auto* fit_cmd =
        app.add_subcommand("fit-gelu", "fit the derivative-from-output table");
    fit_cmd->add_option("--tol", fit_tol, "target max |error|");
    fit_cmd->add_option("--max-degree", fit_max_degree, "per-segment cap");
    fit_cmd->add_option("--samples", fit_samples, "verification sweep size");
    fit_cmd->add_option("--out", fit_out, "output table path");

    // gradcheck
    CommonArgs gc_args;
    int gc_trials = 5;
    std::uint64_t gc_seed = 1;
    int gc_samples = 8;
    auto* gc_cmd = app.add_subcommand(
        "gradcheck", "finite-difference check of the full layer");
    gc_cmd->add_option("--config", gc_args.config_path, "key = value file");
    gc_cmd->add_option("--variant", gc_args.variant,
                       "reference | tempo | mixed");
    gc_cmd->add_option("--table", gc_args.table_path, "fitted table path");
    gc_cmd->add_option("--trials", gc_trials, "independent random trials");
    gc_cmd->add_option("--seed", gc_seed, "base seed");
    gc_cmd->add_option("--samples", gc_samples,
                       "components probed per tensor (0 = all)");

    // train
    CommonArgs tr_args;
    int tr_steps = 50;
    double tr_lr = 1e-2;
    std::uint64_t tr_seed = 1;
    auto* tr_cmd =
        app.add_subcommand("train", "SGD on one fixed random batch");
    tr_cmd->add_option("--config", tr_args.config_path, "key = value file");
    tr_cmd->add_option("--variant", tr_args.variant,
                       "reference | tempo | mixed");
    tr_cmd->add_option("--table", tr_args.table_path, "fitted table path");
    tr_cmd->add_option("--steps", tr_steps, "SGD steps");
    tr_cmd->add_option("--lr", tr_lr, "learning rate");
    tr_cmd->add_option("--seed", tr_seed, "run seed");

    // bench
    CommonArgs be_args;
    int be_reps = 5;
    std::string be_format = "text";
    auto* be_cmd =
        app.add_subcommand("bench", "time full steps, both variants");
    be_cmd->add_option("--config", be_args.config_path, "key = value file");
    be_cmd->add_option("--table", be_args.table_path, "fitted table path");
    be_cmd->add_option("--reps", be_reps, "timed steps per variant");
    be_cmd->add_option("--format", be_format, "text | csv");

    // memory-report
    std::string mr_config;
    std::int64_t mr_h = 768, mr_a = 12, mr_s = 128, mr_b = 1, mr_l = 1;
    std::string mr_format = "text";
    auto* mr_cmd =
        app.add_subcommand("memory-report", "analytic activation-memory model");
    mr_cmd->add_option("--config", mr_config, "key = value file");
    mr_cmd->add_option("--H", mr_h, "hidden size");
    mr_cmd->add_option("--A", mr_a, "attention heads");
    mr_cmd->add_option("--S", mr_s, "sequence length");
    mr_cmd->add_option("--B", mr_b, "batch size");
    mr_cmd->add_option("--L", mr_l, "layers");
    mr_cmd->add_option("--format", mr_format, "text | csv | json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit_cmd->parsed()) {
            return cmd_fit_gelu(fit_tol, fit_max_degree, fit_samples, fit_out);
        }
        if (gc_cmd->parsed()) {
            return cmd_gradcheck(gc_args, gc_trials, gc_seed, gc_samples);
        }
        if (tr_cmd->parsed()) {
            return cmd_train(tr_args, tr_steps, tr_lr, tr_seed);
        }
        if (be_cmd->parsed()) {
            return cmd_bench(be_args, be_reps, be_format);
        }
        if (mr_cmd->parsed()) {
            memory_model::EncoderConfig cfg;
            if (!mr_config.empty()) {
                cfg = config::load(mr_config).apply(cfg);
            } else {
                cfg.hidden = mr_h;
                cfg.heads = mr_a;
                cfg.seq = mr_s;
                cfg.batch = mr_b;
                cfg.layers = mr_l;
                cfg.validate();
            }
            auto report = memory_model::build_report(cfg);
            if (mr_format == "json") {
                print_report_json(report);
            } else if (mr_format == "csv") {
                print_report_csv(report);
            } else {
                print_report_text(report);
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
