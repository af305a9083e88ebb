// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Release gate. Each numbered criterion prints exactly one PASS/FAIL line
// with its pinned tolerance baked in; the process exits non-zero if any
// line fails. Criterion 9 is informational by design: wall-clock throughput
// on accelerator hardware has no desk-scale equivalent, so it is stated,
// not asserted.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tempo/encoder.hpp"
#include "tempo/errors.hpp"
#include "tempo/gelu_fit.hpp"
#include "tempo/gradcheck.hpp"
#include "tempo/kernels.hpp"
#include "tempo/math.hpp"
#include "tempo/memory_model.hpp"
#include "tempo/ops_reference.hpp"
#include "tempo/ops_tempo.hpp"
#include "tempo/train.hpp"

using namespace tempo;

namespace {

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    // Returns a detail string; throws or returns "FAIL:..." on failure.
    std::function<std::string()> run;
};

int g_failures = 0;

void run_criterion(const Criterion& c) {
    auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
        detail = c.run();
        if (detail.rfind("FAIL:", 0) == 0) {
            ok = false;
            detail = detail.substr(5);
        }
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (elapsed > c.budget_s) {
        ok = false;
        detail += (detail.empty() ? "" : "; ") + std::string("overran ") +
                  std::to_string(c.budget_s) + " s budget";
    }
    if (!ok) ++g_failures;
    std::printf("criterion %d %-28s %s  %s(%.2f s)\n", c.id, c.name.c_str(),
                ok ? "PASS" : "FAIL", detail.empty() ? "" : (detail + "  ").c_str(),
                elapsed);
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

// ---- criterion 3 helpers ----

using BuildFn = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

gradcheck::Result fd_op(const BuildFn& build, const std::vector<Tensor>& inputs,
                        const std::vector<std::string>& names,
                        const Tensor& target, double tol) {
    auto forward_loss = [&](const std::vector<Tensor>& vals, Graph& g,
                            std::vector<NodeId>& nodes) {
        nodes.clear();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            nodes.push_back(g.leaf(vals[i], names[i]));
        }
        return g.mse_loss(build(g, nodes), target.clone());
    };
    Graph g;
    std::vector<NodeId> nodes;
    NodeId loss = forward_loss(inputs, g, nodes);
    GradientMap grads = g.backward_scalar(loss);
    std::vector<Tensor> analytic;
    for (NodeId n : nodes) analytic.push_back(grads.at(n));
    auto objective = [&](const std::vector<Tensor>& probe) {
        Graph pg;
        std::vector<NodeId> pn;
        return pg.value(forward_loss(probe, pg, pn)).get(0);
    };
    gradcheck::Options opts;
    opts.tol = tol;
    return gradcheck::check(objective, inputs, analytic, names, opts);
}

const GeluPolyTable& table() {
    static GeluPolyTable t = fit::fit_table();
    return t;
}

encoder::LayerSpec layer_spec(const memory_model::EncoderConfig& cfg,
                              encoder::Variant v, Dtype dt) {
    encoder::LayerSpec spec;
    spec.cfg = cfg;
    spec.variant = v;
    spec.dtype = dt;
    spec.gelu_table = &table();
    return spec;
}

memory_model::EncoderConfig bert_cfg(std::int64_t seq) {
    memory_model::EncoderConfig cfg;
    cfg.hidden = 768;
    cfg.heads = 12;
    cfg.seq = seq;
    cfg.batch = 1;
    return cfg;
}

struct LayerBytes {
    std::int64_t net = 0;  // final-output seam netted out
    std::map<std::string, std::int64_t> by_tag;
};

LayerBytes measure_layer(encoder::Variant v,
                         const memory_model::EncoderConfig& cfg) {
    // One forward each per variant; criteria 6 and 7 share the readings so
    // the accounting check stays ledger arithmetic.
    static std::map<std::string, LayerBytes> cache;
    std::string key = fmt("%d:%lld:%lld:%lld:%lld", int(v),
                          (long long)cfg.hidden, (long long)cfg.heads,
                          (long long)cfg.seq, (long long)cfg.batch);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    encoder::EncoderStack stack(layer_spec(cfg, v, Dtype::F32));
    Graph g;
    Tensor x = Tensor::randn({cfg.batch, cfg.seq, cfg.hidden}, 1, Dtype::F32);
    auto fn = stack.forward(g, x, 77);
    LayerBytes r;
    r.net = g.ledger.current_bytes() -
            g.ledger.bytes_of(g.value(fn.output).ident());
    r.by_tag = g.ledger.live_by_tag();
    cache[key] = r;
    return r;
}

// ---- criteria ----

std::string c1_minimum() {
    GeluMinimum m = fit::locate_minimum();
    char printed[32];
    std::snprintf(printed, sizeof printed, "%.5f", m.x_star);
    if (std::string(printed) != "-0.75179") {
        return fmt("FAIL:x_star prints as %s, want -0.75179", printed);
    }
    if (std::abs(gelu_prime(m.x_star)) > 1e-9) {
        return fmt("FAIL:gelu'(x_star)=%.3e not ~0", gelu_prime(m.x_star));
    }
    return fmt("x_star=%.5f y_min=%.9f", m.x_star, m.y_min);
}

std::string c2_table() {
    const GeluPolyTable& t = table();
    int max_deg = 0;
    std::size_t segs = 0;
    for (int branch : {0, 1}) {
        for (const auto& s : t.segments(branch)) {
            max_deg = std::max(max_deg, int(s.coeffs.size()) - 1);
            ++segs;
        }
    }
    if (max_deg > 13) return fmt("FAIL:max degree %d > 13", max_deg);
    fit::SweepResult sweep = fit::sweep_error(t, 1'000'000, -10.0, 10.0);
    if (sweep.max_error > 1e-4) {
        return fmt("FAIL:sweep error %.3e > 1e-4 at x=%.6f", sweep.max_error,
                   sweep.worst_x);
    }
    return fmt("%zu segments, max degree %d, 1e6-sweep err %.2e", segs,
               max_deg, sweep.max_error);
}

std::string c3_gradients() {
    // 100 trials of every operator, then 100 trials of the full layer
    // (H=32, A=4, S=8, B=2), double precision, step 1e-4.
    const double lossless = 1e-4;
    const double gelu_tol = 5e-4;
    gradcheck::Result ops;
    std::int64_t gelu_checked = 0;
    for (std::uint64_t t = 1; t <= 100; ++t) {
        Tensor x = Tensor::randn({3, 6}, t * 10 + 1);
        Tensor tgt = Tensor::randn({3, 6}, t * 10 + 2);
        ops.absorb(fd_op(
            [](Graph& g, const std::vector<NodeId>& n) {
                return ref_ops::gelu(g, n[0], "y");
            },
            {x}, {"gelu_x"}, tgt, lossless));
        Tensor gamma = Tensor::randn({6}, t * 10 + 3, Dtype::F64, 0.2);
        for (int i = 0; i < 6; ++i)
            gamma.set(i, gamma.get(i) + (gamma.get(i) >= 0 ? 0.5 : -0.5));
        ops.absorb(fd_op(
            [](Graph& g, const std::vector<NodeId>& n) {
                return ref_ops::layernorm(g, n[0], n[1], n[2], 1e-5, "y");
            },
            {x, gamma, Tensor::randn({6}, t * 10 + 4)},
            {"ln_x", "ln_gamma", "ln_beta"}, tgt, lossless));
        ops.absorb(fd_op(
            [](Graph& g, const std::vector<NodeId>& n) {
                return ref_ops::softmax(g, n[0], "y");
            },
            {x}, {"softmax_z"}, tgt, lossless));
        BoolMask mask = BoolMask::bernoulli_keep({3, 6}, 0.3, t);
        ops.absorb(fd_op(
            [mask](Graph& g, const std::vector<NodeId>& n) {
                return ref_ops::dropout(g, n[0], 0.3, mask, "y", "ym");
            },
            {x}, {"dropout_x"}, tgt, lossless));
        ops.absorb(fd_op(
            [](Graph& g, const std::vector<NodeId>& n) {
                return g.linear(n[0], n[1], n[2], "y");
            },
            {Tensor::randn({3, 4}, t * 10 + 5), Tensor::randn({4, 6}, t * 10 + 6),
             Tensor::randn({6}, t * 10 + 7)},
            {"lin_x", "lin_w", "lin_b"}, tgt, lossless));
        BoolMask amask = BoolMask::bernoulli_keep({1, 2, 4, 4}, 0.2, t + 500);
        Tensor atgt = Tensor::randn({1, 2, 4, 3}, t * 10 + 8);
        ops.absorb(fd_op(
            [amask](Graph& g, const std::vector<NodeId>& n) {
                return ref_ops::sdpa(g, n[0], n[1], n[2], 0.2, amask);
            },
            {Tensor::randn({1, 2, 4, 3}, t * 10 + 11),
             Tensor::randn({1, 2, 4, 3}, t * 10 + 12),
             Tensor::randn({1, 2, 4, 3}, t * 10 + 13)},
            {"sdpa_q", "sdpa_k", "sdpa_v"}, atgt, lossless));
        // The table-backed path gets the widened gate.
        auto gr = fd_op(
            [](Graph& g, const std::vector<NodeId>& n) {
                return tempo_ops::gelu(g, n[0], &table(), "y", "ym");
            },
            {x}, {"gelu_ip_x"}, tgt, gelu_tol);
        gelu_checked += gr.checked;
        ops.absorb(gr);
    }
    if (!ops.pass()) {
        return fmt("FAIL:op suite %lld/%lld failed, worst %.2e at %s",
                   (long long)ops.failed, (long long)ops.checked, ops.worst,
                   ops.worst_loc.c_str());
    }

    memory_model::EncoderConfig cfg;
    cfg.hidden = 32;
    cfg.heads = 4;
    cfg.seq = 8;
    cfg.batch = 2;
    gradcheck::Options lopts;
    lopts.samples_per_tensor = 4;
    gradcheck::Result ref_layer, tempo_layer;
    for (std::uint64_t t = 1; t <= 100; ++t) {
        lopts.tol = lossless;
        ref_layer.absorb(gradcheck::check_layer(
            layer_spec(cfg, encoder::Variant::Reference, Dtype::F64), t,
            lopts));
        lopts.tol = gelu_tol;
        tempo_layer.absorb(gradcheck::check_layer(
            layer_spec(cfg, encoder::Variant::Tempo, Dtype::F64), t, lopts));
    }
    if (!ref_layer.pass()) {
        return fmt("FAIL:reference layer %lld failed, worst %.2e at %s",
                   (long long)ref_layer.failed, ref_layer.worst,
                   ref_layer.worst_loc.c_str());
    }
    if (!tempo_layer.pass()) {
        return fmt("FAIL:tempo layer %lld failed, worst %.2e at %s",
                   (long long)tempo_layer.failed, tempo_layer.worst,
                   tempo_layer.worst_loc.c_str());
    }
    return fmt("%lld op + %lld layer components, worst %.1e (ops) %.1e (layers)",
               (long long)ops.checked,
               (long long)(ref_layer.checked + tempo_layer.checked), ops.worst,
               std::max(ref_layer.worst, tempo_layer.worst));
}

struct PairGrads {
    std::vector<Tensor> ref, opt;
};

PairGrads pair_grads(const BuildFn& ref_build, const BuildFn& opt_build,
                     const std::vector<Tensor>& inputs, const Tensor& target) {
    PairGrads out;
    for (int which : {0, 1}) {
        Graph g;
        std::vector<NodeId> nodes;
        for (const Tensor& t : inputs) nodes.push_back(g.leaf(t, "in"));
        NodeId y = which == 0 ? ref_build(g, nodes) : opt_build(g, nodes);
        GradientMap grads = g.backward_scalar(g.mse_loss(y, target.clone()));
        for (NodeId n : nodes) {
            (which == 0 ? out.ref : out.opt).push_back(grads.at(n));
        }
    }
    return out;
}

std::string c4_equivalence() {
    const double tol = 1e-12;
    double worst = 0.0;
    for (std::uint64_t t = 1; t <= 100; ++t) {
        // In-place layernorm vs baseline.
        Tensor x = Tensor::randn({4, 16}, t * 7 + 1);
        Tensor gamma = Tensor::randn({16}, t * 7 + 2, Dtype::F64, 0.2);
        for (int i = 0; i < 16; ++i)
            gamma.set(i, gamma.get(i) + (gamma.get(i) >= 0 ? 0.5 : -0.5));
        Tensor beta = Tensor::randn({16}, t * 7 + 3);
        Tensor tgt = Tensor::randn({4, 16}, t * 7 + 4);
        auto ln = pair_grads(
            [](Graph& g, const std::vector<NodeId>& n) {
                return ref_ops::layernorm(g, n[0], n[1], n[2], 1e-5, "y");
            },
            [](Graph& g, const std::vector<NodeId>& n) {
                return tempo_ops::layernorm(g, n[0], n[1], n[2], 1e-5, "y",
                                            "yr");
            },
            {x, gamma, beta}, tgt);
        for (std::size_t i = 0; i < ln.ref.size(); ++i) {
            worst = std::max(worst, max_abs_diff(ln.ref[i], ln.opt[i]));
        }

        // Output-only softmax vs baseline.
        auto sm = pair_grads(
            [](Graph& g, const std::vector<NodeId>& n) {
                return ref_ops::softmax(g, n[0], "y");
            },
            [](Graph& g, const std::vector<NodeId>& n) {
                return tempo_ops::softmax(g, n[0], "y");
            },
            {Tensor::randn({4, 16}, t * 7 + 5)}, tgt);
        worst = std::max(worst, max_abs_diff(sm.ref[0], sm.opt[0]));

        // Recompute-dropout attention block vs baseline.
        BoolMask mask = BoolMask::bernoulli_keep({1, 2, 6, 6}, 0.25, t);
        Tensor atgt = Tensor::randn({1, 2, 6, 4}, t * 7 + 6);
        std::vector<Tensor> qkv{Tensor::randn({1, 2, 6, 4}, t * 7 + 7),
                                Tensor::randn({1, 2, 6, 4}, t * 7 + 8),
                                Tensor::randn({1, 2, 6, 4}, t * 7 + 9)};
        auto at = pair_grads(
            [&mask](Graph& g, const std::vector<NodeId>& n) {
                return ref_ops::sdpa(g, n[0], n[1], n[2], 0.25, mask);
            },
            [&mask](Graph& g, const std::vector<NodeId>& n) {
                return tempo_ops::sdpa(g, n[0], n[1], n[2], 0.25, mask);
            },
            qkv, atgt);
        for (std::size_t i = 0; i < at.ref.size(); ++i) {
            worst = std::max(worst, max_abs_diff(at.ref[i], at.opt[i]));
        }
        if (worst > tol) break;
    }
    if (worst > tol) return fmt("FAIL:worst pair diff %.3e > 1e-12", worst);
    return fmt("300 paired instances, worst diff %.1e", worst);
}

std::string c5_percentages() {
    using memory_model::Optimization;
    struct Row {
        std::int64_t seq;
        Optimization opt;
        double want;
    };
    const Row rows[] = {
        {128, Optimization::InplaceGelu, 13.04},
        {512, Optimization::InplaceGelu, 7.06},
        {2048, Optimization::InplaceGelu, 2.49},
        {128, Optimization::InplaceLayerNorm, 8.70},
        {512, Optimization::InplaceLayerNorm, 4.71},
        {2048, Optimization::InplaceLayerNorm, 1.66},
        {128, Optimization::DropoutRecompute, 8.70},
        {512, Optimization::DropoutRecompute, 18.82},
        {2048, Optimization::DropoutRecompute, 26.56},
        {128, Optimization::SoftmaxOutputOnly, 8.70},
        {512, Optimization::SoftmaxOutputOnly, 18.82},
        {2048, Optimization::SoftmaxOutputOnly, 26.56},
    };
    for (const Row& r : rows) {
        double got =
            100.0 * memory_model::saving_fraction(bert_cfg(r.seq), r.opt);
        if (std::abs(got - r.want) >= 0.005) {
            return fmt("FAIL:%s at S=%lld gives %.4f%%, want %.2f%%",
                       memory_model::optimization_name(r.opt),
                       (long long)r.seq, got, r.want);
        }
    }
    double maps =
        100.0 * memory_model::named_fractions(bert_cfg(512)).attention_maps_share;
    double gin =
        100.0 * memory_model::named_fractions(bert_cfg(128)).gelu_input_share;
    if (std::abs(maps - 56.47) >= 0.005 || std::abs(maps - 56.0) > 1.0) {
        return fmt("FAIL:attention-maps share %.4f%%, want 56.47 (56 +/- 1)",
                   maps);
    }
    if (std::abs(gin - 17.39) >= 0.005 || std::abs(gin - 17.0) > 0.5) {
        return fmt("FAIL:gelu-input share %.4f%%, want 17.39 (17 +/- 0.5)",
                   gin);
    }
    return fmt("12 ablation cells at 2 dp; shares 56.47%% and 17.39%%");
}

std::string c6_ledger_model() {
    memory_model::EncoderConfig cfg = bert_cfg(128);
    encoder::EncoderStack stack(
        layer_spec(cfg, encoder::Variant::Reference, Dtype::F32));
    Graph g;
    Tensor x = Tensor::randn({1, 128, 768}, 1, Dtype::F32);
    stack.forward(g, x, 77);
    auto cc = memory_model::cross_check_reference(cfg, g.ledger);
    if (!cc.ok) {
        std::ostringstream names;
        for (const auto& d : cc.diffs) names << " " << d.name;
        return fmt("FAIL:cross-check model=%lld ledger=%lld, diffs:%s",
                   (long long)cc.model_total, (long long)cc.ledger_total,
                   names.str().c_str());
    }
    std::int64_t per_token = cc.ledger_total / cfg.tokens();
    if (per_token != 70656) {
        return fmt("FAIL:reference ledger %lld B/token, want 70656",
                   (long long)per_token);
    }

    LayerBytes ref = measure_layer(encoder::Variant::Reference, cfg);
    LayerBytes opt = measure_layer(encoder::Variant::Tempo, cfg);
    std::int64_t h = cfg.hidden, as = cfg.heads * cfg.seq;
    std::int64_t want_delta = 12 * h + (8 * h - 8) + 4 * as + 4 * as;
    std::int64_t got_delta = (ref.net - opt.net) / cfg.tokens();
    if ((ref.net - opt.net) % cfg.tokens() != 0 || got_delta != want_delta) {
        return fmt("FAIL:saving %lld B/token, want 12H+(8H-8)+4AS+4AS = %lld",
                   (long long)got_delta, (long long)want_delta);
    }
    return fmt("70656 B/token byte-exact; saving %lld B/token exact",
               (long long)got_delta);
}

std::string c7_dropout_bytes() {
    memory_model::EncoderConfig cfg = bert_cfg(128);
    LayerBytes ref = measure_layer(encoder::Variant::Reference, cfg);
    LayerBytes opt = measure_layer(encoder::Variant::Tempo, cfg);
    std::int64_t elems = cfg.batch * cfg.heads * cfg.seq * cfg.seq;
    std::int64_t ref_out = ref.by_tag.count("attn_drop_out")
                               ? ref.by_tag.at("attn_drop_out")
                               : 0;
    std::int64_t ref_mask = ref.by_tag.at("attn_drop_mask");
    std::int64_t opt_mask = opt.by_tag.at("attn_drop_mask");
    if (ref_out != 4 * elems || ref_mask != elems) {
        return fmt("FAIL:reference keeps %lld + %lld B for %lld elements",
                   (long long)ref_out, (long long)ref_mask, (long long)elems);
    }
    if (opt.by_tag.count("attn_drop_out") != 0 || opt_mask != elems) {
        return "FAIL:optimized dropout keeps more than its mask";
    }
    // 5 B/element -> 1 B/element: the recompute recovers 4/5 of the cost.
    double saved = double(ref_out + ref_mask - opt_mask) / (ref_out + ref_mask);
    if (saved != 0.8) return fmt("FAIL:saved fraction %.6f, want 0.8", saved);
    return fmt("5 B/elem -> 1 B/elem over %lld elements (4/5 saved)",
               (long long)elems);
}

std::string c8_training() {
    memory_model::EncoderConfig cfg;
    cfg.hidden = 64;
    cfg.heads = 4;
    cfg.seq = 16;
    cfg.batch = 4;
    train::TrainConfig tc;
    tc.steps = 200;
    tc.lr = 1e-2;
    tc.seed = 3;  // shared: same params, batch, and mask stream per variant
    auto ref = train::run(
        layer_spec(cfg, encoder::Variant::Reference, Dtype::F32), tc);
    auto opt =
        train::run(layer_spec(cfg, encoder::Variant::Tempo, Dtype::F32), tc);
    if (!(ref.final_loss < ref.history.front().loss) ||
        !(opt.final_loss < opt.history.front().loss)) {
        return "FAIL:loss did not decrease over 200 steps";
    }
    double rel = std::abs(opt.final_loss - ref.final_loss) /
                 std::max(1e-12, std::abs(ref.final_loss));
    if (rel > 0.01) {
        return fmt("FAIL:final losses %.6f vs %.6f differ by %.2f%% > 1%%",
                   ref.final_loss, opt.final_loss, 100.0 * rel);
    }
    return fmt("200 paired steps: %.6f vs %.6f (%.3f%% apart)", ref.final_loss,
               opt.final_loss, 100.0 * rel);
}

std::string c9_throughput() {
    std::printf(
        "  note: accelerator throughput and max-batch gains are not\n"
        "  reproducible on a single-threaded CPU build; the numbers below\n"
        "  are informational only, with no pass threshold.\n");
    memory_model::EncoderConfig cfg = bert_cfg(128);
    auto report = train::bench(cfg, &table(), 2, Dtype::F32);
    for (const auto& row : report.rows) {
        std::printf("  %-10s %8.1f ms/step  %9.0f tokens/s\n",
                    row.variant.c_str(), row.mean_ms, row.tokens_per_s);
    }
    return "stated not reproducible; informational bench printed above";
}

}  // namespace

int main() {
    std::printf("acceptance gate: activation-memory toolkit\n");
    const std::vector<Criterion> criteria = {
        {1, "gelu-minimum", 1.0, c1_minimum},
        {2, "gelu-table-fit", 30.0, c2_table},
        {3, "gradient-correctness", 120.0, c3_gradients},
        {4, "in-place-equivalence", 60.0, c4_equivalence},
        {5, "memory-percentages", 1.0, c5_percentages},
        {6, "ledger-vs-model", 30.0, c6_ledger_model},
        {7, "dropout-accounting", 1.0, c7_dropout_bytes},
        {8, "training-equivalence", 120.0, c8_training},
        {9, "throughput-statement", 600.0, c9_throughput},
    };
    for (const auto& c : criteria) run_criterion(c);
    std::printf("summary: %zu/%zu criteria passed\n",
                criteria.size() - g_failures, criteria.size());
    return g_failures == 0 ? 0 : 1;
}
