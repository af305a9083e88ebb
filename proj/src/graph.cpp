// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/graph.hpp"

#include "tempo/kernels.hpp"

namespace tempo {

namespace {

std::string fallback_tag(std::string tag, const char* op, std::size_t id) {
    if (!tag.empty()) return tag;
    return std::string(op) + "_" + std::to_string(id);
}

}  // namespace

NodeId Graph::leaf(Tensor value, std::string tag) {
    return tape.leaf(std::move(value), std::move(tag));
}

LazyStash Graph::input_stash(NodeId in, StashRole role) const {
    const TapeNode& producer = tape.node(in);
    if (producer.output_recipe) {
        return LazyStash::recomputable(producer.tag, role,
                                       *producer.output_recipe);
    }
    return LazyStash::materialized(producer.tag, role, producer.value);
}

NodeId Graph::matmul(NodeId a, NodeId b, std::string tag) {
    const Tensor& va = tape.value(a);
    const Tensor& vb = tape.value(b);
    if (va.shape().size() != vb.shape().size()) {
        throw DimensionError("graph matmul needs equal-rank operands, got " +
                             shape_str(va.shape()) + " and " +
                             shape_str(vb.shape()));
    }
    Tensor out = tempo::matmul(va, vb);
    tag = fallback_tag(std::move(tag), "matmul", tape.size());
    return tape.record(
        "matmul", tag, {a, b}, std::move(out),
        {input_stash(a, StashRole::SharedDownstream),
         input_stash(b, StashRole::SharedDownstream)},
        [](BackwardCtx& ctx) -> std::vector<Tensor> {
            const Tensor& g = ctx.grad_out();
            return {tempo::matmul_nt(g, ctx.stash(1)),
                    tempo::matmul_tn(ctx.stash(0), g)};
        });
}

NodeId Graph::matmul_nt(NodeId a, NodeId b, std::string tag) {
    const Tensor& va = tape.value(a);
    const Tensor& vb = tape.value(b);
    if (va.shape().size() != vb.shape().size()) {
        throw DimensionError("graph matmul_nt needs equal-rank operands, got " +
                             shape_str(va.shape()) + " and " +
                             shape_str(vb.shape()));
    }
    Tensor out = tempo::matmul_nt(va, vb);
    tag = fallback_tag(std::move(tag), "matmul_nt", tape.size());
    return tape.record(
        "matmul_nt", tag, {a, b}, std::move(out),
        {input_stash(a, StashRole::SharedDownstream),
         input_stash(b, StashRole::SharedDownstream)},
        [](BackwardCtx& ctx) -> std::vector<Tensor> {
            // c = a b^T: da = g b, db = g^T a.
            const Tensor& g = ctx.grad_out();
            return {tempo::matmul(g, ctx.stash(1)),
                    tempo::matmul_tn(g, ctx.stash(0))};
        });
}

NodeId Graph::scale(NodeId a, double c, std::string tag) {
    Tensor out = tempo::scale(tape.value(a), c);
    tag = fallback_tag(std::move(tag), "scale", tape.size());
    return tape.record("scale", tag, {a}, std::move(out), {},
                       [c](BackwardCtx& ctx) -> std::vector<Tensor> {
                           return {tempo::scale(ctx.grad_out(), c)};
                       });
}

NodeId Graph::add(NodeId a, NodeId b, std::string tag) {
    Tensor out = tempo::add(tape.value(a), tape.value(b));
    tag = fallback_tag(std::move(tag), "add", tape.size());
    return tape.record("add", tag, {a, b}, std::move(out), {},
                       [](BackwardCtx& ctx) -> std::vector<Tensor> {
                           return {ctx.grad_out(), ctx.grad_out()};
                       });
}

NodeId Graph::split_heads(NodeId x, std::int64_t heads, std::string tag) {
    Tensor out = tempo::split_heads(tape.value(x), heads);
    tag = fallback_tag(std::move(tag), "split_heads", tape.size());
    return tape.record("split_heads", tag, {x}, std::move(out), {},
                       [](BackwardCtx& ctx) -> std::vector<Tensor> {
                           return {tempo::merge_heads(ctx.grad_out())};
                       });
}

NodeId Graph::merge_heads(NodeId x, std::string tag) {
    const Tensor& vx = tape.value(x);
    std::int64_t heads = vx.shape().size() == 4 ? vx.shape()[1] : -1;
    Tensor out = tempo::merge_heads(vx);
    tag = fallback_tag(std::move(tag), "merge_heads", tape.size());
    return tape.record("merge_heads", tag, {x}, std::move(out), {},
                       [heads](BackwardCtx& ctx) -> std::vector<Tensor> {
                           return {tempo::split_heads(ctx.grad_out(), heads)};
                       });
}

NodeId Graph::linear(NodeId x, NodeId w, NodeId b, std::string tag) {
    const Tensor& vx = tape.value(x);
    const Tensor& vw = tape.value(w);
    const Tensor& vb = tape.value(b);
    if (vw.shape().size() != 2 || vx.shape().back() != vw.shape()[0]) {
        throw DimensionError("linear shapes " + shape_str(vx.shape()) +
                             " and " + shape_str(vw.shape()) + " incompatible");
    }
    Tensor out = tempo::add_bias(tempo::matmul(vx, vw), vb);
    tag = fallback_tag(std::move(tag), "linear", tape.size());
    return tape.record(
        "linear", tag, {x, w, b}, std::move(out),
        {input_stash(x, StashRole::SharedDownstream)},
        [](BackwardCtx& ctx) -> std::vector<Tensor> {
            const Tensor& g = ctx.grad_out();
            const Tensor& x_val = ctx.stash(0);
            const Tensor& w_val = ctx.input_value(1);
            std::int64_t in = x_val.shape().back();
            std::int64_t out_dim = g.shape().back();
            Tensor x2 = x_val.reshaped({x_val.numel() / in, in});
            Tensor g2 = g.reshaped({g.numel() / out_dim, out_dim});
            return {tempo::matmul_nt(g, w_val), tempo::matmul_tn(x2, g2),
                    tempo::sum_to_bias(g)};
        });
}

NodeId Graph::mse_loss(NodeId pred, Tensor target, std::string tag) {
    const Tensor& vp = tape.value(pred);
    if (!shape_eq(vp.shape(), target.shape())) {
        throw DimensionError("mse_loss shapes " + shape_str(vp.shape()) +
                             " and " + shape_str(target.shape()) + " differ");
    }
    Tensor out = Tensor::full({}, tempo::mse(vp, target), vp.dtype());
    tag = fallback_tag(std::move(tag), "mse_loss", tape.size());
    return tape.record(
        "mse_loss", tag, {pred}, std::move(out), {},
        [target](BackwardCtx& ctx) -> std::vector<Tensor> {
            Tensor g = tempo::mse_grad(ctx.input_value(0), target);
            return {tempo::scale(g, ctx.grad_out().get(0))};
        });
}

GradientMap Graph::backward_scalar(NodeId root) {
    const Tensor& v = tape.value(root);
    if (v.numel() != 1) {
        throw DimensionError("backward_scalar root has shape " +
                             shape_str(v.shape()));
    }
    return tape.backward(root, Tensor::full(v.shape(), 1.0, v.dtype()));
}

}  // namespace tempo
