#include "fump/ecsa/ecsa.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fump::ecsa {

using num::Tensor;

EgclLayer EgclLayer::make(const std::string& prefix, std::size_t d, std::size_t edge_dim, std::size_t hidden,
                          std::size_t depth) {
    EgclLayer l;
    l.g_e = num::Mlp(prefix + ".ge", num::mlp_widths(2 * d + edge_dim, hidden, depth, d));
    l.g_x = num::Mlp(prefix + ".gx", num::mlp_widths(d, hidden, depth, d));
    l.gate = num::Mlp(prefix + ".gate", {d, 1});
    l.g_h = num::Mlp(prefix + ".gh", num::mlp_widths(2 * d, hidden, depth, d));
    return l;
}

void EgclLayer::init(num::ParameterStore& store, num::Rng& rng) const {
    g_e.init(store, rng);
    g_x.init(store, rng, 0.5);
    gate.init(store, rng);
    g_h.init(store, rng);
}

Var egcl_layer(num::Tape& tape, const EgclLayer& layer, Var nodes, Var edges, std::span<const std::size_t> target,
               std::span<const std::size_t> source) {
    const std::size_t n = nodes.rows();
    const std::size_t d = nodes.cols();
    if (target.size() != source.size() || edges.rows() != target.size()) {
        throw std::invalid_argument("egcl_layer: edge arrays disagree in length");
    }
    if (target.empty()) {
        const Var zero = tape.constant(Tensor::matrix(n, d));
        const Var parts[] = {nodes, zero};
        return layer.g_h.forward(tape, num::concat_cols(parts));
    }
    std::vector<double> indeg(n, 0.0);
    for (std::size_t t : target) indeg[t] += 1.0;
    Tensor inv = Tensor::matrix(target.size(), 1);
    for (std::size_t e = 0; e < target.size(); ++e) inv[e] = 1.0 / indeg[target[e]];

    const Var vi = num::gather_rows(nodes, target);
    const Var vj = num::gather_rows(nodes, source);
    const Var in_parts[] = {vi, vj, edges};
    const Var m = layer.g_e.forward(tape, num::concat_cols(in_parts));
    const Var c = num::mul(num::sigmoid(layer.gate.forward(tape, m)), tape.constant(std::move(inv)));
    const Var delta = num::scatter_add_rows(num::mul_col(layer.g_x.forward(tape, m), c), target, n);
    const Var x1 = num::add(nodes, delta);
    const Var agg = num::scatter_add_rows(m, target, n);
    const Var h_parts[] = {x1, agg};
    return layer.g_h.forward(tape, num::concat_cols(h_parts));
}

std::array<double, scene::kGlobalEdgeFeatureWidth> global_edge_features(scene::Vec2 ci, scene::Vec2 vi,
                                                                        scene::Vec2 cj, scene::Vec2 vj) {
    std::array<double, scene::kGlobalEdgeFeatureWidth> r{};
    const auto enc = scene::encode_distance(geo::distance(ci, cj));
    std::copy(enc.begin(), enc.end(), r.begin());
    r[scene::kDistanceEncodingWidth] = geo::norm(vi) - geo::norm(vj);
    return r;
}

Ecsa::Ecsa(const EcsaConfig& c) : config_(c) {
    const std::size_t d = c.d_model;
    node_init_ = num::Mlp("ecsa.node", num::mlp_widths(scene::kNodeFeatureWidth, c.hidden, c.depth, d));
    edge_init_ = num::Mlp("ecsa.edge", num::mlp_widths(scene::kEdgeFeatureWidth, c.hidden, c.depth, c.edge_dim));
    for (std::size_t l = 0; l < c.local_layers; ++l) {
        local_.push_back(EgclLayer::make("ecsa.local" + std::to_string(l), d, c.edge_dim, c.hidden, c.depth));
    }
    pointnet_ = num::Mlp("ecsa.pointnet", num::mlp_widths(d, c.hidden, c.depth, d));
    global_edge_ =
        num::Mlp("ecsa.gedge", num::mlp_widths(scene::kGlobalEdgeFeatureWidth, c.hidden, c.depth, c.edge_dim));
    global_ = EgclLayer::make("ecsa.global", d, c.edge_dim, c.hidden, c.depth);
    ca_global_ = num::CrossAttention("ecsa.share.global", d);
    ffn_ = num::Mlp("ecsa.share.ffn", num::mlp_widths(d, c.hidden, c.depth, d));
    ca_local_ = num::CrossAttention("ecsa.share.local", d);
}

void Ecsa::init(num::ParameterStore& store, num::Rng& rng) const {
    node_init_.init(store, rng);
    edge_init_.init(store, rng);
    for (const auto& l : local_) l.init(store, rng);
    pointnet_.init(store, rng);
    global_edge_.init(store, rng);
    global_.init(store, rng);
    ca_global_.init(store, rng);
    ffn_.init(store, rng);
    ca_local_.init(store, rng);
}

Var Ecsa::embed_nodes(num::Tape& tape, const scene::SceneGraph& g) const {
    return node_init_.forward(tape, tape.constant(g.node_features));
}

Var Ecsa::embed_edges(num::Tape& tape, const scene::SceneGraph& g) const {
    if (g.edge_count() == 0) return tape.constant(Tensor::matrix(0, config_.edge_dim));
    return edge_init_.forward(tape, tape.constant(g.edge_features));
}

GlobalGraph Ecsa::aggregate_global(num::Tape& tape, const scene::SceneGraph& g, Var nodes) const {
    GlobalGraph gg;
    std::vector<std::vector<std::size_t>> groups;
    const scene::Vec2 ego_pos = g.nodes[g.ego_node].position;
    for (std::size_t z = 0; z < scene::kZones; ++z) {
        const auto& members = g.zones[z].nodes;
        groups.push_back(members);
        if (members.empty()) {
            gg.positions[z] = ego_pos;
            continue;
        }
        scene::Vec2 sum_pos, sum_vel;
        for (std::size_t i : members) {
            sum_pos = sum_pos + g.nodes[i].position;
            sum_vel = sum_vel + g.nodes[i].velocity;
        }
        gg.positions[z] = (1.0 / static_cast<double>(members.size())) * sum_pos;
        gg.velocities[z] = sum_vel;
    }
    gg.features = num::segment_max(pointnet_.forward(tape, nodes), groups);
    gg.edge_raw = Tensor::matrix(scene::kZones * (scene::kZones - 1), scene::kGlobalEdgeFeatureWidth);
    std::size_t e = 0;
    for (std::size_t i = 0; i < scene::kZones; ++i) {
        for (std::size_t j = 0; j < scene::kZones; ++j) {
            if (i == j) continue;
            gg.edge_target.push_back(i);
            gg.edge_source.push_back(j);
            const auto r = global_edge_features(gg.positions[i], gg.velocities[i], gg.positions[j], gg.velocities[j]);
            std::copy(r.begin(), r.end(), gg.edge_raw.row_span(e).begin());
            ++e;
        }
    }
    gg.edges = global_edge_.forward(tape, tape.constant(gg.edge_raw));
    return gg;
}

Var Ecsa::global_update(num::Tape& tape, const GlobalGraph& gg) const {
    return egcl_layer(tape, global_, gg.features, gg.edges, gg.edge_target, gg.edge_source);
}

Var Ecsa::context_share(num::Tape& tape, Var global_row, Var zone_nodes) const {
    const Var gv = ca_global_.forward(tape, global_row, zone_nodes, zone_nodes);
    const Var h = ffn_.forward(tape, gv);
    return ca_local_.forward(tape, zone_nodes, h, h);
}

Var Ecsa::forward(num::Tape& tape, const scene::SceneGraph& g) const {
    Var x = embed_nodes(tape, g);
    const Var edges = embed_edges(tape, g);
    for (const auto& layer : local_) x = egcl_layer(tape, layer, x, edges, g.edge_target, g.edge_source);

    const GlobalGraph gg = aggregate_global(tape, g, x);
    const Var global = global_update(tape, gg);

    std::vector<Var> blocks;
    std::vector<std::size_t> order;
    for (std::size_t z = 0; z < scene::kZones; ++z) {
        const auto& members = g.zones[z].nodes;
        if (members.empty()) continue;
        const Var v = num::gather_rows(x, members);
        const std::size_t row[] = {z};
        const Var v_hat = context_share(tape, num::gather_rows(global, row), v);
        blocks.push_back(num::add(v, v_hat));
        order.insert(order.end(), members.begin(), members.end());
    }
    std::vector<std::size_t> inverse(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) inverse[order[i]] = i;
    return num::gather_rows(num::concat_rows(blocks), inverse);
}

NodeEmbeddingSet Ecsa::forward(num::Tape& tape, const scene::Scene& s) const {
    NodeEmbeddingSet out;
    out.graph = scene::build_subgraphs(s, config_.k_neighbors);
    out.embeddings = forward(tape, out.graph);
    return out;
}

PlainEncoder::PlainEncoder(const EcsaConfig& c) : config_(c) {
    mlp_ = num::Mlp("plain.node", num::mlp_widths(scene::kNodeFeatureWidth, c.hidden, c.depth + 1, c.d_model));
}

void PlainEncoder::init(num::ParameterStore& store, num::Rng& rng) const { mlp_.init(store, rng); }

NodeEmbeddingSet PlainEncoder::forward(num::Tape& tape, const scene::Scene& s) const {
    NodeEmbeddingSet out;
    out.graph = scene::build_subgraphs(s, config_.k_neighbors);
    out.embeddings = mlp_.forward(tape, tape.constant(out.graph.node_features));
    return out;
}

}  // namespace fump::ecsa
