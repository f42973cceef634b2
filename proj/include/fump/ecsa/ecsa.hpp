#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "fump/numerics/nn.hpp"
#include "fump/scene/graph.hpp"

namespace fump::ecsa {

using num::Var;

struct EcsaConfig {
    std::size_t d_model = 64;
    std::size_t hidden = 64;
    std::size_t depth = 2;  // hidden layers per MLP
    std::size_t edge_dim = 32;
    std::size_t k_neighbors = 4;
    std::size_t local_layers = 2;
};

/// Parameters of one equivariant graph convolution layer.
///   m_ij  = g_e([v_i, v_j, e_ij])
///   v_i  += (1/indeg_i) sum_j sigmoid(gate(m_ij)) g_x(m_ij)
///   v_i   = g_h([v_i, sum_j m_ij])
struct EgclLayer {
    num::Mlp g_e;
    num::Mlp g_x;
    num::Mlp gate;  // single linear layer to a scalar
    num::Mlp g_h;

    static EgclLayer make(const std::string& prefix, std::size_t d, std::size_t edge_dim, std::size_t hidden,
                          std::size_t depth);
    void init(num::ParameterStore& store, num::Rng& rng) const;
};

/// One EGCL pass. `edges` holds one embedded edge vector per row aligned with
/// `target`/`source`; a node without incoming edges gets a zero aggregate.
Var egcl_layer(num::Tape& tape, const EgclLayer& layer, Var nodes, Var edges, std::span<const std::size_t> target,
               std::span<const std::size_t> source);

struct GlobalGraph {
    Var features;  // kZones x d
    std::array<scene::Vec2, scene::kZones> positions{};
    std::array<scene::Vec2, scene::kZones> velocities{};
    std::vector<std::size_t> edge_target;  // 12 directed edges
    std::vector<std::size_t> edge_source;
    num::Tensor edge_raw;  // 12 x kGlobalEdgeFeatureWidth, pre-MLP
    Var edges;             // 12 x edge_dim
};

/// Frame-invariant per-node embeddings of a scene, aligned to graph node order
/// (agents first, then polylines).
struct NodeEmbeddingSet {
    Var embeddings;  // n x d
    scene::SceneGraph graph;
};

class Ecsa {
public:
    Ecsa() = default;
    explicit Ecsa(const EcsaConfig& config);

    void init(num::ParameterStore& store, num::Rng& rng) const;

    Var embed_nodes(num::Tape& tape, const scene::SceneGraph& g) const;
    Var embed_edges(num::Tape& tape, const scene::SceneGraph& g) const;
    /// PointNet pooling per zone plus mean positions and summed velocities.
    /// Empty zones get a zero feature, the ego position and zero velocity.
    GlobalGraph aggregate_global(num::Tape& tape, const scene::SceneGraph& g, Var nodes) const;
    /// One EGCL pass over the fully connected global graph.
    Var global_update(num::Tape& tape, const GlobalGraph& gg) const;
    /// V_hat for one zone: GV' = CA(GV, V, V), H = FFN(GV'), V_hat = CA(V, H, H).
    Var context_share(num::Tape& tape, Var global_row, Var zone_nodes) const;

    /// Full encoder: local EGCL layers, global aggregation and update, then
    /// context sharing added back onto each zone's node embeddings.
    NodeEmbeddingSet forward(num::Tape& tape, const scene::Scene& s) const;
    Var forward(num::Tape& tape, const scene::SceneGraph& g) const;

    const EcsaConfig& config() const { return config_; }
    const std::vector<EgclLayer>& local_layers() const { return local_; }
    const EgclLayer& global_layer() const { return global_; }
    const num::Mlp& pointnet() const { return pointnet_; }
    const num::Mlp& global_edge_mlp() const { return global_edge_; }
    const num::CrossAttention& share_global() const { return ca_global_; }
    const num::CrossAttention& share_local() const { return ca_local_; }
    const num::Mlp& share_ffn() const { return ffn_; }

private:
    EcsaConfig config_;
    num::Mlp node_init_;
    num::Mlp edge_init_;
    std::vector<EgclLayer> local_;
    num::Mlp pointnet_;
    num::Mlp global_edge_;
    EgclLayer global_;
    num::CrossAttention ca_global_;
    num::Mlp ffn_;
    num::CrossAttention ca_local_;
};

/// Encoder used when ECSA is switched off: the same node features through a
/// per-node MLP, no message passing.
class PlainEncoder {
public:
    PlainEncoder() = default;
    explicit PlainEncoder(const EcsaConfig& config);
    void init(num::ParameterStore& store, num::Rng& rng) const;
    NodeEmbeddingSet forward(num::Tape& tape, const scene::Scene& s) const;

private:
    EcsaConfig config_;
    num::Mlp mlp_;
};

/// Global edge vector r^g_ij = [encode(|c_i - c_j|), |vel_i| - |vel_j|].
std::array<double, scene::kGlobalEdgeFeatureWidth> global_edge_features(scene::Vec2 ci, scene::Vec2 vi,
                                                                        scene::Vec2 cj, scene::Vec2 vj);

}  // namespace fump::ecsa
