#include "fump/memory/queue.hpp"

#include <stdexcept>

#include "fump/numerics/checkpoint.hpp"

namespace fump::memory {

namespace {
constexpr std::uint32_t kQueueFormatVersion = 1;
}

HardSampleQueue::HardSampleQueue(std::size_t capacity, double gamma) : capacity_(capacity), gamma_(gamma) {
    if (capacity == 0) throw std::invalid_argument("HardSampleQueue: capacity must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("HardSampleQueue: gamma must lie in (0, 1)");
}

double HardSampleQueue::update_threshold(double batch_mean_loss) {
    threshold_ = memory::update_threshold(threshold_, batch_mean_loss, gamma_);
    return threshold_;
}

BatchUpdateStats HardSampleQueue::batch_update(std::span<const MemoryEntry> candidates, std::mt19937_64& rng) {
    BatchUpdateStats stats;
    const MemoryEntry* best_rejected = nullptr;
    for (const MemoryEntry& c : candidates) {
        bool admitted = false;
        if (c.loss > threshold_) {
            if (entries_.size() < capacity_) {
                entries_.push_back(c);
                admitted = true;
            } else {
                std::size_t lowest = 0;
                for (std::size_t i = 1; i < entries_.size(); ++i) {
                    if (entries_[i].loss < entries_[lowest].loss) lowest = i;
                }
                if (c.loss > entries_[lowest].loss) {
                    entries_[lowest] = c;
                    admitted = true;
                    ++stats.evicted;
                }
            }
        }
        if (admitted) {
            ++stats.admitted;
        } else if (best_rejected == nullptr || c.loss > best_rejected->loss) {
            best_rejected = &c;
        }
    }
    if (stats.admitted > 0 && !entries_.empty() && best_rejected != nullptr) {
        std::uniform_int_distribution<std::size_t> slot(0, entries_.size() - 1);
        entries_[slot(rng)] = *best_rejected;
        stats.random_replacement = true;
    }
    return stats;
}

double mean_step_distance(const scene::Trajectory& a, const scene::Trajectory& b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) s += geo::distance(a[t], b[t]);
    return s / static_cast<double>(a.size());
}

std::optional<std::size_t> HardSampleQueue::match(const scene::Trajectory& traj) const {
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const double d = mean_step_distance(entries_[i].trajectory, traj);
        if (!best || d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

std::string HardSampleQueue::serialize() const {
    num::ByteWriter w;
    w.u32(kQueueFormatVersion);
    w.u64(capacity_);
    w.f64(gamma_);
    w.f64(threshold_);
    w.u64(entries_.size());
    for (const auto& e : entries_) {
        for (const auto& p : e.trajectory) {
            w.f64(p.x);
            w.f64(p.y);
        }
        w.f64(e.loss);
        w.u64(e.embedding.size());
        for (double v : e.embedding) w.f64(v);
    }
    return w.take();
}

HardSampleQueue HardSampleQueue::deserialize(std::string_view bytes) {
    num::ByteReader r(bytes);
    const std::uint32_t version = r.u32();
    if (version != kQueueFormatVersion) {
        throw std::runtime_error("memory queue: unsupported format version " + std::to_string(version));
    }
    const std::uint64_t capacity = r.u64();
    const double gamma = r.f64();
    HardSampleQueue q(capacity, gamma);
    q.threshold_ = r.f64();
    const std::uint64_t n = r.u64();
    if (n > capacity) throw std::runtime_error("memory queue: more entries than capacity");
    for (std::uint64_t i = 0; i < n; ++i) {
        MemoryEntry e;
        for (auto& p : e.trajectory) {
            p.x = r.f64();
            p.y = r.f64();
        }
        e.loss = r.f64();
        e.embedding.resize(r.u64());
        for (double& v : e.embedding) v = r.f64();
        q.entries_.push_back(std::move(e));
    }
    if (!r.done()) throw std::runtime_error("memory queue: trailing bytes");
    return q;
}

num::Tensor trajectory_row(const scene::Trajectory& traj, double scale) {
    num::Tensor t = num::Tensor::matrix(1, 2 * traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        t[2 * i] = traj[i].x / scale;
        t[2 * i + 1] = traj[i].y / scale;
    }
    return t;
}

MemoryFusion::MemoryFusion(std::size_t d, std::size_t hidden, std::size_t depth)
    : psi_("memory.psi", num::mlp_widths(2 * scene::kHorizon, hidden, depth, d)), fusion_("memory.fusion", {2 * d, d}) {}

void MemoryFusion::init(num::ParameterStore& store, num::Rng& rng) const {
    psi_.init(store, rng);
    fusion_.init(store, rng, 0.5);
    // Start as exactly Q_p; the trajectory block is learned from zero.
    num::Tensor& w = store.at(fusion_.weight_name(0)).value;
    const std::size_t d = w.cols();
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) w(i, j) = i == j ? 1.0 : 0.0;
}

num::Var MemoryFusion::fuse(num::Tape& tape, num::Var q_row, const scene::Trajectory& traj) const {
    const num::Var code = psi_.forward(tape, tape.constant(trajectory_row(traj, kTrajectoryInputScale)));
    const num::Var parts[] = {q_row, code};
    return fusion_.forward(tape, num::concat_cols(parts));
}

}  // namespace fump::memory
