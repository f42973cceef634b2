#include "fump/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fump/numerics/checkpoint.hpp"
#include "fump/numerics/tape.hpp"

namespace fump::train {

using nlohmann::json;
using nlohmann::ordered_json;
using scene::Scene;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw std::invalid_argument("unknown config key '" + where + key + "'");
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string rng_state(const std::mt19937_64& rng) {
    std::ostringstream o;
    o << rng;
    return o.str();
}

std::mt19937_64 rng_from(const std::string& s) {
    std::istringstream in(s);
    std::mt19937_64 rng;
    in >> rng;
    if (!in) throw std::runtime_error("checkpoint: bad rng state");
    return rng;
}

uttd::Model build_model(const TrainConfig& c) { return uttd::Model(c.model_config()); }

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
    if (epochs == 0) fail("epochs must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(lr > 0.0)) fail("lr must be positive");
    if (lr_schedule != "cosine" && lr_schedule != "constant") fail("lr_schedule must be \"cosine\" or \"constant\"");
    if (!(lr_min_fraction >= 0.0 && lr_min_fraction <= 1.0)) fail("lr_min_fraction must lie in [0, 1]");
    if (queue_capacity == 0) fail("queue.capacity must be positive");
    if (!(queue_gamma >= 0.0 && queue_gamma <= 1.0)) fail("queue.gamma must lie in [0, 1]");
    if (!(mask_probability >= 0.0 && mask_probability <= 1.0)) fail("mask_probability must lie in [0, 1]");
    if (!(hinge_d >= 0.0)) fail("hinge_d must be >= 0");
    for (double w : {weights.motion, weights.plan1, weights.plan2, weights.stp}) {
        if (!(w >= 0.0)) fail("loss weights must be >= 0");
    }
    if (encoder.d_model == 0 || encoder.hidden == 0 || encoder.edge_dim == 0 || encoder.k_neighbors == 0) {
        fail("encoder widths and k_neighbors must be positive");
    }
}

uttd::ModelConfig TrainConfig::model_config() const {
    uttd::ModelConfig m;
    m.encoder = encoder;
    m.hinge_d = hinge_d;
    m.mask_probability = mask_probability;
    m.use_ecsa = use_ecsa;
    m.use_stage2 = use_stage2;
    m.use_memory = use_memory;
    m.joint_motion = joint_motion;
    m.weights = weights;
    return m;
}

std::string TrainConfig::to_json() const {
    ordered_json j;
    j["seed"] = seed;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["lr_schedule"] = lr_schedule;
    j["lr_min_fraction"] = lr_min_fraction;
    j["weights"] = {{"motion", weights.motion}, {"plan1", weights.plan1}, {"plan2", weights.plan2}, {"stp", weights.stp}};
    j["queue"] = {{"capacity", queue_capacity}, {"gamma", queue_gamma}};
    j["mask_probability"] = mask_probability;
    j["hinge_d"] = hinge_d;
    j["use_ecsa"] = use_ecsa;
    j["use_stage2"] = use_stage2;
    j["use_memory"] = use_memory;
    j["joint_motion"] = joint_motion;
    j["encoder"] = {{"d_model", encoder.d_model},       {"hidden", encoder.hidden},
                    {"depth", encoder.depth},           {"edge_dim", encoder.edge_dim},
                    {"k_neighbors", encoder.k_neighbors}, {"local_layers", encoder.local_layers}};
    j["train_path"] = train_path;
    j["eval_path"] = eval_path;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j,
                   {"seed", "epochs", "batch_size", "lr", "lr_schedule", "lr_min_fraction", "weights", "queue", "mask_probability", "hinge_d", "use_ecsa",
                    "use_stage2", "use_memory", "joint_motion", "encoder", "train_path", "eval_path"},
                   "");
    TrainConfig c;
    try {
        read_field(j, "seed", c.seed);
        read_field(j, "epochs", c.epochs);
        read_field(j, "batch_size", c.batch_size);
        read_field(j, "lr", c.lr);
        read_field(j, "lr_schedule", c.lr_schedule);
        read_field(j, "lr_min_fraction", c.lr_min_fraction);
        if (j.contains("weights")) {
            const json& w = j.at("weights");
            reject_unknown(w, {"motion", "plan1", "plan2", "stp"}, "weights.");
            read_field(w, "motion", c.weights.motion);
            read_field(w, "plan1", c.weights.plan1);
            read_field(w, "plan2", c.weights.plan2);
            read_field(w, "stp", c.weights.stp);
        }
        if (j.contains("queue")) {
            const json& q = j.at("queue");
            reject_unknown(q, {"capacity", "gamma"}, "queue.");
            read_field(q, "capacity", c.queue_capacity);
            read_field(q, "gamma", c.queue_gamma);
        }
        read_field(j, "mask_probability", c.mask_probability);
        read_field(j, "hinge_d", c.hinge_d);
        read_field(j, "use_ecsa", c.use_ecsa);
        read_field(j, "use_stage2", c.use_stage2);
        read_field(j, "use_memory", c.use_memory);
        read_field(j, "joint_motion", c.joint_motion);
        if (j.contains("encoder")) {
            const json& e = j.at("encoder");
            reject_unknown(e, {"d_model", "hidden", "depth", "edge_dim", "k_neighbors", "local_layers"}, "encoder.");
            read_field(e, "d_model", c.encoder.d_model);
            read_field(e, "hidden", c.encoder.hidden);
            read_field(e, "depth", c.encoder.depth);
            read_field(e, "edge_dim", c.encoder.edge_dim);
            read_field(e, "k_neighbors", c.encoder.k_neighbors);
            read_field(e, "local_layers", c.encoder.local_layers);
        }
        read_field(j, "train_path", c.train_path);
        read_field(j, "eval_path", c.eval_path);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config field has the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

std::uint64_t TrainConfig::hash() const {
    TrainConfig c = *this;
    c.train_path.clear();
    c.eval_path.clear();
    return num::fnv1a64(c.to_json());
}

std::string hash_hex(std::uint64_t h) {
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << h;
    return o.str();
}

double learning_rate(const TrainConfig& c, std::size_t step, std::size_t total_steps) {
    if (c.lr_schedule == "constant" || total_steps <= 1) return c.lr;
    const double u = static_cast<double>(std::min(step, total_steps - 1)) / static_cast<double>(total_steps - 1);
    const double floor = c.lr * c.lr_min_fraction;
    return floor + 0.5 * (c.lr - floor) * (1.0 + std::cos(std::numbers::pi * u));
}

std::string loss_csv(const std::vector<LossRecord>& records) {
    std::ostringstream o;
    o << std::setprecision(17);
    o << "epoch,batch,total,motion,plan1,plan2,stp,threshold,queue_size\n";
    for (const LossRecord& r : records) {
        o << r.epoch << ',' << r.batch << ',' << r.total << ',' << r.motion << ',' << r.plan1 << ',' << r.plan2 << ','
          << r.stp << ',' << r.threshold << ',' << r.queue_size << '\n';
    }
    return o.str();
}

TrainState::TrainState(const TrainConfig& c)
    : config(c), model(build_model(c)), queue(c.queue_capacity, c.queue_gamma), rng(c.seed) {
    c.validate();
    model.init(store, rng);
}

std::vector<LossRecord> train(TrainState& st, const std::vector<Scene>& scenes,
                              std::optional<std::size_t> stop_after_epochs) {
    if (scenes.empty()) throw std::invalid_argument("train: no samples");
    const TrainConfig& cfg = st.config;
    const std::size_t batches = (scenes.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = cfg.epochs * batches;
    std::size_t last = cfg.epochs;
    if (stop_after_epochs) last = std::min(last, st.epochs_done + *stop_after_epochs);

    std::vector<LossRecord> records;
    std::vector<std::size_t> order(scenes.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (; st.epochs_done < last; ++st.epochs_done) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(st.rng() % i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t b0 = 0, batch = 0; b0 < order.size(); b0 += cfg.batch_size, ++batch) {
            const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(b1 - b0);
            num::Tape tape(&st.store);
            LossRecord rec{st.epochs_done, batch};
            std::vector<memory::MemoryEntry> candidates;
            num::Var total;
            const memory::HardSampleQueue* queue = cfg.use_memory && cfg.use_stage2 ? &st.queue : nullptr;
            for (std::size_t k = b0; k < b1; ++k) {
                const Scene& s = scenes[order[k]];
                const uttd::SceneLoss l = st.model.scene_loss(tape, s, queue, unit(st.rng));
                const double v = l.total.value()[0];
                if (!finite(v)) {
                    throw TrainingError("non-finite loss at epoch " + std::to_string(st.epochs_done) + ", batch " +
                                        std::to_string(batch) + ", scene id " + std::to_string(s.scene_id) +
                                        " (motion " + std::to_string(l.motion) + ", plan1 " + std::to_string(l.plan1) +
                                        ", plan2 " + std::to_string(l.plan2) + ", stp " + std::to_string(l.stp) + ")");
                }
                total = total.valid() ? num::add(total, l.total) : l.total;
                rec.total += inv * v;
                rec.motion += inv * l.motion;
                rec.plan1 += inv * l.plan1;
                rec.plan2 += inv * l.plan2;
                rec.stp += inv * l.stp;
                candidates.insert(candidates.end(), l.candidates.begin(), l.candidates.end());
            }
            tape.backward(num::scale(total, inv));
            num::adam_step(st.store, num::AdamConfig{learning_rate(cfg, st.epochs_done * batches + batch, total_steps)});

            if (cfg.use_memory && !candidates.empty()) {
                double mean = 0.0;
                for (const auto& c : candidates) mean += c.loss;
                st.queue.update_threshold(mean / static_cast<double>(candidates.size()));
                st.queue.batch_update(candidates, st.rng);
            }
            rec.threshold = st.queue.threshold();
            rec.queue_size = st.queue.size();
            records.push_back(rec);
        }
    }
    return records;
}

void save_checkpoint(const TrainState& st, const std::filesystem::path& path) {
    num::CheckpointFile f;
    f.config_hash = st.config.hash();
    f.put("params", num::encode_parameters(st.store));
    f.put("adam", num::encode_adam_state(st.store));
    f.put("memory", st.queue.serialize());
    f.put("config", st.config.to_json());
    f.put("rng", rng_state(st.rng));
    num::ByteWriter meta;
    meta.u64(st.epochs_done);
    f.put("meta", meta.take());
    num::write_checkpoint(path, f);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
    const num::CheckpointFile f = num::read_checkpoint(path);
    const TrainConfig cfg = TrainConfig::from_json(f.require("config"));
    if (cfg.hash() != f.config_hash) {
        throw std::runtime_error("checkpoint " + path.string() + ": stored config hash " + hash_hex(f.config_hash) +
                                 " does not match its config (" + hash_hex(cfg.hash()) + ")");
    }
    TrainState st(cfg);
    num::decode_parameters(f.require("params"), st.store);
    num::decode_adam_state(f.require("adam"), st.store);
    st.queue = memory::HardSampleQueue::deserialize(f.require("memory"));
    st.rng = rng_from(f.require("rng"));
    num::ByteReader meta(f.require("meta"));
    st.epochs_done = meta.u64();
    return st;
}

void check_config_hash(const TrainState& st, const TrainConfig& expected) {
    if (st.config.hash() != expected.hash()) {
        throw std::runtime_error("config hash mismatch: checkpoint " + hash_hex(st.config.hash()) + ", config " +
                                 hash_hex(expected.hash()));
    }
}

std::size_t threads_from_env() {
    const char* v = std::getenv("FUMP_THREADS");
    if (v == nullptr || *v == '\0') return 1;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) throw std::invalid_argument(std::string("FUMP_THREADS must be a positive integer, got '") + v + "'");
    return static_cast<std::size_t>(n);
}

metrics::EvalReport evaluate(const TrainState& st, const std::vector<Scene>& scenes, const EvalOptions& options) {
    if (scenes.empty()) throw std::invalid_argument("no samples");
    const std::size_t threads = std::min(scenes.size(), options.threads > 0 ? options.threads : threads_from_env());
    const bool motion = st.config.joint_motion;
    std::vector<metrics::SampleMetrics> per(scenes.size());

    auto run = [&](std::size_t i) {
        const Scene& s = scenes[i];
        const uttd::PlanResult plan = uttd::infer_plan(st.model, st.store, &st.queue, s, options.state_mode);
        metrics::SampleMetrics m;
        m.l2 = metrics::l2_at_horizons(plan.plan, s.ego_future_gt);
        m.collision_step = metrics::scene_collision_step(s, plan.plan, options.radii);
        if (motion) {
            const uttd::MotionResult mr = uttd::infer_motion_refined(st.model, st.store, s, options.motion_refine);
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t a = 0; a < s.agents.size(); ++a) {
                if (a == s.ego_index()) continue;
                sum += metrics::min_ade(mr.proposals[a], s.agents[a].future_gt);
                ++n;
            }
            if (n > 0) m.min_ade = sum / static_cast<double>(n);
        }
        per[i] = m;
    };

    if (threads <= 1) {
        for (std::size_t i = 0; i < scenes.size(); ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < scenes.size(); i += threads) run(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    metrics::EvalReport r = metrics::aggregate(per);
    r.config_hash = hash_hex(st.config.hash());
    r.state_mode = options.state_mode == uttd::StateMode::Predicted ? "predicted" : "ground_truth";
    return r;
}

std::pair<double, double> trajectory_counts(const std::vector<Scene>& scenes) {
    double ego = 0.0, total = 0.0;
    for (const Scene& s : scenes) {
        ego += 1.0;
        total += static_cast<double>(s.agents.size());
    }
    return {ego, total};
}

std::vector<AblationRow> ablate(const TrainConfig& base, const std::vector<Scene>& train_set,
                                const std::vector<Scene>& heldout, const EvalOptions& options) {
    struct Variant {
        const char* name;
        bool ump, ecsa, uttd;
    };
    const Variant variants[] = {
        {"baseline", false, false, false},
        {"+UMP", true, false, false},
        {"+UMP+ECSA", true, true, false},
        {"+UMP+ECSA+UTTD", true, true, true},
    };
    const auto [d_ego, d_total] = trajectory_counts(train_set);
    std::vector<AblationRow> rows;
    for (const Variant& v : variants) {
        TrainConfig c = base;
        c.joint_motion = v.ump;
        c.use_ecsa = v.ecsa;
        c.use_stage2 = v.uttd;
        c.use_memory = v.uttd;
        TrainState st(c);
        train(st, train_set);
        AblationRow row{v.name, v.ump, v.ecsa, v.uttd, evaluate(st, heldout, options), 0.0};
        rows.push_back(std::move(row));
    }
    const double base_l2 = rows.front().report.l2.avg;
    for (AblationRow& r : rows) {
        r.cegr_l2 = &r == &rows.front() ? 0.0 : metrics::cegr(r.report.l2.avg, base_l2, d_ego, d_total);
        r.report.cegr.emplace_back("L2", r.cegr_l2);
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(4);
    o << "config            UMP  ECSA  UTTD  L2_1s   L2_2s   L2_3s   L2_avg  Col_avg  CEGR_L2(%)\n";
    for (const AblationRow& r : rows) {
        o << std::left << std::setw(18) << r.name << std::right << (r.joint_motion ? " x " : " - ") << "  "
          << (r.use_ecsa ? "  x " : "  - ") << "  " << (r.use_stage2 ? "  x " : "  - ") << "  " << r.report.l2.at[0]
          << "  " << r.report.l2.at[1] << "  " << r.report.l2.at[2] << "  " << r.report.l2.avg << "  "
          << r.report.collision.avg << "  " << std::setprecision(2) << r.cegr_l2 << std::setprecision(4) << '\n';
    }
    return o.str();
}

}  // namespace fump::train
