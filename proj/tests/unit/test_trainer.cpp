#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fump/cli/config.hpp"
#include "fump/data/generator.hpp"
#include "fump/train/trainer.hpp"

using namespace fump;
using namespace fump::train;

namespace {

TrainConfig tiny() {
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 4;
    c.lr = 1e-3;
    c.encoder.d_model = 8;
    c.encoder.hidden = 8;
    c.encoder.edge_dim = 4;
    c.encoder.depth = 1;
    c.queue_capacity = 6;
    return c;
}

std::vector<scene::Scene> scenes(std::uint64_t seed, std::size_t n) {
    data::ScenarioConfig sc;
    sc.min_agents = 2;
    sc.max_agents = 4;
    return data::generate_dataset(seed, n, sc);
}

std::filesystem::path temp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("learning_rate: cosine endpoints and constant") {
    TrainConfig c = tiny();
    c.lr = 1e-3;
    c.lr_min_fraction = 0.1;
    CHECK(learning_rate(c, 0, 100) == doctest::Approx(1e-3));
    CHECK(learning_rate(c, 50, 101) == doctest::Approx(0.55e-3));
    CHECK(learning_rate(c, 100, 101) == doctest::Approx(1e-4));
    c.lr_schedule = "constant";
    CHECK(learning_rate(c, 70, 100) == 1e-3);
}

TEST_CASE("TrainConfig: validation and JSON") {
    TrainConfig c = tiny();
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK_THROWS_WITH_AS(TrainConfig::from_json(R"({"epochs": 3, "epoch": 4})"), doctest::Contains("epoch"),
                         std::invalid_argument);
    const TrainConfig back = TrainConfig::from_json(tiny().to_json());
    CHECK(back.to_json() == tiny().to_json());
    CHECK(back.hash() == tiny().hash());
    TrainConfig other = tiny();
    other.train_path = "elsewhere.jsonl";
    CHECK(other.hash() == tiny().hash());
    other.lr = 2e-3;
    CHECK(other.hash() != tiny().hash());
}

TEST_CASE("train: same seed, same run") {
    const auto data = scenes(1, 12);
    TrainState a(tiny()), b(tiny());
    const auto ra = train::train(a, data);
    const auto rb = train::train(b, data);
    CHECK(ra == rb);
    CHECK(a.queue == b.queue);
    for (std::size_t i = 0; i < a.store.size(); ++i) CHECK(a.store.at(i).value.data()[0] == b.store.at(i).value.data()[0]);
    CHECK(ra.size() == 2 * 3);
    for (const auto& r : ra) CHECK(std::isfinite(r.total));
}

TEST_CASE("train: no motion loss without joint motion") {
    TrainConfig c = tiny();
    c.joint_motion = false;
    c.epochs = 1;
    TrainState st(c);
    for (const auto& r : train::train(st, scenes(2, 8))) {
        CHECK(r.motion == 0.0);
        CHECK(r.queue_size == 0);
    }
}

TEST_CASE("checkpoint: resume equals an uninterrupted run") {
    const auto data = scenes(3, 8);
    TrainState full(tiny());
    const auto all = train::train(full, data);

    TrainState half(tiny());
    auto first = train::train(half, data, 1);
    const auto path = temp("fump_resume.ckpt");
    save_checkpoint(half, path);
    TrainState resumed = load_checkpoint(path);
    CHECK(resumed.epochs_done == 1);
    const auto second = train::train(resumed, data);
    first.insert(first.end(), second.begin(), second.end());
    CHECK(first == all);
    CHECK(resumed.queue == full.queue);
    std::filesystem::remove(path);
}

TEST_CASE("evaluate: repeatable, rejects empty sets, checks the hash") {
    TrainConfig c = tiny();
    c.epochs = 1;
    TrainState st(c);
    train::train(st, scenes(4, 8));
    const auto held = scenes(5, 6);
    const auto r1 = evaluate(st, held);
    const auto r2 = evaluate(st, held);
    CHECK(r1.to_json() == r2.to_json());
    CHECK(r1.samples == 6);
    CHECK(r1.config_hash == hash_hex(c.hash()));

    EvalOptions two;
    two.threads = 2;
    CHECK(evaluate(st, held, two).to_json() == r1.to_json());

    CHECK_THROWS_WITH_AS(evaluate(st, {}), "no samples", std::invalid_argument);

    TrainConfig changed = c;
    changed.encoder.hidden = 16;
    CHECK_NOTHROW(check_config_hash(st, c));
    CHECK_THROWS_AS(check_config_hash(st, changed), std::runtime_error);
}

TEST_CASE("trajectory_counts") {
    const auto data = scenes(6, 5);
    std::size_t agents = 0;
    for (const auto& s : data) agents += s.agents.size() - 1;
    const auto [ego, total] = trajectory_counts(data);
    CHECK(ego == 5.0);
    CHECK(total == static_cast<double>(5 + agents));
}

TEST_CASE("RunConfig: round trip and unknown keys") {
    cli::RunConfig c;
    c.train = tiny();
    c.scenario.max_agents = 7;
    c.scenario.mix.keep_lane -= 0.3 - c.scenario.mix.stop;
    c.scenario.mix.stop = 0.3;
    c.radii.ego = 1.7;
    const cli::RunConfig back = cli::RunConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.scenario.max_agents == 7);
    CHECK(back.radii.ego == 1.7);

    CHECK_THROWS_WITH_AS(cli::RunConfig::from_json(R"({"scenario": {"lanes": 3}})"),
                         doctest::Contains("scenario.lanes"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(cli::RunConfig::from_json(R"({"scenario": {"mix": {"u_turn": 1}}})"),
                         doctest::Contains("scenario.mix.u_turn"), std::invalid_argument);
    CHECK_THROWS_AS(cli::RunConfig::from_json(R"({"collision_radii": {"ego": -1}})"), std::invalid_argument);
    CHECK_THROWS_AS(cli::RunConfig::from_json("[1, 2]"), std::invalid_argument);
    CHECK_THROWS_AS(cli::RunConfig::from_json(R"({"epochs": "many"})"), std::invalid_argument);
    CHECK(cli::RunConfig::from_json("{}").to_json() == cli::RunConfig{}.to_json());
}
