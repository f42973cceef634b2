#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fump/checks/checks.hpp"
#include "fump/cli/config.hpp"
#include "fump/data/dataset.hpp"
#include "fump/data/generator.hpp"
#include "fump/data/optics.hpp"
#include "fump/scene/graph.hpp"
#include "fump/train/trainer.hpp"

namespace {

using namespace fump;

constexpr int kOk = 0;
constexpr int kVerificationFailure = 1;
constexpr int kUsage = 2;

// Thrown for arguments CLI11 accepts syntactically but the command rejects.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string invocation(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        const std::string a = argv[i];
        s += a.find_first_of(" \t'\"") == std::string::npos ? a : "'" + a + "'";
    }
    return s;
}

cli::RunConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    try {
        return cli::RunConfig::load(path);
    } catch (const std::invalid_argument& e) {
        throw UsageError(path + ": " + e.what());
    }
}

void echo(const std::string& line, const cli::RunConfig* config) {
    std::cerr << "# invocation: " << line << '\n';
    if (config != nullptr) {
        std::istringstream in(config->to_json());
        for (std::string l; std::getline(in, l);) std::cerr << "# " << l << '\n';
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string defaults_footer() {
    std::ostringstream o;
    o << "Model and training defaults (override in the --config file):\n"
      << "  modes K = " << uttd::kModes << ", horizon T = " << scene::kHorizon << " steps of "
      << geo::kStepSeconds << " s, zones = " << scene::kZones << '\n'
      << "  queue capacity = " << memory::HardSampleQueue::kDefaultCapacity
      << ", queue gamma = " << memory::HardSampleQueue::kDefaultGamma << ", mask probability = "
      << uttd::kMaskProbability << '\n'
      << "Exit codes: 0 success, 1 verification failure or runtime error, 2 usage error.\n"
      << "FUMP_THREADS caps evaluation threads (default 1).\n";
    return o.str();
}

}  // namespace

int main(int argc, char** argv) {
    const std::string line = invocation(argc, argv);
    CLI::App app{"Joint motion prediction and planning on synthetic driving scenes.", "fump"};
    app.require_subcommand(1);
    app.footer(defaults_footer());
    app.get_formatter()->column_width(34);

    // gen-data
    std::uint64_t gen_seed = 1;
    long long gen_count = 1000;
    std::string gen_out, gen_config;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic scene dataset (JSON lines).");
    gen->add_option("--seed", gen_seed, "Dataset seed")->capture_default_str();
    gen->add_option("--count", gen_count, "Number of scenes (>= 1)")->capture_default_str();
    gen->add_option("--out", gen_out, "Output dataset path")->required();
    gen->add_option("--config", gen_config, "Config file; its \"scenario\" object is used");

    // convert
    std::string conv_in, conv_out;
    auto* conv = app.add_subcommand("convert", "Convert ego-frame box annotations into agent-frame tracks.");
    conv->add_option("--in", conv_in, "Annotation JSON")->required();
    conv->add_option("--out", conv_out, "Output track JSON")->required();

    // curate
    std::string cur_in, cur_out;
    std::size_t cur_k = 3, cur_min_pts = 5;
    auto* cur = app.add_subcommand("curate", "Select the scenes of the k smallest OPTICS clusters.");
    cur->add_option("--in", cur_in, "Input dataset")->required();
    cur->add_option("--out", cur_out, "Output dataset")->required();
    cur->add_option("--k", cur_k, "Number of smallest clusters")->capture_default_str();
    cur->add_option("--min-pts", cur_min_pts, "OPTICS min_pts")->capture_default_str();

    // train
    std::string tr_config, tr_data, tr_out, tr_loss;
    auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint.");
    tr->add_option("--config", tr_config, "Config file (defaults when omitted)");
    tr->add_option("--data", tr_data, "Training dataset")->required();
    tr->add_option("--out", tr_out, "Checkpoint path")->required();
    tr->add_option("--loss-csv", tr_loss, "Per-batch loss log");

    // eval
    std::string ev_ckpt, ev_data, ev_config, ev_out, ev_mode = "stp", ev_format = "text";
    bool ev_refine = false;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset.");
    ev->add_option("--ckpt", ev_ckpt, "Checkpoint path")->required();
    ev->add_option("--data", ev_data, "Evaluation dataset")->required();
    ev->add_option("--state-mode", ev_mode, "Ego state source: gt or stp")
        ->check(CLI::IsMember({"gt", "stp"}))
        ->capture_default_str();
    ev->add_flag("--motion-refine", ev_refine, "Refine every agent's motion through stage II");
    ev->add_option("--config", ev_config, "Config the checkpoint must match; also supplies collision radii");
    ev->add_option("--format", ev_format, "Report format")
        ->check(CLI::IsMember({"text", "json", "csv"}))
        ->capture_default_str();
    ev->add_option("--out", ev_out, "Report path (stdout when omitted)");

    // ablate
    std::string ab_config, ab_data, ab_heldout, ab_out;
    auto* ab = app.add_subcommand("ablate", "Train and evaluate the four ablation variants.");
    ab->add_option("--config", ab_config, "Base config file");
    ab->add_option("--data", ab_data, "Training dataset")->required();
    ab->add_option("--heldout", ab_heldout, "Held-out dataset")->required();
    ab->add_option("--out", ab_out, "Table output path")->required();

    // check
    std::string ck_suite = "all";
    std::vector<std::string> suites = checks::suite_names();
    suites.push_back("all");
    auto* ck = app.add_subcommand("check", "Run the property suites and print pass/fail per invariant.");
    ck->add_option("--suite", ck_suite, "Suite to run")->check(CLI::IsMember(suites))->capture_default_str();

    app.footer(defaults_footer() + "\nFull default config:\n" + cli::RunConfig{}.to_json() + "\n");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (*gen) {
            if (gen_count < 1) throw UsageError("count must be >= 1");
            const cli::RunConfig cfg = load_config(gen_config);
            echo(line, &cfg);
            const auto scenes = data::generate_dataset(gen_seed, static_cast<std::size_t>(gen_count), cfg.scenario);
            data::write_dataset(scenes, gen_out);
            std::cout << "wrote " << scenes.size() << " scenes to " << gen_out << '\n';
        } else if (*conv) {
            echo(line, nullptr);
            const auto tracks = data::convert_annotations(data::read_annotations(conv_in));
            data::write_tracks(tracks, conv_out);
            std::cout << "wrote " << tracks.size() << " tracks to " << conv_out << '\n';
        } else if (*cur) {
            if (cur_min_pts < 1) throw UsageError("min-pts must be >= 1");
            echo(line, nullptr);
            const auto scenes = data::read_dataset(cur_in);
            const auto res = data::curate_longtail(scenes, cur_k, cur_min_pts);
            if (res.warning) std::cerr << "warning: " << *res.warning << '\n';
            std::vector<scene::Scene> picked;
            for (std::size_t i : res.indices) picked.push_back(scenes[i]);
            data::write_dataset(picked, cur_out);
            std::cout << res.clusters.cluster_sizes.size() << " clusters (cut " << res.clusters.cut << "); wrote "
                      << picked.size() << " of " << scenes.size() << " scenes to " << cur_out << '\n';
        } else if (*tr) {
            cli::RunConfig cfg = load_config(tr_config);
            cfg.train.train_path = tr_data;
            echo(line, &cfg);
            const auto scenes = data::read_dataset(tr_data);
            train::TrainState st(cfg.train);
            std::vector<train::LossRecord> records;
            while (st.epochs_done < cfg.train.epochs) {
                const auto rec = train::train(st, scenes, 1);
                double total = 0.0;
                for (const auto& r : rec) total += r.total;
                std::cout << "epoch " << st.epochs_done << '/' << cfg.train.epochs
                          << " mean loss " << total / static_cast<double>(rec.size()) << " queue " << st.queue.size()
                          << std::endl;
                records.insert(records.end(), rec.begin(), rec.end());
            }
            train::save_checkpoint(st, tr_out);
            if (!tr_loss.empty()) write_text(tr_loss, train::loss_csv(records));
            std::cout << "checkpoint " << tr_out << " config hash " << train::hash_hex(cfg.train.hash()) << '\n';
        } else if (*ev) {
            const cli::RunConfig cfg = load_config(ev_config);
            echo(line, ev_config.empty() ? nullptr : &cfg);
            const train::TrainState st = train::load_checkpoint(ev_ckpt);
            if (!ev_config.empty()) {
                try {
                    train::check_config_hash(st, cfg.train);
                } catch (const std::runtime_error& e) {
                    std::cerr << "verification failure: " << e.what() << '\n';
                    return kVerificationFailure;
                }
            }
            train::EvalOptions opt;
            opt.state_mode = ev_mode == "gt" ? uttd::StateMode::GroundTruth : uttd::StateMode::Predicted;
            opt.motion_refine = ev_refine;
            opt.radii = cfg.radii;
            const auto report = train::evaluate(st, data::read_dataset(ev_data), opt);
            const std::string text = ev_format == "json" ? report.to_json() + "\n"
                                     : ev_format == "csv" ? report.to_csv()
                                                          : report.to_text();
            if (ev_out.empty()) {
                std::cout << text;
            } else {
                write_text(ev_out, text);
                std::cout << "wrote " << ev_out << '\n';
            }
        } else if (*ab) {
            const cli::RunConfig cfg = load_config(ab_config);
            echo(line, &cfg);
            train::EvalOptions opt;
            opt.radii = cfg.radii;
            const auto rows =
                train::ablate(cfg.train, data::read_dataset(ab_data), data::read_dataset(ab_heldout), opt);
            const std::string table = train::ablation_table(rows);
            write_text(ab_out, table);
            std::cout << table;
        } else if (*ck) {
            echo(line, nullptr);
            const std::vector<std::string> run =
                ck_suite == "all" ? checks::suite_names() : std::vector<std::string>{ck_suite};
            bool ok = true;
            for (const auto& name : run) {
                const auto r = checks::run_suite(name);
                std::cout << r.report() << std::flush;
                ok = ok && r.passed();
            }
            return ok ? kOk : kVerificationFailure;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kVerificationFailure;
    }
    return kOk;
}
