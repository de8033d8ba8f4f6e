// Command-line front end: synthesize datasets, train, track, evaluate and
// benchmark with one JSON config schema. Flags override the config file,
// which overrides the built-in defaults; every command echoes the fully
// resolved config as JSON before running.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "sietrack/checkpoint.hpp"
#include "sietrack/data.hpp"
#include "sietrack/evaluation.hpp"
#include "sietrack/model.hpp"
#include "sietrack/serialize.hpp"
#include "sietrack/tracking.hpp"
#include "sietrack/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sietrack;

namespace {

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    SynthConfig synth;
    int synth_sequences = 4;
    double tracker_delta = 0.5;
    int eval_reset_skip = 5;
    int bench_warmup = 5;
    int bench_reps = 3;
};

void to_json(json& j, const RunConfig& cfg) {
    j = json{{"model", cfg.model},
             {"train", cfg.train},
             {"synth", cfg.synth},
             {"synth_sequences", cfg.synth_sequences},
             {"tracker", json{{"delta", cfg.tracker_delta}}},
             {"eval", json{{"reset_skip", cfg.eval_reset_skip}}},
             {"bench", json{{"warmup", cfg.bench_warmup}, {"reps", cfg.bench_reps}}}};
}

void from_json(const json& j, RunConfig& cfg) {
    if (j.contains("model")) j.at("model").get_to(cfg.model);
    if (j.contains("train")) j.at("train").get_to(cfg.train);
    if (j.contains("synth")) j.at("synth").get_to(cfg.synth);
    cfg.synth_sequences = j.value("synth_sequences", cfg.synth_sequences);
    if (j.contains("tracker")) cfg.tracker_delta = j["tracker"].value("delta", cfg.tracker_delta);
    if (j.contains("eval")) cfg.eval_reset_skip = j["eval"].value("reset_skip", cfg.eval_reset_skip);
    if (j.contains("bench")) {
        cfg.bench_warmup = j["bench"].value("warmup", cfg.bench_warmup);
        cfg.bench_reps = j["bench"].value("reps", cfg.bench_reps);
    }
}

// CLI override slots; only values the user actually passed are applied.
struct Overrides {
    std::optional<int> sequences, length, frame_w, frame_h, min_object, max_object;
    std::optional<double> min_speed, max_speed, noise_sigma;
    std::optional<uint64_t> synth_seed;

    std::optional<double> lr, sigma, momentum;
    std::optional<int> batch, epochs, samples_per_epoch;
    std::optional<uint64_t> train_seed;
    std::optional<std::string> optimizer;

    std::optional<int> channels, se_reduction, template_input, detection_input, wz, wx;
    std::optional<std::string> backbone;

    std::optional<double> delta;
    std::optional<int> reset_skip, warmup, reps;
};

void apply(const Overrides& o, RunConfig& cfg) {
    auto set = [](auto& dst, const auto& src) {
        if (src) dst = *src;
    };
    set(cfg.synth_sequences, o.sequences);
    set(cfg.synth.length, o.length);
    set(cfg.synth.frame_w, o.frame_w);
    set(cfg.synth.frame_h, o.frame_h);
    set(cfg.synth.min_object, o.min_object);
    set(cfg.synth.max_object, o.max_object);
    set(cfg.synth.min_speed, o.min_speed);
    set(cfg.synth.max_speed, o.max_speed);
    set(cfg.synth.noise_sigma, o.noise_sigma);
    set(cfg.synth.seed, o.synth_seed);

    set(cfg.train.learning_rate, o.lr);
    set(cfg.train.sigma, o.sigma);
    set(cfg.train.momentum, o.momentum);
    set(cfg.train.batch_size, o.batch);
    set(cfg.train.epochs, o.epochs);
    set(cfg.train.samples_per_epoch, o.samples_per_epoch);
    set(cfg.train.seed, o.train_seed);
    if (o.optimizer) cfg.train.optimizer = optimizer_from_string(*o.optimizer);

    set(cfg.model.channels, o.channels);
    set(cfg.model.se_reduction, o.se_reduction);
    set(cfg.model.template_input, o.template_input);
    set(cfg.model.detection_input, o.detection_input);
    set(cfg.model.wz, o.wz);
    set(cfg.model.wx, o.wx);
    if (o.backbone) cfg.model.backbone = backbone_from_string(*o.backbone);

    set(cfg.tracker_delta, o.delta);
    set(cfg.eval_reset_skip, o.reset_skip);
    set(cfg.bench_warmup, o.warmup);
    set(cfg.bench_reps, o.reps);
}

RunConfig resolve(const std::string& config_path, const Overrides& o) {
    RunConfig cfg;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw std::runtime_error("cannot read config file " + config_path);
        json j;
        f >> j;
        j.get_to(cfg);
    }
    apply(o, cfg);
    return cfg;
}

void echo(const RunConfig& cfg) {
    json j = cfg;
    std::cout << j.dump(2) << std::endl;
}

int cmd_synth(const RunConfig& cfg, const fs::path& out) {
    fs::create_directories(out);
    json manifest = json::array();
    for (int i = 0; i < cfg.synth_sequences; ++i) {
        SynthConfig one = cfg.synth;
        one.seed = cfg.synth.seed + static_cast<uint64_t>(i);
        const SequenceRecord seq = synth_sequence(one);
        const fs::path dir = out / seq.name;
        export_got_style(seq, dir);
        manifest.push_back(json{{"name", seq.name},
                                {"frames", seq.size()},
                                {"path", dir.string()}});
    }
    std::cout << json{{"sequences", manifest}}.dump(2) << std::endl;
    return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
    fs::create_directories(out);
    {
        std::ofstream snap(out / "config_snapshot.json");
        json j = cfg;
        snap << j.dump(2) << '\n';
    }
    RunConfig run = cfg;
    run.train.checkpoint_dir = out / "checkpoints";
    const auto dataset = load_got_style(data);
    std::cout << "loaded " << dataset.size() << " sequences from " << data << "\n";
    const TrainResult result = train(run.model, run.train, dataset);
    for (size_t e = 0; e < result.history.epoch_mean_loss.size(); ++e) {
        std::cout << "epoch " << (e + 1) << ": mean loss " << result.history.epoch_mean_loss[e]
                  << " (" << result.history.epoch_seconds[e] << " s)\n";
    }
    write_history_csv(out / "history.csv", result.history);
    std::cout << "checkpoint: " << (run.train.checkpoint_dir / "final.ckpt").string() << "\n";
    return 0;
}

int cmd_track(const RunConfig& cfg, const fs::path& sequence, const fs::path& checkpoint,
              const fs::path& out, bool dump_frames) {
    fs::create_directories(out);
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    const SequenceRecord seq = load_sequence_dir(sequence);
    const auto track = track_sequence(seq, ckpt.weights, ckpt.config, cfg.tracker_delta);
    const fs::path csv = out / (seq.name + ".csv");
    write_track_csv(csv, track);
    std::cout << "wrote " << track.size() << " rows to " << csv << "\n";
    if (dump_frames) {
        dump_annotated_frames(seq, track, out / (seq.name + "_frames"));
        std::cout << "wrote annotated frames to " << (out / (seq.name + "_frames")) << "\n";
    }
    return 0;
}

int cmd_eval(const RunConfig& cfg, const fs::path& data, const fs::path& checkpoint,
             const fs::path& out) {
    fs::create_directories(out / "tracks");
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    auto weights = std::make_shared<const ModelWeights>(ckpt.weights);
    const auto dataset = load_got_style(data);
    if (dataset.empty()) throw std::runtime_error("no sequences in " + data.string());

    std::vector<BoundingBox> all_outputs, all_gt;
    json per_sequence = json::array();
    double mean_iou_sum = 0.0;
    int total_failures = 0;
    for (const auto& seq : dataset) {
        const auto track = track_sequence(seq, ckpt.weights, ckpt.config, cfg.tracker_delta);
        write_track_csv(out / "tracks" / (seq.name + ".csv"), track);
        for (int t = 0; t < seq.size(); ++t) {
            all_outputs.push_back(track[static_cast<size_t>(t)].box);
            all_gt.push_back(seq.annotations[static_cast<size_t>(t)]);
        }
        const ResetResult reset = evaluate_with_reset(
            model_tracker_factory(weights, ckpt.config, cfg.tracker_delta), seq,
            cfg.eval_reset_skip);
        mean_iou_sum += reset.mean_iou;
        total_failures += reset.failures;
        per_sequence.push_back(json{{"name", seq.name},
                                    {"mean_iou", reset.mean_iou},
                                    {"failures", reset.failures},
                                    {"evaluated_frames", reset.evaluated_frames}});
        std::cout << seq.name << ": mean IoU " << reset.mean_iou << ", failures "
                  << reset.failures << "\n";
    }

    const OnePassResult one_pass = evaluate_one_pass(all_outputs, all_gt);
    write_curve_csv(out / "success.csv", one_pass.success);
    write_curve_csv(out / "precision.csv", one_pass.precision);
    render_curve_plot(out / "success.png", "success plot", "IoU threshold",
                      {{"ours", &one_pass.success}});
    render_curve_plot(out / "precision.png", "precision plot", "center error [px]",
                      {{"ours", &one_pass.precision}});

    const ModelSizeReport size = report_model_size(ckpt.weights, ckpt.config);
    json metrics{{"sequences", dataset.size()},
                 {"accuracy_mean_iou", mean_iou_sum / static_cast<double>(dataset.size())},
                 {"robustness_failures", total_failures},
                 {"success_auc", one_pass.auc},
                 {"precision_at_20px", one_pass.precision_at_20},
                 {"parameter_count", size.parameters},
                 {"checkpoint_bytes", size.checkpoint_bytes},
                 {"EAO", "not computed"},
                 {"EFO", "not computed"},
                 {"hardware", hardware_descriptor()},
                 {"config_hash", config_hash(ckpt.config)},
                 {"per_sequence", per_sequence}};
    std::ofstream(out / "metrics.json") << metrics.dump(2) << '\n';
    std::cout << "success AUC " << one_pass.auc << ", precision@20px "
              << one_pass.precision_at_20 << "\n";
    std::cout << "wrote " << (out / "metrics.json") << "\n";
    return 0;
}

int cmd_bench(const RunConfig& cfg, const fs::path& sequence, const fs::path& checkpoint,
              const fs::path& out) {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    const SequenceRecord seq = load_sequence_dir(sequence);
    const FpsReport report = benchmark_fps(ckpt.weights, ckpt.config, seq, cfg.bench_warmup,
                                           cfg.bench_reps, cfg.tracker_delta);
    json j{{"fps", report.fps},
           {"per_rep", report.per_rep},
           {"timed_frames", report.timed_frames},
           {"hardware", report.hardware}};
    std::cout << j.dump(2) << std::endl;
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream(out / "fps.json") << j.dump(2) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lightweight siamese single-object tracker"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    bool deterministic = false;
    app.add_flag("--deterministic", deterministic,
                 "force the single-threaded deterministic reference mode");

    Overrides o;
    std::string out_dir, data_dir, sequence_dir, checkpoint_path;
    bool dump_frames = false;

    auto* synth = app.add_subcommand("synth", "write synthetic sequences in the dataset layout");
    synth->add_option("--out", out_dir, "output dataset directory")->required();
    synth->add_option("--sequences", o.sequences, "number of sequences");
    synth->add_option("--length", o.length, "frames per sequence");
    synth->add_option("--seed", o.synth_seed, "base seed");
    synth->add_option("--frame-w", o.frame_w, "frame width");
    synth->add_option("--frame-h", o.frame_h, "frame height");
    synth->add_option("--min-object", o.min_object, "min object side");
    synth->add_option("--max-object", o.max_object, "max object side");
    synth->add_option("--min-speed", o.min_speed, "min per-axis speed");
    synth->add_option("--max-speed", o.max_speed, "max per-axis speed");
    synth->add_option("--noise-sigma", o.noise_sigma, "object noise sigma");

    auto* train_cmd = app.add_subcommand("train", "train on a dataset directory");
    train_cmd->add_option("--data", data_dir, "dataset root")->required()
        ->check(CLI::ExistingDirectory);
    train_cmd->add_option("--out", out_dir, "run directory")->required();
    train_cmd->add_option("--epochs", o.epochs, "training epochs");
    train_cmd->add_option("--batch", o.batch, "batch size");
    train_cmd->add_option("--lr", o.lr, "learning rate");
    train_cmd->add_option("--sigma", o.sigma, "smooth L1 sigma");
    train_cmd->add_option("--samples-per-epoch", o.samples_per_epoch, "pairs per epoch");
    train_cmd->add_option("--seed", o.train_seed, "training seed");
    train_cmd->add_option("--optimizer", o.optimizer, "sgd|momentum|adam");
    train_cmd->add_option("--momentum", o.momentum, "momentum coefficient");
    train_cmd->add_option("--channels", o.channels, "feature channels c");
    train_cmd->add_option("--se-reduction", o.se_reduction, "SE bottleneck ratio");
    train_cmd->add_option("--backbone", o.backbone, "compact5|compact5w");
    train_cmd->add_option("--template-input", o.template_input, "template input side");
    train_cmd->add_option("--detection-input", o.detection_input, "detection input side");
    train_cmd->add_option("--wz", o.wz, "template feature side");
    train_cmd->add_option("--wx", o.wx, "detection feature side");

    auto* track_cmd = app.add_subcommand("track", "track one sequence");
    track_cmd->add_option("--sequence", sequence_dir, "sequence directory")->required()
        ->check(CLI::ExistingDirectory);
    track_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required()
        ->check(CLI::ExistingFile);
    track_cmd->add_option("--out", out_dir, "output directory")->required();
    track_cmd->add_option("--delta", o.delta, "search margin");
    track_cmd->add_flag("--dump-frames", dump_frames, "write annotated frames");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate on a dataset directory");
    eval_cmd->add_option("--data", data_dir, "dataset root")->required()
        ->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", out_dir, "output directory")->required();
    eval_cmd->add_option("--delta", o.delta, "search margin");
    eval_cmd->add_option("--reset-skip", o.reset_skip, "frames skipped after a failure");

    auto* bench_cmd = app.add_subcommand("bench", "fps benchmark on one sequence");
    bench_cmd->add_option("--sequence", sequence_dir, "sequence directory")->required()
        ->check(CLI::ExistingDirectory);
    bench_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required()
        ->check(CLI::ExistingFile);
    bench_cmd->add_option("--out", out_dir, "output directory (optional)");
    bench_cmd->add_option("--warmup", o.warmup, "untimed leading updates");
    bench_cmd->add_option("--reps", o.reps, "benchmark repetitions");
    bench_cmd->add_option("--delta", o.delta, "search margin");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = resolve(config_path, o);
        // SIETRACK_DETERMINISTIC=1 is equivalent to --deterministic
        const char* env = std::getenv("SIETRACK_DETERMINISTIC");
        cfg.train.deterministic =
            cfg.train.deterministic || deterministic || (env && std::string(env) == "1");
        echo(cfg);
        if (synth->parsed()) return cmd_synth(cfg, out_dir);
        if (train_cmd->parsed()) return cmd_train(cfg, data_dir, out_dir);
        if (track_cmd->parsed()) return cmd_track(cfg, sequence_dir, checkpoint_path, out_dir,
                                                  dump_frames);
        if (eval_cmd->parsed()) return cmd_eval(cfg, data_dir, checkpoint_path, out_dir);
        if (bench_cmd->parsed()) return cmd_bench(cfg, sequence_dir, checkpoint_path, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
