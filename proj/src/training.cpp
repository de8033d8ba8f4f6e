#include "sietrack/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "net.hpp"
#include "sietrack/errors.hpp"

namespace sietrack {

Optimizer optimizer_from_string(const std::string& s) {
    if (s == "sgd") return Optimizer::sgd;
    if (s == "momentum") return Optimizer::momentum;
    if (s == "adam") return Optimizer::adam;
    throw std::invalid_argument("unknown optimizer: " + s);
}

std::string to_string(Optimizer o) {
    switch (o) {
        case Optimizer::sgd: return "sgd";
        case Optimizer::momentum: return "momentum";
        case Optimizer::adam: return "adam";
    }
    return "sgd";
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    if (samples_per_epoch < 1) throw std::invalid_argument("samples_per_epoch must be >= 1");
}

double smooth_l1(double x, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("smooth_l1: sigma must be > 0");
    const double s2 = sigma * sigma;
    const double ax = std::abs(x);
    if (ax <= 1.0 / s2) return 0.5 * s2 * x * x;
    return ax - 0.5 / s2;
}

double smooth_l1_grad(double x, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("smooth_l1_grad: sigma must be > 0");
    const double s2 = sigma * sigma;
    if (std::abs(x) <= 1.0 / s2) return s2 * x;
    return x > 0.0 ? 1.0 : -1.0;
}

double offsets_loss(const RelativeOffsets& pred, const RelativeOffsets& target, double sigma) {
    double total = 0.0;
    for (int i = 0; i < 4; ++i) total += smooth_l1(target[i] - pred[i], sigma);
    return total;
}

namespace {

using net::RowMat;

// Flattened view over the optimizer's slot arrays (one or two per parameter).
struct OptState {
    Optimizer kind = Optimizer::sgd;
    int64_t step = 0;
    std::vector<ParamArray> slots;

    static OptState fresh(Optimizer kind, const ModelConfig& cfg) {
        OptState st;
        st.kind = kind;
        if (kind == Optimizer::momentum) {
            for (auto& a : parameter_layout(cfg)) {
                st.slots.push_back(ParamArray{"opt.v." + a.name, a.shape,
                                              std::vector<double>(a.v.size(), 0.0)});
            }
        } else if (kind == Optimizer::adam) {
            for (const char* prefix : {"opt.m.", "opt.v."}) {
                for (auto& a : parameter_layout(cfg)) {
                    st.slots.push_back(ParamArray{prefix + a.name, a.shape,
                                                  std::vector<double>(a.v.size(), 0.0)});
                }
            }
        }
        return st;
    }
};

void apply_update(ModelWeights& w, const net::GradSet& g, OptState& st, const TrainConfig& cfg) {
    const size_t np = w.params.size();
    ++st.step;
    switch (st.kind) {
        case Optimizer::sgd:
            for (size_t p = 0; p < np; ++p) {
                auto& wv = w.params[p].v;
                const auto& gv = g.arrays[p].v;
                for (size_t i = 0; i < wv.size(); ++i) wv[i] -= cfg.learning_rate * gv[i];
            }
            break;
        case Optimizer::momentum:
            for (size_t p = 0; p < np; ++p) {
                auto& wv = w.params[p].v;
                const auto& gv = g.arrays[p].v;
                auto& vv = st.slots[p].v;
                for (size_t i = 0; i < wv.size(); ++i) {
                    vv[i] = cfg.momentum * vv[i] + gv[i];
                    wv[i] -= cfg.learning_rate * vv[i];
                }
            }
            break;
        case Optimizer::adam: {
            constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
            const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
            const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
            for (size_t p = 0; p < np; ++p) {
                auto& wv = w.params[p].v;
                const auto& gv = g.arrays[p].v;
                auto& mv = st.slots[p].v;
                auto& vv = st.slots[np + p].v;
                for (size_t i = 0; i < wv.size(); ++i) {
                    mv[i] = b1 * mv[i] + (1.0 - b1) * gv[i];
                    vv[i] = b2 * vv[i] + (1.0 - b2) * gv[i] * gv[i];
                    const double mhat = mv[i] / bc1;
                    const double vhat = vv[i] / bc2;
                    wv[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + eps);
                }
            }
            break;
        }
    }
}

struct Batch {
    Tensor tmpl;
    Tensor det;
    RowMat labels;
    std::string provenance;  // first pair, for diagnostics
};

Batch assemble(const std::vector<const PatchPair*>& pairs) {
    const int b = static_cast<int>(pairs.size());
    const PatchPair& first = *pairs.front();
    Batch out;
    out.tmpl = Tensor(b, first.template_patch.h(), first.template_patch.w(), 3);
    out.det = Tensor(b, first.detection_patch.h(), first.detection_patch.w(), 3);
    out.labels.resize(b, 4);
    for (int i = 0; i < b; ++i) {
        const PatchPair& p = *pairs[static_cast<size_t>(i)];
        std::copy(p.template_patch.data(), p.template_patch.data() + p.template_patch.size(),
                  out.tmpl.sample(i));
        std::copy(p.detection_patch.data(), p.detection_patch.data() + p.detection_patch.size(),
                  out.det.sample(i));
        for (int k = 0; k < 4; ++k) out.labels(i, k) = p.label[k];
    }
    out.provenance = first.sequence + " frames " + std::to_string(first.template_frame) + "->" +
                     std::to_string(first.detection_frame);
    return out;
}

// One optimizer step; returns the batch mean loss.
double train_step(const Batch& batch, ModelWeights& w, const net::LayerSpecs& ls,
                  net::GradSet& grads, OptState& opt, const TrainConfig& cfg, int global_step) {
    net::PairCache cache;
    const RowMat pred =
        net::pair_forward(batch.tmpl, batch.det, w, ls, net::Phase::train, true, &cache);
    const int b = static_cast<int>(pred.rows());
    double loss = 0.0;
    RowMat dpred(b, 4);
    for (int i = 0; i < b; ++i) {
        for (int k = 0; k < 4; ++k) {
            const double r = batch.labels(i, k) - pred(i, k);
            loss += smooth_l1(r, cfg.sigma);
            dpred(i, k) = -smooth_l1_grad(r, cfg.sigma) / b;
        }
    }
    loss /= b;
    if (!std::isfinite(loss)) {
        throw TrainingDivergedError(global_step, "non-finite batch loss (batch starts at " +
                                                     batch.provenance + ")");
    }
    grads.zero();
    net::pair_backward(dpred, w, ls, cache, grads);
    apply_update(w, grads, opt, cfg);
    return loss;
}

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    uint64_t x = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

void save_epoch_checkpoint(const std::filesystem::path& dir, const ModelConfig& model_cfg,
                           const ModelWeights& w, const OptState& opt, int epochs_done,
                           uint64_t seed, const std::string& filename) {
    std::filesystem::create_directories(dir);
    Checkpoint ckpt;
    ckpt.config = model_cfg;
    ckpt.weights = w;
    ckpt.epoch = epochs_done;
    ckpt.train_seed = seed;
    if (opt.kind != Optimizer::sgd) {
        OptimizerState st;
        st.kind = to_string(opt.kind);
        st.step = opt.step;
        st.arrays = opt.slots;
        ckpt.optimizer = std::move(st);
    }
    save_checkpoint(dir / filename, ckpt);
}

OptState restore_opt(const Checkpoint& ckpt, Optimizer kind, const ModelConfig& cfg) {
    OptState st = OptState::fresh(kind, cfg);
    if (ckpt.optimizer) {
        if (ckpt.optimizer->kind != to_string(kind)) {
            throw CheckpointError("resume: checkpoint optimizer '" + ckpt.optimizer->kind +
                                  "' does not match configured '" + to_string(kind) + "'");
        }
        st.step = ckpt.optimizer->step;
        st.slots = ckpt.optimizer->arrays;
    }
    return st;
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<SequenceRecord>& dataset, const Checkpoint* resume) {
    model_cfg.validate();
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

    const auto ls = net::make_specs(model_cfg);
    ModelWeights w;
    OptState opt;
    int start_epoch = 0;
    if (resume) {
        if (config_hash(resume->config) != config_hash(model_cfg)) {
            throw CheckpointError("resume: checkpoint config does not match the model config");
        }
        w = resume->weights;
        opt = restore_opt(*resume, cfg.optimizer, model_cfg);
        start_epoch = resume->epoch;
    } else {
        w = init_weights(model_cfg, derive_seed(cfg.seed, 0));
        opt = OptState::fresh(cfg.optimizer, model_cfg);
    }
    net::GradSet grads = net::make_grads(model_cfg);

    TrainResult result;
    TrainHistory& history = result.history;
    const int steps_per_epoch = std::max(1, cfg.samples_per_epoch / cfg.batch_size);

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng(derive_seed(cfg.seed, 1 + static_cast<uint64_t>(epoch)));
        std::vector<char> alive(dataset.size(), 1);
        size_t alive_count = dataset.size();
        double epoch_sum = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            std::vector<PatchPair> storage;
            storage.reserve(static_cast<size_t>(cfg.batch_size));
            while (storage.size() < static_cast<size_t>(cfg.batch_size)) {
                if (alive_count == 0) {
                    throw StructuralError("train: no samplable sequences left in the dataset");
                }
                const size_t si =
                    static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(dataset.size()) - 1));
                if (!alive[si]) continue;
                try {
                    storage.push_back(sample_pair(dataset[si], rng, model_cfg.template_input,
                                                  model_cfg.detection_input));
                } catch (const UnsampleableSequenceError&) {
                    alive[si] = 0;
                    --alive_count;
                }
            }
            std::vector<const PatchPair*> ptrs;
            for (const auto& p : storage) ptrs.push_back(&p);
            const int global_step = epoch * steps_per_epoch + step;
            const double loss =
                train_step(assemble(ptrs), w, ls, grads, opt, cfg, global_step);
            history.step_loss.push_back(loss);
            epoch_sum += loss;
        }
        history.epoch_mean_loss.push_back(epoch_sum / steps_per_epoch);
        history.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        if (!cfg.checkpoint_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch + 1);
            save_epoch_checkpoint(cfg.checkpoint_dir, model_cfg, w, opt, epoch + 1, cfg.seed,
                                  name);
        }
    }
    if (!cfg.checkpoint_dir.empty()) {
        save_epoch_checkpoint(cfg.checkpoint_dir, model_cfg, w, opt, cfg.epochs, cfg.seed,
                              "final.ckpt");
    }
    result.weights = std::move(w);
    return result;
}

TrainResult train_on_pairs(const ModelConfig& model_cfg, const TrainConfig& cfg,
                           const std::vector<PatchPair>& pairs, int steps,
                           ModelWeights* initial) {
    model_cfg.validate();
    cfg.validate();
    if (pairs.empty()) throw std::invalid_argument("train_on_pairs: empty pair set");

    const auto ls = net::make_specs(model_cfg);
    ModelWeights w = initial ? *initial : init_weights(model_cfg, derive_seed(cfg.seed, 0));
    OptState opt = OptState::fresh(cfg.optimizer, model_cfg);
    net::GradSet grads = net::make_grads(model_cfg);

    TrainResult result;
    const auto t0 = std::chrono::steady_clock::now();
    size_t cursor = 0;
    for (int step = 0; step < steps; ++step) {
        std::vector<const PatchPair*> ptrs;
        for (int i = 0; i < cfg.batch_size; ++i) {
            ptrs.push_back(&pairs[cursor]);
            cursor = (cursor + 1) % pairs.size();
        }
        const double loss = train_step(assemble(ptrs), w, ls, grads, opt, cfg, step);
        result.history.step_loss.push_back(loss);
    }
    if (!result.history.step_loss.empty()) {
        double sum = 0.0;
        for (double l : result.history.step_loss) sum += l;
        result.history.epoch_mean_loss.push_back(sum / result.history.step_loss.size());
        result.history.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    result.weights = std::move(w);
    return result;
}

double mean_pair_loss(const ModelConfig& model_cfg, const ModelWeights& w,
                      const std::vector<PatchPair>& pairs, double sigma) {
    double total = 0.0;
    for (const auto& p : pairs) {
        const RelativeOffsets pred = forward(p.template_patch, p.detection_patch, w, model_cfg);
        total += offsets_loss(pred, p.label, sigma);
    }
    return total / static_cast<double>(pairs.size());
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << "step,loss,epoch_seconds\n";
    const size_t steps_per_epoch =
        history.epoch_mean_loss.empty()
            ? history.step_loss.size()
            : history.step_loss.size() / history.epoch_mean_loss.size();
    for (size_t i = 0; i < history.step_loss.size(); ++i) {
        f << i << ',' << history.step_loss[i] << ',';
        // wall-clock emitted on each epoch's last step
        if (steps_per_epoch > 0 && (i + 1) % steps_per_epoch == 0) {
            const size_t e = (i + 1) / steps_per_epoch - 1;
            if (e < history.epoch_seconds.size()) f << history.epoch_seconds[e];
        }
        f << '\n';
    }
}

GradientCheckReport gradient_check(const ModelConfig& model_cfg, const PatchPair& sample,
                                   double fd_step, double sigma, uint64_t weight_seed) {
    model_cfg.validate();
    const auto ls = net::make_specs(model_cfg);
    ModelWeights w = init_weights(model_cfg, weight_seed);
    // The check point uses fan-in-scaled kernels instead of the tiny
    // training init: with std-0.01 kernels the batch-norm gains blow up the
    // finite-difference window in normalized units and the step-1e-4
    // secants straddle ReLU/argmax breakpoints. The backprop code under
    // test is identical at either point.
    for (auto& a : w.params) {
        if (!a.name.ends_with(".w")) continue;
        int64_t fan_in = 1;
        for (size_t d = 0; d + 1 < a.shape.size(); ++d) fan_in *= a.shape[d];
        const double scale = (1.0 / std::sqrt(static_cast<double>(fan_in))) / 0.01;
        for (double& v : a.v) v *= scale;
    }

    Tensor tmpl(1, sample.template_patch.h(), sample.template_patch.w(), 3);
    Tensor det(1, sample.detection_patch.h(), sample.detection_patch.w(), 3);
    std::copy(sample.template_patch.data(),
              sample.template_patch.data() + sample.template_patch.size(), tmpl.data());
    std::copy(sample.detection_patch.data(),
              sample.detection_patch.data() + sample.detection_patch.size(), det.data());

    // train-phase forward with frozen running stats, so finite differences
    // see exactly the function the analytic backward differentiates
    auto loss_at = [&](ModelWeights& weights) {
        const RowMat pred =
            net::pair_forward(tmpl, det, weights, ls, net::Phase::train, false, nullptr);
        double loss = 0.0;
        for (int k = 0; k < 4; ++k) loss += smooth_l1(sample.label[k] - pred(0, k), sigma);
        return loss;
    };

    // analytic gradient
    net::GradSet grads = net::make_grads(model_cfg);
    {
        net::PairCache cache;
        const RowMat pred =
            net::pair_forward(tmpl, det, w, ls, net::Phase::train, false, &cache);
        RowMat dpred(1, 4);
        for (int k = 0; k < 4; ++k) {
            dpred(0, k) = -smooth_l1_grad(sample.label[k] - pred(0, k), sigma);
        }
        net::pair_backward(dpred, w, ls, cache, grads);
    }

    GradientCheckReport report;
    for (size_t p = 0; p < w.params.size(); ++p) {
        GradientCheckGroup group;
        group.name = w.params[p].name;
        double a_norm2 = 0.0, n_norm2 = 0.0, diff_norm2 = 0.0;
        for (size_t i = 0; i < w.params[p].v.size(); ++i) {
            double& slot = w.params[p].v[i];
            const double saved = slot;
            auto central = [&](double h) {
                slot = saved + h;
                const double lp = loss_at(w);
                slot = saved - h;
                const double lm = loss_at(w);
                slot = saved;
                return (lp - lm) / (2.0 * h);
            };
            const double numeric = central(fd_step);
            // secant validity probe: for a function smooth inside the
            // window the two estimates agree to O(h^2); a ReLU or pool
            // breakpoint inside the window makes them disagree by the slope
            // jump. Such elements carry no information about the backprop
            // implementation at this step size and are excluded (counted).
            const double numeric_quarter = central(fd_step / 4.0);
            const bool kink = std::abs(numeric - numeric_quarter) >
                              1e-4 * std::max({1.0, std::abs(numeric),
                                               std::abs(numeric_quarter)});
            if (kink) {
                ++group.kink_skipped;
                continue;
            }
            const double analytic = grads.arrays[p].v[i];
            const double abs_err = std::abs(analytic - numeric);
            group.max_abs_err = std::max(group.max_abs_err, abs_err);
            group.max_elem_rel_err = std::max(
                group.max_elem_rel_err,
                abs_err / std::max({1e-6, std::abs(analytic), std::abs(numeric)}));
            a_norm2 += analytic * analytic;
            n_norm2 += numeric * numeric;
            diff_norm2 += abs_err * abs_err;
        }
        group.grad_norm = std::sqrt(a_norm2);
        // the 1e-6 floor keeps exactly-zero-gradient groups (conv biases,
        // which batch norm cancels) from dividing FD roundoff by itself
        group.rel_err = std::sqrt(diff_norm2) /
                        std::max({1e-6, std::sqrt(a_norm2), std::sqrt(n_norm2)});
        report.max_rel_err = std::max(report.max_rel_err, group.rel_err);
        report.kink_skipped += group.kink_skipped;
        report.checked += static_cast<int64_t>(w.params[p].v.size()) - group.kink_skipped;
        report.groups.push_back(std::move(group));
    }
    return report;
}

}  // namespace sietrack
