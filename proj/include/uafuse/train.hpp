#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "fusion.hpp"
#include "inference.hpp"
#include "metrics.hpp"
#include "patches.hpp"
#include "rng.hpp"

namespace uafuse {

struct TrainConfig {
    int stage_switch_epoch = 30; // fused-head loss joins at this epoch
    int total_epochs = 60;
    int batch_size = 4;
    double learning_rate = 1e-3;
    std::string optimizer = "adam"; // or "sgd"
    std::uint64_t seed = 1;
    SamplingMode sampling = SamplingMode::ClassBalanced;
    std::array<int, 3> patch_size{32, 32, 32};
    std::array<int, 3> stride{14, 14, 14};
    int samples_per_epoch = 0;    // 0 = total kept patches across training cases
    int val_interval = 1;         // validate every n epochs
    int val_start_epoch = 0;      // first epoch eligible for validation
    std::array<int, 3> val_stride{0, 0, 0}; // 0 = training stride
    double early_stop_dice = 0.0; // stop once reached (0 = off)
    int val_cases = -1;           // -1 = auto split; 0 = validate on the training cases

    void validate() const {
        if (stage_switch_epoch <= 0 || stage_switch_epoch > total_epochs)
            throw std::invalid_argument("train config: need 0 < stage_switch_epoch <= total_epochs");
        if (total_epochs <= 0) throw std::invalid_argument("train config: total_epochs must be positive");
        if (batch_size <= 0) throw std::invalid_argument("train config: batch_size must be positive");
        if (!(learning_rate > 0)) throw std::invalid_argument("train config: learning_rate must be positive");
        if (optimizer != "adam" && optimizer != "sgd")
            throw std::invalid_argument("train config: unknown optimizer '" + optimizer + "'");
        if (val_interval <= 0) throw std::invalid_argument("train config: val_interval must be positive");
    }
};

struct LossWeights {
    double w1 = 0.5, w2 = 0.5, w_final = 0.0;
};

/// Two-stage schedule: before the switch epoch the fused head receives no
/// loss (and no gradient); from it on, its term joins with weight 1. A step
/// function, no blending.
inline LossWeights loss_weights(int epoch, int stage_switch_epoch = 30) {
    if (epoch < 0) throw std::invalid_argument("loss_weights: negative epoch");
    LossWeights w;
    w.w_final = epoch < stage_switch_epoch ? 0.0 : 1.0;
    return w;
}

inline int stage_of(int epoch, int stage_switch_epoch) { return epoch < stage_switch_epoch ? 1 : 2; }

/// One Adam update with bias correction; moments must be zero-initialized
/// at t = 0. `t` is the 1-based step count after this update.
template <typename T>
inline void adam_update(T* param, const T* grad, T* m, T* v, std::int64_t n, std::int64_t t, double lr,
                        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::int64_t i = 0; i < n; ++i) {
        const double g = static_cast<double>(grad[i]);
        const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
        const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        param[i] = static_cast<T>(static_cast<double>(param[i]) - lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
    }
}

template <typename T>
class Optimizer {
public:
    Optimizer(std::string kind, double lr) : kind_(std::move(kind)), lr_(lr) {}

    void step(Model<T>& model, const std::map<std::string, std::vector<T>>& grads) {
        ++t_;
        model.visit_params([&](const std::string& name, Tensor<T>& p) {
            const auto& g = grads.at(name);
            if (kind_ == "sgd") {
                for (std::int64_t i = 0; i < p.numel(); ++i)
                    p[i] = static_cast<T>(p[i] - lr_ * g[static_cast<std::size_t>(i)]);
                return;
            }
            auto& m = m_[name];
            auto& v = v_[name];
            if (m.empty()) {
                m.assign(g.size(), T(0));
                v.assign(g.size(), T(0));
            }
            adam_update(p.ptr(), g.data(), m.data(), v.data(), p.numel(), t_, lr_);
        });
    }

    std::int64_t steps() const { return t_; }

    TensorTable moment_table() const {
        TensorTable table;
        for (const auto& [name, m] : m_) {
            TensorBlob blob;
            blob.shape = {static_cast<int>(m.size())};
            blob.data.assign(m.begin(), m.end());
            table.emplace("adam.m." + name, std::move(blob));
        }
        for (const auto& [name, v] : v_) {
            TensorBlob blob;
            blob.shape = {static_cast<int>(v.size())};
            blob.data.assign(v.begin(), v.end());
            table.emplace("adam.v." + name, std::move(blob));
        }
        return table;
    }

private:
    std::string kind_;
    double lr_;
    std::int64_t t_ = 0;
    std::map<std::string, std::vector<T>> m_, v_;
};

/// Raised on a non-finite loss; carries enough context to reproduce the
/// offending batch.
class TrainAbortError : public std::runtime_error {
public:
    TrainAbortError(int epoch, int step, int batch_index, std::uint64_t seed)
        : std::runtime_error("training aborted: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step) + ", batch index " + std::to_string(batch_index) +
                             "; rerun with seed " + std::to_string(seed) + " to reproduce"),
          epoch(epoch), step(step), batch_index(batch_index), seed(seed) {}
    int epoch, step, batch_index;
    std::uint64_t seed;
};

struct StepInfo {
    int epoch = 0;
    int step = 0; // step index within the epoch
    int stage = 1;
    double loss_modal1 = 0, loss_modal2 = 0, loss_final = 0, total = 0;
};

struct EpochRecord {
    int epoch = 0;
    int stage = 1;
    double loss_modal1 = 0, loss_modal2 = 0, loss_final = 0, total = 0; // epoch means
    bool validated = false;
    DiceReport val;
};

struct TrainHooks {
    std::function<void(const StepInfo&)> on_step;
    std::function<void(const EpochRecord&)> on_epoch;
};

template <typename T>
struct TrainResult {
    Model<T> model; // final parameters
    TensorTable best_params;
    CheckpointAppendix best_appendix;
    std::vector<EpochRecord> history;
    double best_val_dice = -1.0;
    int best_epoch = -1;
    int epochs_run = 0;
};

namespace train_detail {

struct CaseSampling {
    PatchGrid grid;
    PatchSampler sampler;
};

} // namespace train_detail

/// The full optimization loop: per epoch, class-balanced patch batches,
/// stream losses weighted by the stage schedule (the fusion path is skipped
/// entirely in stage 1), Adam/SGD updates, periodic stitched validation and
/// best-checkpoint tracking.
template <typename T>
inline TrainResult<T> train(const NetworkConfig& netcfg, const TrainConfig& cfg, const Dataset& data,
                            const TrainHooks& hooks = {}) {
    netcfg.validate();
    cfg.validate();
    if (data.cases.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& vol : data.cases) {
        vol.validate(netcfg.num_classes);
        if (!vol.has_label()) throw std::invalid_argument("train: every training case needs a label volume");
        if (static_cast<int>(vol.modalities.size()) != netcfg.num_modalities)
            throw std::invalid_argument("train: case modality count does not match the network config");
    }

    // train/validation split by case order
    int val_count = cfg.val_cases;
    if (val_count < 0) val_count = data.cases.size() > 1 ? std::max<int>(1, static_cast<int>(data.cases.size()) / 10) : 0;
    if (val_count >= static_cast<int>(data.cases.size()))
        throw std::invalid_argument("train: validation split leaves no training cases");
    const int train_count = static_cast<int>(data.cases.size()) - val_count;

    std::vector<Volume> norm_cases;
    norm_cases.reserve(data.cases.size());
    for (const auto& vol : data.cases) norm_cases.push_back(normalize(vol));

    std::vector<train_detail::CaseSampling> sampling;
    std::int64_t total_kept = 0;
    for (int c = 0; c < train_count; ++c) {
        train_detail::CaseSampling cs{build_patch_grid(norm_cases[static_cast<std::size_t>(c)].dims(), cfg.patch_size,
                                                       cfg.stride),
                                      PatchSampler{}};
        annotate_patches(cs.grid, data.cases[static_cast<std::size_t>(c)].label);
        cs.sampler = PatchSampler::make(cs.grid, cfg.sampling);
        total_kept += static_cast<std::int64_t>(cs.sampler.kept().size());
        sampling.push_back(std::move(cs));
    }
    const int draws_per_epoch = cfg.samples_per_epoch > 0 ? cfg.samples_per_epoch : static_cast<int>(total_kept);

    TrainResult<T> result;
    result.model = Model<T>::init(netcfg, cfg.seed);
    Optimizer<T> opt(cfg.optimizer, cfg.learning_rate);
    Rng sample_rng(mix_seed(cfg.seed ^ 0x73616d706c65ULL));

    std::map<std::string, std::vector<T>> grad_accum;
    result.model.visit_params(
        [&](const std::string& name, const Tensor<T>& t) { grad_accum[name].assign(static_cast<std::size_t>(t.numel()), T(0)); });

    std::array<int, 3> val_stride = cfg.val_stride;
    for (int a = 0; a < 3; ++a)
        if (val_stride[static_cast<std::size_t>(a)] <= 0) val_stride[static_cast<std::size_t>(a)] = cfg.stride[static_cast<std::size_t>(a)];

    const auto validate_now = [&](EpochRecord& rec) {
        DiceReport agg;
        std::vector<double> per_class(static_cast<std::size_t>(netcfg.num_classes - 1), 0.0);
        const int vbegin = val_count > 0 ? train_count : 0;
        const int vend = val_count > 0 ? static_cast<int>(data.cases.size()) : train_count;
        int n = 0;
        for (int c = vbegin; c < vend; ++c) {
            auto inf = predict_volume(result.model, data.cases[static_cast<std::size_t>(c)], cfg.patch_size, val_stride);
            auto rep = dice_report(inf.labels, data.cases[static_cast<std::size_t>(c)].label, netcfg.num_classes);
            for (std::size_t k = 0; k < per_class.size(); ++k) per_class[k] += rep.per_class[k];
            ++n;
        }
        for (auto& v : per_class) v /= static_cast<double>(n);
        agg.per_class = per_class;
        double sum = 0;
        for (double v : per_class) sum += v;
        agg.mean_foreground = per_class.empty() ? 0.0 : sum / static_cast<double>(per_class.size());
        rec.validated = true;
        rec.val = agg;
    };

    for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
        const LossWeights w = loss_weights(epoch, cfg.stage_switch_epoch);
        const int stage = stage_of(epoch, cfg.stage_switch_epoch);
        const bool with_fusion = result.model.fused_variant() && w.w_final > 0.0;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = stage;

        const int steps = (draws_per_epoch + cfg.batch_size - 1) / cfg.batch_size;
        int drawn = 0;
        for (int step = 0; step < steps; ++step) {
            const int batch = std::min(cfg.batch_size, draws_per_epoch - drawn);
            for (auto& [name, g] : grad_accum) std::fill(g.begin(), g.end(), T(0));
            StepInfo info;
            info.epoch = epoch;
            info.step = step;
            info.stage = stage;

            for (int b = 0; b < batch; ++b, ++drawn) {
                const int c = sampling.size() == 1 ? 0 : static_cast<int>(sample_rng.next_index(sampling.size()));
                const int pidx = sampling[static_cast<std::size_t>(c)].sampler.draw(sample_rng);
                const auto& start = sampling[static_cast<std::size_t>(c)].grid.starts[static_cast<std::size_t>(pidx)];

                std::vector<Tensor<T>> mods;
                for (const auto& m : norm_cases[static_cast<std::size_t>(c)].modalities)
                    mods.push_back(extract_patch<T>(m, start, cfg.patch_size));
                auto labels = extract_label_patch(data.cases[static_cast<std::size_t>(c)].label, start, cfg.patch_size);

                Tape<T> tape;
                auto tracked = result.model.tracked(tape);
                auto out = tracked.forward(mods, with_fusion);

                Tensor<T> loss;
                double l1 = 0, l2 = 0, lf = 0;
                if (tracked.fused_variant()) {
                    auto ce1 = cross_entropy(out.y_stream[0], labels);
                    auto ce2 = cross_entropy(out.y_stream[1], labels);
                    l1 = static_cast<double>(ce1[0]);
                    l2 = static_cast<double>(ce2[0]);
                    loss = add(scale(ce1, static_cast<T>(w.w1)), scale(ce2, static_cast<T>(w.w2)));
                    if (with_fusion) {
                        auto cef = cross_entropy(out.y_final, labels);
                        lf = static_cast<double>(cef[0]);
                        loss = add(loss, scale(cef, static_cast<T>(w.w_final)));
                    }
                } else {
                    auto ce = cross_entropy(out.y_final, labels);
                    if (tracked.cfg.variant == ModelVariant::Single1) l1 = static_cast<double>(ce[0]);
                    else l2 = static_cast<double>(ce[0]);
                    loss = ce;
                }
                const double total = tracked.fused_variant() ? w.w1 * l1 + w.w2 * l2 + w.w_final * lf : l1 + l2;
                if (!std::isfinite(total)) throw TrainAbortError(epoch, step, b, cfg.seed);

                tape.backward(loss);
                tracked.visit_params([&](const std::string& name, const Tensor<T>& t) {
                    if (!tape.has_grad(t)) return;
                    auto g = tape.grad(t);
                    auto& acc = grad_accum[name];
                    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
                });

                info.loss_modal1 += l1;
                info.loss_modal2 += l2;
                info.loss_final += lf;
                info.total += total;
            }

            const T inv = T(1) / static_cast<T>(batch);
            for (auto& [name, g] : grad_accum)
                for (auto& v : g) v *= inv;
            opt.step(result.model, grad_accum);

            info.loss_modal1 /= batch;
            info.loss_modal2 /= batch;
            info.loss_final /= batch;
            info.total /= batch;
            if (hooks.on_step) hooks.on_step(info);

            rec.loss_modal1 += info.loss_modal1;
            rec.loss_modal2 += info.loss_modal2;
            rec.loss_final += info.loss_final;
            rec.total += info.total;
        }
        rec.loss_modal1 /= steps;
        rec.loss_modal2 /= steps;
        rec.loss_final /= steps;
        rec.total /= steps;

        const bool last_epoch = epoch == cfg.total_epochs - 1;
        if (epoch >= cfg.val_start_epoch && (epoch % cfg.val_interval == 0 || last_epoch)) validate_now(rec);

        if (rec.validated && rec.val.mean_foreground > result.best_val_dice) {
            result.best_val_dice = rec.val.mean_foreground;
            result.best_epoch = epoch;
            result.best_params = snapshot_params(result.model);
            result.best_appendix.epoch = static_cast<std::uint32_t>(epoch);
            result.best_appendix.stage = static_cast<std::uint32_t>(stage);
            result.best_appendix.step = static_cast<std::uint64_t>(opt.steps());
            result.best_appendix.seed = cfg.seed;
            result.best_appendix.best_metric = static_cast<float>(rec.val.mean_foreground);
            result.best_appendix.moments = opt.moment_table();
        }

        result.history.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(rec);
        result.epochs_run = epoch + 1;

        if (cfg.early_stop_dice > 0 && rec.validated && rec.val.mean_foreground >= cfg.early_stop_dice) break;
    }

    if (result.best_epoch < 0) {
        result.best_params = snapshot_params(result.model);
        result.best_appendix.epoch = static_cast<std::uint32_t>(result.epochs_run - 1);
        result.best_appendix.seed = cfg.seed;
        result.best_appendix.moments = opt.moment_table();
    }
    return result;
}

} // namespace uafuse
