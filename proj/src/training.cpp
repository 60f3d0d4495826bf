#include "softroi/training.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace softroi {

void TrainConfig::validate() const {
    if (stage != 1 && stage != 2) throw InvalidInput("stage must be 1 or 2");
    if (epochs < 1 || batch_size < 1) throw InvalidInput("epochs and batch_size must be >= 1");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
        throw InvalidInput("betas must lie in (0, 1)");
    if (max_lr < 0.0) throw InvalidInput("max_lr must be nonnegative");
    if (warmup_dropout_epochs < 0) throw InvalidInput("warmup_dropout_epochs must be >= 0");
}

TrainConfig train_preset(const std::string& preset, int stage) {
    TrainConfig c;
    c.stage = stage;
    if (preset == "desk") {
        c.epochs = stage == 1 ? 40 : 30;
        c.batch_size = 8;
    } else if (preset == "paper") {
        c.epochs = stage == 1 ? 180 : 200;
        c.batch_size = 32;
    } else {
        throw InvalidInput("unknown preset '" + preset + "' (expected desk or paper)");
    }
    c.max_lr = stage == 1 ? 3e-4 : 1e-4;
    c.warmup_dropout_epochs = stage == 1 ? 3 : 0;
    return c;
}

std::size_t validation_start(std::size_t n_samples) {
    if (n_samples < 2) throw InvalidInput("need at least 2 samples per subject for a validation split");
    std::size_t n_val = std::max<std::size_t>(1, n_samples / 5);
    return n_samples - n_val;
}

double evaluate_mse(const SubjectData& subj, std::size_t begin, std::size_t end, const EncoderParams& params,
                    const EncoderConfig& enc_cfg) {
    if (begin >= end) throw InvalidInput("empty evaluation range");
    double acc = 0.0;
    SubjectBatch batch;
    batch.coords = subj.coords;
    batch.memberships = subj.memberships;
    for (std::size_t i = begin; i < end; ++i) {
        batch.signals = subj.signals[i];
        acc += alignment_loss(encode(batch, params, enc_cfg), subj.targets[i]);
    }
    return acc / static_cast<double>(end - begin);
}

namespace {

struct Chunk {
    std::size_t subject;
    std::vector<std::size_t> samples;
};

EpochRecord evaluate_epoch(const SyntheticDataset& ds, const EncoderParams& params, const EncoderConfig& enc_cfg,
                           int epoch, int stage) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = stage;
    double train_acc = 0.0;
    std::size_t train_count = 0;
    for (const auto& subj : ds.subjects) {
        const std::size_t val_begin = validation_start(subj.n_samples());
        train_acc += evaluate_mse(subj, 0, val_begin, params, enc_cfg) * static_cast<double>(val_begin);
        train_count += val_begin;
        rec.val_mse_per_subject.push_back(evaluate_mse(subj, val_begin, subj.n_samples(), params, enc_cfg));
    }
    rec.train_mse = train_acc / static_cast<double>(train_count);
    rec.macro_val_mse =
        std::accumulate(rec.val_mse_per_subject.begin(), rec.val_mse_per_subject.end(), 0.0) /
        static_cast<double>(rec.val_mse_per_subject.size());
    return rec;
}

}  // namespace

StageResult run_stage(const TrainConfig& cfg, const SyntheticDataset& dataset, const EncoderConfig& enc_cfg,
                      const EncoderParams& init_params) {
    cfg.validate();
    enc_cfg.validate();
    if (dataset.subjects.empty()) throw InvalidInput("dataset has no subjects");
    for (const auto& subj : dataset.subjects)
        if (subj.n_samples() != subj.targets.size() || subj.n_samples() == 0)
            throw InvalidInput("subject " + subj.name + " has inconsistent samples");

    EncoderParams params = init_params;
    OptimizerState opt = make_optimizer_state(params);
    AdamWConfig adamw;
    adamw.weight_decay = cfg.weight_decay;
    adamw.beta1 = cfg.beta1;
    adamw.beta2 = cfg.beta2;

    Rng shuffle_rng(cfg.seed);
    Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    // Fixed step count for the one-cycle schedule.
    long steps_per_epoch = 0;
    for (const auto& subj : dataset.subjects) {
        const auto n_train = static_cast<long>(validation_start(subj.n_samples()));
        steps_per_epoch += (n_train + cfg.batch_size - 1) / cfg.batch_size;
    }
    const long total_steps = steps_per_epoch * cfg.epochs;

    StageResult result;
    result.curve.push_back(evaluate_epoch(dataset, params, enc_cfg, 0, cfg.stage));
    result.best_epoch = 0;
    result.best_macro_val = result.curve.front().macro_val_mse;
    EncoderParams best_params = params;

    long step = 0;
    SubjectBatch batch;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const bool dropout_on = cfg.stage == 1 && epoch <= cfg.warmup_dropout_epochs;

        std::vector<Chunk> chunks;
        for (std::size_t s = 0; s < dataset.subjects.size(); ++s) {
            const auto& subj = dataset.subjects[s];
            std::vector<std::size_t> order(validation_start(subj.n_samples()));
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
                Chunk c;
                c.subject = s;
                for (std::size_t i = at; i < std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size)); ++i)
                    c.samples.push_back(order[i]);
                chunks.push_back(std::move(c));
            }
        }
        std::shuffle(chunks.begin(), chunks.end(), shuffle_rng);

        for (const auto& chunk : chunks) {
            const auto& subj = dataset.subjects[chunk.subject];
            batch.coords = subj.coords;
            batch.memberships = subj.memberships;
            EncoderParams grads = zeros_like(params);
            auto acc_refs = grads.tensors();
            for (std::size_t idx : chunk.samples) {
                batch.signals = subj.signals[idx];
                EncoderParams g = encoder_backward(batch, params, enc_cfg, subj.targets[idx], nullptr,
                                                   dropout_on, dropout_on ? &dropout_rng : nullptr);
                auto g_refs = g.tensors();
                for (std::size_t t = 0; t < acc_refs.size(); ++t)
                    Eigen::Map<Vector>(acc_refs[t].data, acc_refs[t].rows * acc_refs[t].cols) +=
                        Eigen::Map<const Vector>(g_refs[t].data, g_refs[t].rows * g_refs[t].cols);
            }
            const double scale = 1.0 / static_cast<double>(chunk.samples.size());
            for (auto& t : acc_refs) Eigen::Map<Vector>(t.data, t.rows * t.cols) *= scale;

            const double lr = cfg.max_lr > 0.0 ? one_cycle_lr(step, total_steps, cfg.max_lr) : 0.0;
            adamw_step(params, grads, opt, lr, adamw);
            ++step;
        }

        result.curve.push_back(evaluate_epoch(dataset, params, enc_cfg, epoch, cfg.stage));
        if (result.curve.back().macro_val_mse < result.best_macro_val) {
            result.best_macro_val = result.curve.back().macro_val_mse;
            result.best_epoch = epoch;
            best_params = params;
        }
    }

    result.best.params = std::move(best_params);
    result.best.config = enc_cfg;
    result.best.atlas_cols = dataset.atlas_cols();
    result.best.seed = cfg.seed;
    result.best.meta = {{"stage", cfg.stage},
                        {"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"max_lr", cfg.max_lr},
                        {"best_epoch", result.best_epoch},
                        {"best_macro_val_mse", result.best_macro_val}};
    return result;
}

void write_loss_curve_csv(std::ostream& os, const std::vector<EpochRecord>& curve,
                          const std::vector<std::string>& subject_names, const std::string& header_comment) {
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "epoch,stage,train_mse";
    for (const auto& name : subject_names) os << ",val_mse_" << name;
    os << ",macro_val_mse\n";
    os.precision(17);
    for (const auto& rec : curve) {
        os << rec.epoch << ',' << rec.stage << ',' << rec.train_mse;
        for (double v : rec.val_mse_per_subject) os << ',' << v;
        os << ',' << rec.macro_val_mse << '\n';
    }
}

}  // namespace softroi
