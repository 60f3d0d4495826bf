#pragma once

#include <iosfwd>

#include "softroi/checkpoint.hpp"
#include "softroi/optim.hpp"
#include "softroi/synthetic.hpp"

namespace softroi {

struct TrainConfig {
    int stage = 1;
    int epochs = 40;
    int batch_size = 8;
    double max_lr = 3e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.95;
    int warmup_dropout_epochs = 3;  // dropout active for the first N epochs of stage 1
    std::uint64_t seed = 42;

    void validate() const;
};

// Named presets. "desk" runs in seconds on the synthetic data; "paper"
// carries the full-scale epoch/batch/lr settings for the record.
TrainConfig train_preset(const std::string& preset, int stage);

struct EpochRecord {
    int epoch = 0;  // 0 = pre-training evaluation
    int stage = 1;
    double train_mse = 0.0;
    std::vector<double> val_mse_per_subject;
    double macro_val_mse = 0.0;
};

struct StageResult {
    Checkpoint best;
    int best_epoch = 0;
    double best_macro_val = 0.0;
    std::vector<EpochRecord> curve;
};

// One training stage: seeded shuffling, AdamW with a one-cycle schedule,
// per-epoch validation on the last 20% of every subject's samples, and
// checkpoint selection by the unweighted macro-average validation MSE.
StageResult run_stage(const TrainConfig& cfg, const SyntheticDataset& dataset, const EncoderConfig& enc_cfg,
                      const EncoderParams& init_params);

void write_loss_curve_csv(std::ostream& os, const std::vector<EpochRecord>& curve,
                          const std::vector<std::string>& subject_names, const std::string& header_comment = "");

// Mean alignment loss over a sample range (dropout off).
double evaluate_mse(const SubjectData& subj, std::size_t begin, std::size_t end, const EncoderParams& params,
                    const EncoderConfig& enc_cfg);

std::size_t validation_start(std::size_t n_samples);

}  // namespace softroi
