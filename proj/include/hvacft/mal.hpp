#pragma once
// Model-assisted learning for the temperature estimator.  The identified
// linear zone recurrence generates unlimited synthetic history windows,
// which power (a) masked-value self-supervised pretraining of the
// estimator's early layers and (b) a Reptile-style outer loop alternating
// synthetic-batch gradient steps with labeled fine-tuning.  Both cut the
// amount of logged plant data the estimator needs, and both are compared
// against plain supervised baselines by the ablation recipe.

#include <cstdint>
#include <vector>

#include "hvacft/abstract_model.hpp"
#include "hvacft/errors.hpp"
#include "hvacft/nn.hpp"
#include "hvacft/predictor.hpp"
#include "hvacft/rng.hpp"

namespace hvacft::mal {

// Sampling envelope for synthetic windows: indoor and ambient temperatures
// are drawn uniformly from [kDrawLow_c, kDrawHigh_c]; temperatures produced
// by rolling the zone model forward are clamped to [kClampLow_c,
// kClampHigh_c] as a physical sanity bound.
inline constexpr double kDrawLow_c = 10.0;
inline constexpr double kDrawHigh_c = 40.0;
inline constexpr double kClampLow_c = 0.0;
inline constexpr double kClampHigh_c = 50.0;

struct MalConfig {
    double eta1 = 1e-4;        // outer interpolation step toward the tuned model
    double eta2 = 1e-6;        // synthetic-batch plain-SGD step
    double eta3 = 1e-3;        // labeled fine-tune learning rate (Adam)
    int batch_ms = 40;         // synthetic batch size
    int ssl_epochs = 2;        // outer passes over the masked-task list
    int ssl_task_epochs = 3;   // epochs per task visit
    int ft_epochs = 3;         // labeled fine-tune epochs
    int n_iter = 1000;         // outer-loop iterations
    double mask_value = -1.0;  // written over masked normalised temperatures
    double direction = 1.0;    // +1: move toward the tuned model; -1: away
    int ssl_pool = 2000;       // synthetic sequences in the pretraining pool
    int ssl_head = 128;        // width of the first task-head layer
    double period_min = 15.0;  // clock advance per window step
    std::vector<double> flow_levels_kgps = {0.0, 0.25};  // action level set

    void validate() const;  // throws ConfigError
};

// A synthetic supervised batch shares the labeled Dataset layout: x rows are
// flattened k-step windows, y rows the model's next-step indoor temperatures
// in raw degC.
using RandomBatch = predictor::Dataset;

// Draws `rows` synthetic windows.  Per window the first step is uniform over
// the sampling envelope (clock, indoor temps, ambient, one flow level per
// zone); each of the k-1 following steps redraws the flows uniformly, keeps
// the ambient, advances the clock by one period, and advances the indoor
// temperatures through the zone model (clamped); the label is the model's
// next-step indoor temperature after the final step.  Flows are normalised
// by the largest configured level.
RandomBatch sample_rows(const absmodel::AbstractModel& m,
                        const predictor::PredictorConfig& pcfg, const MalConfig& cfg, int rows,
                        Rng& rng);

// sample_rows with cfg.batch_ms rows.
RandomBatch sample_batch(const absmodel::AbstractModel& m,
                         const predictor::PredictorConfig& pcfg, const MalConfig& cfg,
                         Rng& rng);

// Masked-value auxiliary task `task_step` (0-based): every indoor-temperature
// feature of that window step is overwritten with mask_value, and the labels
// become the original temperatures in raw degC.  The pool's own labels are
// ignored.  task_step must lie in [0, pool.k) (ConfigError).
predictor::Dataset masked_task(const predictor::Dataset& pool, int task_step,
                               double mask_value);

// Self-supervised pretraining: one masked task per window step (k tasks).
// All tasks share a trunk of the first three dense layers; each task owns a
// fresh two-layer head [ssl_head, zones].  Tasks are visited in step order,
// ssl_epochs times, each visit training ssl_task_epochs epochs at pcfg.lr
// with batch_ms rows per update.  Returns the trained trunk merged into a
// full estimator ParamSet whose remaining layers keep their fresh
// initialisation.  Requires at least three hidden layers (ConfigError).
nn::ParamSet ssl_pretrain(const absmodel::AbstractModel& m,
                          const predictor::PredictorConfig& pcfg, const MalConfig& cfg,
                          std::uint64_t seed);

// Reptile-style outer loop from initial parameters phi0.  Per iteration: draw
// a synthetic batch, take one plain SGD step at eta2 on its squared error,
// fine-tune the result on `labeled` for ft_epochs at eta3, then move phi by
// direction * eta1 toward (or away from) the tuned parameters.  After n_iter
// iterations the returned parameters are fine-tuned once more on `labeled`.
// n_iter = 0 therefore reduces to plain fine-tuning from phi0.  Non-finite
// parameters raise TrainingError naming the iteration.
nn::ParamSet ru_loop(const nn::ParamSet& phi0, const absmodel::AbstractModel& m,
                     const predictor::Dataset& labeled,
                     const predictor::PredictorConfig& pcfg, const MalConfig& cfg,
                     std::uint64_t seed);

// Supervised reference: fresh initialisation fine-tuned on `labeled` for
// ft_epochs at eta3 — the shared labeled recipe every strategy ends with.
nn::ParamSet baseline_labeled_only(const predictor::Dataset& labeled,
                                   const predictor::PredictorConfig& pcfg,
                                   const MalConfig& cfg, std::uint64_t seed);

// Distillation reference: n_iter synthetic batches at eta2 (plain SGD) from a
// fresh initialisation, then the shared labeled recipe.  n_iter = 0 reduces
// bitwise to baseline_labeled_only.
nn::ParamSet baseline_distill_finetune(const absmodel::AbstractModel& m,
                                       const predictor::Dataset& labeled,
                                       const predictor::PredictorConfig& pcfg,
                                       const MalConfig& cfg, std::uint64_t seed);

}  // namespace hvacft::mal
