#pragma once

#include "harmonica/config.hpp"
#include "harmonica/knowledge.hpp"
#include "harmonica/mape.hpp"
#include "harmonica/pipeline.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace harmonica {

struct RunSummary {
    double r2 = 0.0;
    double mean_latency_ms = 0.0;
    /// Inference energy plus training charged during the replay.
    double total_energy_j = 0.0;
    std::int64_t n_adaptations = 0;
    std::int64_t n_retrains = 0;
    std::int64_t n_reuses = 0;
    /// Training on the warm-up split, reported separately.
    double warmup_energy_j = 0.0;
    std::int64_t n_records = 0;
};

Json to_json(const RunSummary& s);

/// 1 - SSE / SST. Throws Error{input} on length mismatch or fewer than two
/// pairs, Error{insufficient_data} when every actual is identical.
double compute_r2(std::span<const double> predictions, std::span<const double> actuals);

/// The two default drift chunks: each covers `fraction` of the evaluation
/// stream, starting at 20% and 60% of it. `align` rounds chunk starts so the
/// first fully drifted window begins on an analysis-window boundary.
std::vector<DriftSpec> default_drift_specs(std::size_t n_points, double split_fraction,
                                           double scale = 1.3, double shift = 40.0,
                                           double fraction = 0.15, std::int64_t align = 0);

/// One drift chunk starting `start_fraction` of the way into the evaluation
/// stream and covering `fraction` of it.
DriftSpec drift_chunk(std::size_t n_points, double split_fraction, double start_fraction,
                      double fraction, double scale, double shift, std::int64_t align = 0);

/// Evaluation-split start index for `n_points` and `split_fraction`.
std::size_t split_index(std::size_t n_points, double split_fraction);

/// One experiment: warm-up training, then replay of the evaluation split with
/// a MAPE cycle after every W completed records.
class Run {
public:
    /// `config.policy` and `config.goals` must be set.
    Run(std::vector<TimePoint> dataset, RunConfig config,
        std::shared_ptr<KnowledgeStore> store = std::make_shared<KnowledgeStore>());

    /// Runs to completion or until `stop` becomes true (checked between steps).
    RunSummary execute(const std::atomic<bool>* stop = nullptr);

    const std::shared_ptr<KnowledgeStore>& store() const { return store_; }
    std::optional<ModelId> deployed_model() const;

private:
    std::vector<TimePoint> dataset_;
    RunConfig config_;
    std::shared_ptr<KnowledgeStore> store_;
    std::unique_ptr<ManagedPipeline> pipeline_;
};

/// Summary of a store after a replay.
RunSummary summarize(const KnowledgeStore& store, double pending_training_j, double warmup_energy_j);

/// Convenience wrapper: a fresh store, to completion.
RunSummary run_scenario(std::vector<TimePoint> dataset, const RunConfig& config,
                        std::shared_ptr<KnowledgeStore>* store_out = nullptr);

} // namespace harmonica
