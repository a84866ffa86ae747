#pragma once

#include "harmonica/knowledge.hpp"
#include "harmonica/pipeline.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace harmonica::mape {

/// Aggregates over one analysis window of completed telemetry records.
struct MetricsSnapshot {
    std::int64_t window_start_seq = 0;
    std::int64_t window_end_seq = 0;
    double rolling_mae = 0.0;
    double mean_latency_ms = 0.0;
    double energy_per_inference_j = 0.0;
    double drift_score = 0.0;
    DataSignature current_signature;
};

double metric_value(const MetricsSnapshot& snapshot, Metric metric);

struct MetricBoundary {
    bool initialized = false;
    double ewma_mean = 0.0;
    double ewma_var = 0.0;
    int consecutive_breaches = 0;
};

using BoundaryState = std::map<std::pair<Metric, Direction>, MetricBoundary>;

struct BoundaryUpdate {
    MetricBoundary state;
    double effective_threshold = 0.0;
};

/// EWMA band intersected with the static threshold. The threshold uses the
/// state before `value` is folded in; the first observation initializes the
/// state (variance 0) and is judged against the static threshold alone.
BoundaryUpdate update_dynamic_boundary(const MetricBoundary& state, double value,
                                       const SustainabilityGoal& goal);

struct Violation {
    Metric metric = Metric::rolling_mae;
    Direction direction = Direction::upper;
    double value = 0.0;
    double effective_threshold = 0.0;
};

struct AnalysisReport {
    MetricsSnapshot snapshot;
    std::vector<Violation> violations;
    bool drift_flag = false;
};

/// Snapshot of records [window_start, window_start + W) and their input samples.
MetricsSnapshot summarize_window(std::span<const TelemetryRecord> records,
                                 std::span<const WindowSample> samples,
                                 const DataSignature& reference);

/// Snapshot over the last `window` completed records; empty when fewer exist.
std::optional<MetricsSnapshot> monitor(const KnowledgeStore& store, std::int64_t window,
                                       const DataSignature& reference);

/// Judges every goal, updating breach counters in `states`. A violation is
/// reported when a goal's counter reaches its hysteresis_n; the counter then restarts.
AnalysisReport analyze(const MetricsSnapshot& snapshot, std::span<const SustainabilityGoal> goals,
                       BoundaryState& states);

struct PlannedTactic {
    Tactic tactic;
    /// Triggering goal: a metric name or `drift`; empty for NoOp without a match.
    std::string goal;
    std::optional<double> metric_value;
    std::optional<double> threshold;
};

/// First matching rule wins. Pure given the store's version set.
PlannedTactic plan(const AnalysisReport& report, const AdaptationPolicy& policy,
                   const KnowledgeStore& store, ModelId current, double reuse_max_distance);

struct MapeConfig {
    std::int64_t window = 50;
    std::size_t retrain_window = 500;
    double reuse_max_distance = 0.5;
    /// Record NoOp plans that matched a rule as events.
    bool log_noop = false;
};

void validate(const MapeConfig& cfg);

/// Runs Monitor -> Analyze -> Plan -> Execute against one pipeline.
class MapeEngine {
public:
    MapeEngine(KnowledgeStore& store, ManagedPipeline& pipeline, MapeConfig cfg);

    /// Reference signature for the drift score. Retrain and ReuseVersion replace
    /// it with the signature of the next full window.
    void set_reference(const DataSignature& reference) {
        reference_ = reference;
        rebase_pending_ = false;
    }
    const DataSignature& reference() const { return reference_; }

    /// One full cycle over the latest window. Returns the event it logged, if any.
    std::optional<AdaptationEvent> cycle();

    /// Applies a tactic and logs the event (NoOp logs only when configured).
    std::optional<AdaptationEvent> execute(const PlannedTactic& planned);

    const BoundaryState& boundaries() const { return states_; }
    const std::optional<AnalysisReport>& last_report() const { return last_report_; }
    const MapeConfig& config() const { return cfg_; }
    /// Energy of tiers first trained on demand from warm-up data (not charged to the replay).
    double offline_training_j() const { return offline_training_j_; }

private:
    models::ModelVersion version_for_tier(ModelId model_id);

    KnowledgeStore& store_;
    ManagedPipeline& pipeline_;
    MapeConfig cfg_;
    DataSignature reference_;
    bool rebase_pending_ = false;
    BoundaryState states_;
    std::optional<AnalysisReport> last_report_;
    double offline_training_j_ = 0.0;
};

/// Next model in tier order (wraps from the top tier to the bottom).
ModelId next_in_rotation(ModelId current);

} // namespace harmonica::mape
