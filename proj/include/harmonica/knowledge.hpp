#pragma once

#include "harmonica/model_spectrum.hpp"
#include "harmonica/model_types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace harmonica {

enum class Metric { rolling_mae, energy_per_inference_j, latency_ms, drift_score };
enum class Direction { upper, lower };

std::string_view to_string(Metric m) noexcept;
std::string_view to_string(Direction d) noexcept;
std::optional<Metric> parse_metric(std::string_view text) noexcept;
std::optional<Direction> parse_direction(std::string_view text) noexcept;

/// An adaptation boundary on one runtime metric.
struct SustainabilityGoal {
    Metric metric = Metric::rolling_mae;
    Direction direction = Direction::upper;
    double static_threshold = 0.0;
    bool dynamic = false;
    double ewma_alpha = 0.1;
    double band_k = 3.0;
    int hysteresis_n = 3;
};

/// Throws Error{validation}; `field` prefixes the reported field path.
void validate_goal(const SustainabilityGoal& goal, const std::string& field = {});
/// Per-goal checks plus uniqueness of (metric, direction).
void validate_goals(std::span<const SustainabilityGoal> goals);

enum class TacticKind { SwitchUp, SwitchDown, SwitchTo, Retrain, ReuseVersion, NoOp };

std::string_view to_string(TacticKind k) noexcept;
std::optional<TacticKind> parse_tactic(std::string_view text) noexcept;

struct Tactic {
    TacticKind kind = TacticKind::NoOp;
    /// SwitchTo target.
    std::optional<ModelId> model;
    /// ReuseVersion target, resolved by the planner.
    std::optional<std::int64_t> version_id;

    friend bool operator==(const Tactic&, const Tactic&) = default;
};

struct PolicyRule {
    /// True for the `drift` wildcard; `metric`/`direction` are then unused.
    bool drift = false;
    Metric metric = Metric::rolling_mae;
    /// Absent matches either direction.
    std::optional<Direction> direction;
    Tactic tactic;
};

enum class PolicyKind { fixed, round_robin, rules };

struct AdaptationPolicy {
    std::string name;
    PolicyKind kind = PolicyKind::rules;
    /// Model held by a fixed policy.
    ModelId fixed_model = ModelId::lin;
    int switch_interval = 1;
    std::vector<PolicyRule> rules;
    /// Retrain tactics first look for a stored version close to the current data.
    bool reuse_before_retrain = false;
};

void validate_policy(const AdaptationPolicy& policy);

enum class Outcome { applied, reuse_hit, retrained, noop };

std::string_view to_string(Outcome o) noexcept;
std::optional<Outcome> parse_outcome(std::string_view text) noexcept;

struct TelemetryRecord {
    std::int64_t seq = 0;
    std::string timestamp;
    ModelId model_id = ModelId::lin;
    double prediction = 0.0;
    std::optional<double> actual;
    std::optional<double> abs_error;
    double latency_ms = 0.0;
    double energy_j = 0.0;
    double cumulative_energy_j = 0.0;

    friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

struct AdaptationEvent {
    std::int64_t seq = 0;
    std::string timestamp;
    /// Metric name, `drift`, or `schedule` for round-robin switches.
    std::string goal;
    std::optional<double> metric_value;
    std::optional<double> threshold;
    TacticKind tactic = TacticKind::NoOp;
    ModelId model_before = ModelId::lin;
    ModelId model_after = ModelId::lin;
    std::optional<std::int64_t> version_used;
    Outcome outcome = Outcome::noop;
    /// Diagnostic text; not exported to CSV.
    std::string note;

    friend bool operator==(const AdaptationEvent& a, const AdaptationEvent& b) {
        return a.seq == b.seq && a.timestamp == b.timestamp && a.goal == b.goal &&
               a.metric_value == b.metric_value && a.threshold == b.threshold &&
               a.tactic == b.tactic && a.model_before == b.model_before &&
               a.model_after == b.model_after && a.version_used == b.version_used &&
               a.outcome == b.outcome;
    }
};

/// Training energy charged to the run, attributed to the telemetry record that absorbed it.
struct TrainingCharge {
    std::int64_t seq = 0;
    std::int64_t version_id = 0;
    ModelId model_id = ModelId::lin;
    double joules = 0.0;
};

enum class CsvKind { telemetry, adaptations };

inline constexpr std::string_view kTelemetryHeader =
    "seq,timestamp,model_id,prediction,actual,abs_error,latency_ms,energy_j,cumulative_energy_j";
inline constexpr std::string_view kAdaptationsHeader =
    "seq,timestamp,goal,metric_value,threshold,tactic,model_before,model_after,version_used,outcome";

/// Shared state of the managing system. One writer (the run loop) and any
/// number of concurrent readers; every accessor returns a copy taken under
/// the store's lock, so readers always see a consistent prefix.
class KnowledgeStore {
public:
    // goals and policy
    void put_goals(std::vector<SustainabilityGoal> goals);
    std::vector<SustainabilityGoal> goals() const;
    /// Incremented by every put_goals.
    std::uint64_t goals_generation() const;
    void put_policy(AdaptationPolicy policy);
    AdaptationPolicy policy() const;

    // versioned models
    std::int64_t store_version(models::ModelVersion version);
    std::optional<models::ModelVersion> version(std::int64_t version_id) const;
    std::optional<models::ModelVersion> latest_version(ModelId model_id) const;
    std::vector<models::ModelVersion> versions() const;
    std::optional<models::ModelVersion> find_similar_version(const DataSignature& sig,
                                                            ModelId model_id,
                                                            double max_distance) const;

    // data repository: the training windows followed by replayed windows in seq order
    void set_training_data(std::vector<WindowSample> samples);
    std::vector<WindowSample> training_data() const;
    void add_replayed_sample(const WindowSample& sample);
    /// Replayed samples [begin, end) by telemetry seq.
    std::vector<WindowSample> replayed_samples(std::int64_t begin, std::int64_t end) const;
    /// The last `count` samples whose ground truth is known (training windows count).
    std::vector<WindowSample> recent_completed(std::size_t count) const;

    // telemetry log
    std::int64_t append_telemetry(const TelemetryRecord& record);
    /// Fills actual/abs_error of the newest record; the only permitted mutation.
    void backfill_last(double actual);
    std::vector<TelemetryRecord> read_telemetry(std::int64_t since_seq, std::int64_t limit) const;
    std::int64_t telemetry_size() const;
    /// Records whose actual is known.
    std::int64_t completed_size() const;
    std::optional<TelemetryRecord> last_record() const;

    // adaptation log
    void append_event(AdaptationEvent event);
    std::vector<AdaptationEvent> read_events(std::int64_t since_seq) const;

    void add_training_charge(const TrainingCharge& charge);
    std::vector<TrainingCharge> training_charges() const;

    std::string export_csv(CsvKind kind) const;

private:
    mutable std::shared_mutex mutex_;
    std::vector<SustainabilityGoal> goals_;
    std::uint64_t goals_generation_ = 0;
    AdaptationPolicy policy_;
    std::map<std::int64_t, models::ModelVersion> versions_;
    std::vector<WindowSample> training_;
    std::vector<WindowSample> replayed_;
    std::vector<TelemetryRecord> telemetry_;
    std::int64_t completed_ = 0;
    std::vector<AdaptationEvent> events_;
    std::vector<TrainingCharge> charges_;
};

// CSV encoding shared by the exports and their parsers.
std::string format_real(double v);
std::string telemetry_csv(std::span<const TelemetryRecord> records);
std::string adaptations_csv(std::span<const AdaptationEvent> events);
/// Throws Error{input} naming the 1-based line of a malformed row.
std::vector<TelemetryRecord> parse_telemetry_csv(std::string_view text);
std::vector<AdaptationEvent> parse_adaptations_csv(std::string_view text);

} // namespace harmonica
