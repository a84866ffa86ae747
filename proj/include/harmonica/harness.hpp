#pragma once

#include "harmonica/config.hpp"
#include "harmonica/runner.hpp"
#include "harmonica/trace.hpp"

#include <functional>
#include <string>
#include <vector>

namespace harmonica {

/// Trace used by the default scenario: 14 synthetic days.
TraceParams default_trace_params();

/// Default scenario for `policy_name` on a dataset of `n_points`: built-in
/// policy, its goals, two aligned drift chunks (scale 1.3, shift +40) and
/// cost-model energy.
RunConfig scenario_config(const std::string& policy_name, std::size_t n_points, std::uint64_t seed = 42);

/// Sets policy, goals and initial model for `policy_name`, keeping the rest of `base`.
RunConfig with_policy(RunConfig base, const std::string& policy_name);

/// Per-policy means over the repetitions.
struct ComparisonRow {
    std::string policy;
    double r2 = 0.0;
    double mean_latency_ms = 0.0;
    double total_energy_j = 0.0;
    double n_adaptations = 0.0;
    double n_retrains = 0.0;
    double n_reuses = 0.0;
};

/// Runs every policy `reps` times with seeds base.seed + 0 .. reps - 1 and
/// averages the summaries. A failed run aborts with an error naming the policy.
std::vector<ComparisonRow> compare(const std::vector<std::string>& policies,
                                   const std::vector<TimePoint>& dataset, const RunConfig& base,
                                   int reps,
                                   const std::function<void(const std::string&, int)>& progress = {});

/// `policy,r2,mean_latency_ms,total_energy_j,n_adaptations`
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

struct ScenarioResult {
    RunSummary summary;
    std::vector<TelemetryRecord> telemetry;
    std::vector<AdaptationEvent> events;
    std::vector<TrainingCharge> charges;
    std::vector<DriftSpec> drift_specs;
};

/// Full run that keeps the logs.
ScenarioResult run_with_logs(const std::vector<TimePoint>& dataset, const RunConfig& config);

/// harmone over two drift chunks placed a whole number of days apart so the
/// second chunk replays the first chunk's conditions when their transforms match.
/// `second_scale`/`second_shift` default to the first chunk's.
RunConfig recurrence_config(std::size_t n_points, std::uint64_t seed = 42, double scale = 1.3,
                            double shift = 40.0, std::optional<double> second_scale = std::nullopt,
                            std::optional<double> second_shift = std::nullopt);

ScenarioResult recurrence_scenario(const std::vector<TimePoint>& dataset, const RunConfig& config);

} // namespace harmonica
