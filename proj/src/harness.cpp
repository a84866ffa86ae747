#include "harmonica/harness.hpp"

#include "harmonica/error.hpp"

#include <cstdio>
#include <limits>

namespace harmonica {

namespace {

constexpr std::int64_t kDefaultWindow = 24;
constexpr std::size_t kDefaultRetrain = 72;
constexpr double kDefaultReuseDistance = 1.0;
constexpr double kDefaultRidgeLambda = 10.0;
constexpr std::int64_t kPointsPerDay = 288;

} // namespace

TraceParams default_trace_params() {
    TraceParams p;
    p.days = 14;
    p.seed = 7;
    return p;
}

RunConfig with_policy(RunConfig base, const std::string& policy_name) {
    auto policy = builtin_policy(policy_name, static_cast<int>(base.mape.window));
    if (policy.kind == PolicyKind::rules) {
        if (!base.goals) base.goals = harmone_default_goals();
        base.initial_model = ModelId::ridge2;
    } else {
        if (!base.goals) base.goals = std::vector<SustainabilityGoal>{};
        base.initial_model = policy.kind == PolicyKind::fixed ? policy.fixed_model : ModelId::lin;
    }
    base.policy = std::move(policy);
    return base;
}

RunConfig scenario_config(const std::string& policy_name, std::size_t n_points, std::uint64_t seed) {
    RunConfig c;
    c.seed = seed;
    c.mape.window = kDefaultWindow;
    c.mape.retrain_window = kDefaultRetrain;
    c.mape.reuse_max_distance = kDefaultReuseDistance;
    c.ridge_lambda = kDefaultRidgeLambda;
    c.drift_specs = default_drift_specs(n_points, c.split_fraction, 1.3, 40.0, 0.15, c.mape.window);
    return with_policy(std::move(c), policy_name);
}

std::vector<ComparisonRow> compare(const std::vector<std::string>& policies,
                                   const std::vector<TimePoint>& dataset, const RunConfig& base,
                                   int reps,
                                   const std::function<void(const std::string&, int)>& progress) {
    if (reps < 1) throw Error(ErrorKind::validation, "reps must be >= 1", "reps");
    std::vector<ComparisonRow> rows;
    for (const auto& name : policies) {
        ComparisonRow row;
        row.policy = name;
        for (int i = 0; i < reps; ++i) {
            if (progress) progress(name, i);
            RunSummary s;
            try {
                auto cfg = with_policy(base, name);
                cfg.seed = base.seed + static_cast<std::uint64_t>(i);
                s = run_scenario(dataset, cfg);
            } catch (const Error& e) {
                throw Error(e.kind(), "policy '" + name + "' failed: " + e.what(), e.field());
            } catch (const std::exception& e) {
                throw Error(ErrorKind::runtime, "policy '" + name + "' failed: " + e.what());
            }
            row.r2 += s.r2;
            row.mean_latency_ms += s.mean_latency_ms;
            row.total_energy_j += s.total_energy_j;
            row.n_adaptations += static_cast<double>(s.n_adaptations);
            row.n_retrains += static_cast<double>(s.n_retrains);
            row.n_reuses += static_cast<double>(s.n_reuses);
        }
        const double n = reps;
        row.r2 /= n;
        row.mean_latency_ms /= n;
        row.total_energy_j /= n;
        row.n_adaptations /= n;
        row.n_retrains /= n;
        row.n_reuses /= n;
        rows.push_back(row);
    }
    return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "policy,r2,mean_latency_ms,total_energy_j,n_adaptations\n";
    for (const auto& r : rows) {
        out += r.policy + "," + format_real(r.r2) + "," + format_real(r.mean_latency_ms) + "," +
               format_real(r.total_energy_j) + "," + format_real(r.n_adaptations) + "\n";
    }
    return out;
}

ScenarioResult run_with_logs(const std::vector<TimePoint>& dataset, const RunConfig& config) {
    std::shared_ptr<KnowledgeStore> store;
    ScenarioResult out;
    out.summary = run_scenario(dataset, config, &store);
    out.telemetry = store->read_telemetry(0, std::numeric_limits<std::int64_t>::max());
    out.events = store->read_events(0);
    out.charges = store->training_charges();
    out.drift_specs = config.drift_specs;
    return out;
}

RunConfig recurrence_config(std::size_t n_points, std::uint64_t seed, double scale, double shift,
                            std::optional<double> second_scale, std::optional<double> second_shift) {
    auto c = scenario_config("harmone", n_points, seed);
    const auto first = drift_chunk(n_points, c.split_fraction, 0.2, 0.15, scale, shift, c.mape.window);
    auto second = first;
    // Two days later: the same time of day, so identical transforms give matching windows.
    second.start_index += 2 * kPointsPerDay;
    second.end_index += 2 * kPointsPerDay;
    second.scale = second_scale.value_or(scale);
    second.shift = second_shift.value_or(shift);
    if (second.end_index > static_cast<std::int64_t>(n_points)) {
        throw Error(ErrorKind::validation, "dataset too short for the recurrence scenario");
    }
    c.drift_specs = {first, second};
    return c;
}

ScenarioResult recurrence_scenario(const std::vector<TimePoint>& dataset, const RunConfig& config) {
    if (config.drift_specs.size() != 2) {
        throw Error(ErrorKind::validation, "recurrence scenario needs exactly two drift chunks",
                    "drift_specs");
    }
    return run_with_logs(dataset, config);
}

} // namespace harmonica
