#include "harmonica/mape.hpp"

#include "harmonica/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace harmonica::mape {

double metric_value(const MetricsSnapshot& snapshot, Metric metric) {
    switch (metric) {
        case Metric::rolling_mae: return snapshot.rolling_mae;
        case Metric::energy_per_inference_j: return snapshot.energy_per_inference_j;
        case Metric::latency_ms: return snapshot.mean_latency_ms;
        case Metric::drift_score: return snapshot.drift_score;
    }
    return 0.0;
}

BoundaryUpdate update_dynamic_boundary(const MetricBoundary& state, double value,
                                       const SustainabilityGoal& goal) {
    BoundaryUpdate out;
    out.state = state;
    if (!state.initialized) {
        out.effective_threshold = goal.static_threshold;
        out.state.initialized = true;
        out.state.ewma_mean = value;
        out.state.ewma_var = 0.0;
        return out;
    }
    const double band = goal.band_k * std::sqrt(state.ewma_var);
    out.effective_threshold = goal.direction == Direction::upper
                                  ? std::min(goal.static_threshold, state.ewma_mean + band)
                                  : std::max(goal.static_threshold, state.ewma_mean - band);
    const double a = goal.ewma_alpha;
    const double dev = value - state.ewma_mean;
    out.state.ewma_mean = a * value + (1.0 - a) * state.ewma_mean;
    out.state.ewma_var = a * dev * dev + (1.0 - a) * state.ewma_var;
    return out;
}

MetricsSnapshot summarize_window(std::span<const TelemetryRecord> records,
                                 std::span<const WindowSample> samples,
                                 const DataSignature& reference) {
    if (records.empty()) throw Error(ErrorKind::insufficient_data, "empty analysis window");
    MetricsSnapshot s;
    s.window_start_seq = records.front().seq;
    s.window_end_seq = records.back().seq;
    double mae = 0.0;
    double latency = 0.0;
    double energy = 0.0;
    for (const auto& r : records) {
        if (!r.abs_error) {
            throw Error(ErrorKind::insufficient_data,
                        "record " + std::to_string(r.seq) + " has no ground truth yet");
        }
        mae += *r.abs_error;
        latency += r.latency_ms;
        energy += r.energy_j;
    }
    const auto n = static_cast<double>(records.size());
    s.rolling_mae = mae / n;
    s.mean_latency_ms = latency / n;
    s.energy_per_inference_j = energy / n;
    s.current_signature = models::signature(samples);
    s.drift_score = models::signature_distance(s.current_signature, reference);
    return s;
}

std::optional<MetricsSnapshot> monitor(const KnowledgeStore& store, std::int64_t window,
                                       const DataSignature& reference) {
    const auto end = store.completed_size();
    if (window < 1 || end < window) return std::nullopt;
    const auto begin = end - window;
    const auto records = store.read_telemetry(begin, window);
    const auto samples = store.replayed_samples(begin, end);
    if (static_cast<std::int64_t>(records.size()) != window ||
        static_cast<std::int64_t>(samples.size()) != window) {
        return std::nullopt;
    }
    return summarize_window(records, samples, reference);
}

AnalysisReport analyze(const MetricsSnapshot& snapshot, std::span<const SustainabilityGoal> goals,
                       BoundaryState& states) {
    AnalysisReport report;
    report.snapshot = snapshot;
    std::set<std::pair<Metric, Direction>> live;
    for (const auto& goal : goals) {
        const auto key = std::make_pair(goal.metric, goal.direction);
        live.insert(key);
        auto& state = states[key];
        const double value = metric_value(snapshot, goal.metric);
        double threshold = goal.static_threshold;
        if (goal.dynamic) {
            const auto update = update_dynamic_boundary(state, value, goal);
            threshold = update.effective_threshold;
            const int breaches = state.consecutive_breaches;
            state = update.state;
            state.consecutive_breaches = breaches;
        }
        const bool breach = goal.direction == Direction::upper ? value > threshold : value < threshold;
        state.consecutive_breaches = breach ? state.consecutive_breaches + 1 : 0;
        if (state.consecutive_breaches >= goal.hysteresis_n) {
            report.violations.push_back({goal.metric, goal.direction, value, threshold});
            if (goal.metric == Metric::drift_score) report.drift_flag = true;
            state.consecutive_breaches = 0;
        }
    }
    // Goals removed by a replacement drop their state.
    std::erase_if(states, [&](const auto& kv) { return !live.contains(kv.first); });
    return report;
}

namespace {

int tier(ModelId id) { return models::descriptor(id).tier; }

ModelId model_at_tier(int t) {
    for (const auto& d : models::spectrum()) {
        if (d.tier == t) return d.model_id;
    }
    throw Error(ErrorKind::runtime, "no model at tier " + std::to_string(t));
}

const Violation* match(const PolicyRule& rule, const AnalysisReport& report) {
    for (const auto& v : report.violations) {
        if (rule.drift) {
            if (v.metric == Metric::drift_score && report.drift_flag) return &v;
        } else if (v.metric == rule.metric && (!rule.direction || *rule.direction == v.direction)) {
            return &v;
        }
    }
    return nullptr;
}

} // namespace

ModelId next_in_rotation(ModelId current) {
    const int top = static_cast<int>(models::spectrum().size()) - 1;
    const int t = tier(current);
    return model_at_tier(t == top ? 0 : t + 1);
}

PlannedTactic plan(const AnalysisReport& report, const AdaptationPolicy& policy,
                   const KnowledgeStore& store, ModelId current, double reuse_max_distance) {
    PlannedTactic out;
    if (policy.kind != PolicyKind::rules) return out;
    const int top = static_cast<int>(models::spectrum().size()) - 1;
    for (const auto& rule : policy.rules) {
        const Violation* v = match(rule, report);
        if (!v) continue;
        out.goal = rule.drift ? "drift" : std::string(to_string(v->metric));
        out.metric_value = v->value;
        out.threshold = v->effective_threshold;
        Tactic t = rule.tactic;
        switch (t.kind) {
            case TacticKind::SwitchUp:
                if (tier(current) == top) t = Tactic{};
                break;
            case TacticKind::SwitchDown:
                if (tier(current) == 0) t = Tactic{};
                break;
            case TacticKind::SwitchTo:
                if (!t.model || *t.model == current) t = Tactic{};
                break;
            case TacticKind::Retrain:
            case TacticKind::ReuseVersion: {
                const bool try_reuse = t.kind == TacticKind::ReuseVersion || policy.reuse_before_retrain;
                std::optional<models::ModelVersion> hit;
                if (try_reuse) {
                    hit = store.find_similar_version(report.snapshot.current_signature, current,
                                                     reuse_max_distance);
                }
                if (hit) {
                    t = Tactic{TacticKind::ReuseVersion, std::nullopt, hit->version_id};
                } else if (t.kind == TacticKind::ReuseVersion) {
                    t = Tactic{};
                } else {
                    t = Tactic{TacticKind::Retrain, std::nullopt, std::nullopt};
                }
                break;
            }
            case TacticKind::NoOp: break;
        }
        out.tactic = t;
        return out;
    }
    return out;
}

void validate(const MapeConfig& cfg) {
    if (cfg.window < 1) throw Error(ErrorKind::validation, "window_W must be >= 1", "window_W");
    if (cfg.retrain_window < models::kMinFitSamples) {
        throw Error(ErrorKind::validation,
                    "retrain_R must be >= " + std::to_string(models::kMinFitSamples), "retrain_R");
    }
    if (!(cfg.reuse_max_distance >= 0.0) || !std::isfinite(cfg.reuse_max_distance)) {
        throw Error(ErrorKind::validation, "reuse_max_distance must be finite and >= 0",
                    "reuse_max_distance");
    }
}

// --- MapeEngine -------------------------------------------------------------

MapeEngine::MapeEngine(KnowledgeStore& store, ManagedPipeline& pipeline, MapeConfig cfg)
    : store_(store), pipeline_(pipeline), cfg_(cfg) {
    validate(cfg_);
}

std::optional<AdaptationEvent> MapeEngine::cycle() {
    auto snapshot = monitor(store_, cfg_.window, reference_);
    if (!snapshot) return std::nullopt;
    if (rebase_pending_) {
        // The first full window after a Retrain or Reuse becomes the reference.
        reference_ = snapshot->current_signature;
        snapshot->drift_score = 0.0;
        rebase_pending_ = false;
    }
    const auto goals = store_.goals();
    last_report_ = analyze(*snapshot, goals, states_);
    const auto deployed = pipeline_.deployed();
    if (!deployed) throw Error(ErrorKind::runtime, "no model deployed");
    const auto planned = plan(*last_report_, store_.policy(), store_, deployed->version.model_id,
                              cfg_.reuse_max_distance);
    return execute(planned);
}

models::ModelVersion MapeEngine::version_for_tier(ModelId model_id) {
    if (auto v = store_.latest_version(model_id)) return *v;
    const auto warmup = store_.training_data();
    auto v = pipeline_.train_offline(model_id, warmup);
    offline_training_j_ += v.training_cost_j;
    return v;
}

std::optional<AdaptationEvent> MapeEngine::execute(const PlannedTactic& planned) {
    const auto deployed = pipeline_.deployed();
    if (!deployed) throw Error(ErrorKind::runtime, "no model deployed");
    const ModelId before = deployed->version.model_id;

    AdaptationEvent e;
    e.seq = store_.telemetry_size();
    if (const auto last = store_.last_record()) e.timestamp = last->timestamp;
    e.goal = planned.goal;
    e.metric_value = planned.metric_value;
    e.threshold = planned.threshold;
    e.tactic = planned.tactic.kind;
    e.model_before = before;
    e.model_after = before;

    switch (planned.tactic.kind) {
        case TacticKind::SwitchUp:
        case TacticKind::SwitchDown:
        case TacticKind::SwitchTo: {
            ModelId target = before;
            if (planned.tactic.kind == TacticKind::SwitchTo) {
                target = planned.tactic.model.value_or(before);
            } else {
                const int step = planned.tactic.kind == TacticKind::SwitchUp ? 1 : -1;
                target = model_at_tier(tier(before) + step);
            }
            const auto v = version_for_tier(target);
            pipeline_.swap_model(v);
            e.model_after = target;
            e.version_used = v.version_id;
            e.outcome = Outcome::applied;
            break;
        }
        case TacticKind::Retrain: {
            const auto samples = store_.recent_completed(cfg_.retrain_window);
            if (samples.size() < models::kMinFitSamples) {
                e.outcome = Outcome::noop;
                e.note = "retrain skipped: only " + std::to_string(samples.size()) + " samples";
                break;
            }
            const auto v = pipeline_.retrain(before, samples);
            pipeline_.swap_model(v);
            rebase_pending_ = true;
            e.version_used = v.version_id;
            e.outcome = Outcome::retrained;
            break;
        }
        case TacticKind::ReuseVersion: {
            const auto v = planned.tactic.version_id ? store_.version(*planned.tactic.version_id)
                                                     : std::nullopt;
            if (!v) {
                e.outcome = Outcome::noop;
                e.note = "reuse target missing";
                break;
            }
            pipeline_.swap_model(*v);
            rebase_pending_ = true;
            e.model_after = v->model_id;
            e.version_used = v->version_id;
            e.outcome = Outcome::reuse_hit;
            break;
        }
        case TacticKind::NoOp:
            if (!cfg_.log_noop || planned.goal.empty()) return std::nullopt;
            e.outcome = Outcome::noop;
            break;
    }
    store_.append_event(e);
    return e;
}

} // namespace harmonica::mape
