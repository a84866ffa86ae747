#include "harmonica/runner.hpp"

#include "harmonica/error.hpp"

#include <cmath>
#include <limits>

namespace harmonica {

Json to_json(const RunSummary& s) {
    return Json{{"r2", std::isfinite(s.r2) ? Json(s.r2) : Json(nullptr)},
                {"mean_latency_ms", s.mean_latency_ms},
                {"total_energy_j", s.total_energy_j},
                {"n_adaptations", s.n_adaptations},
                {"n_retrains", s.n_retrains},
                {"n_reuses", s.n_reuses},
                {"warmup_energy_j", s.warmup_energy_j},
                {"n_records", s.n_records}};
}

double compute_r2(std::span<const double> predictions, std::span<const double> actuals) {
    if (predictions.size() != actuals.size() || actuals.size() < 2) {
        throw Error(ErrorKind::input, "R^2 needs two equal-length series of at least 2 values");
    }
    double mean = 0.0;
    for (double a : actuals) mean += a;
    mean /= static_cast<double>(actuals.size());
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        sse += (actuals[i] - predictions[i]) * (actuals[i] - predictions[i]);
        sst += (actuals[i] - mean) * (actuals[i] - mean);
    }
    if (sst == 0.0) throw Error(ErrorKind::insufficient_data, "R^2 is undefined for constant actuals");
    return 1.0 - sse / sst;
}

std::size_t split_index(std::size_t n_points, double split_fraction) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n_points) * split_fraction));
}

DriftSpec drift_chunk(std::size_t n_points, double split_fraction, double start_fraction,
                      double fraction, double scale, double shift, std::int64_t align) {
    const auto s = static_cast<std::int64_t>(split_index(n_points, split_fraction));
    const auto ne = static_cast<std::int64_t>(n_points) - s;
    auto offset = static_cast<std::int64_t>(std::llround(start_fraction * static_cast<double>(ne)));
    if (align > 0) offset = std::llround(static_cast<double>(offset) / static_cast<double>(align)) * align;
    const auto length = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(ne))));
    DriftSpec d;
    d.start_index = s + offset;
    d.end_index = std::min<std::int64_t>(d.start_index + length, static_cast<std::int64_t>(n_points));
    d.scale = scale;
    d.shift = shift;
    return d;
}

std::vector<DriftSpec> default_drift_specs(std::size_t n_points, double split_fraction, double scale,
                                           double shift, double fraction, std::int64_t align) {
    return {drift_chunk(n_points, split_fraction, 0.2, fraction, scale, shift, align),
            drift_chunk(n_points, split_fraction, 0.6, fraction, scale, shift, align)};
}

// --- Run --------------------------------------------------------------------

Run::Run(std::vector<TimePoint> dataset, RunConfig config, std::shared_ptr<KnowledgeStore> store)
    : dataset_(std::move(dataset)), config_(std::move(config)), store_(std::move(store)) {
    if (!config_.policy) throw Error(ErrorKind::validation, "run has no policy", "policy");
    if (!config_.goals) throw Error(ErrorKind::validation, "run has no goals", "goals");
    energy::validate(config_.energy);
    mape::validate(config_.mape);
    validate_policy(*config_.policy);
    validate_goals(*config_.goals);
    if (!(config_.split_fraction > 0.0 && config_.split_fraction < 1.0)) {
        throw Error(ErrorKind::validation, "split_fraction must lie in (0, 1)", "split_fraction");
    }
    const auto s = split_index(dataset_.size(), config_.split_fraction);
    if (s < kLags + models::kMinFitSamples) {
        throw Error(ErrorKind::validation, "training split is too short to fit a model", "split_fraction");
    }
    if (dataset_.size() - s < kLags + 1) {
        throw Error(ErrorKind::validation, "split leaves fewer than 6 evaluation points", "split_fraction");
    }
    // Surface drift range errors before the run starts.
    ingest(dataset_, config_.drift_specs);
    // Installed here so goal updates that arrive once the run exists are never overwritten.
    store_->put_goals(*config_.goals);
    store_->put_policy(*config_.policy);
    pipeline_ = std::make_unique<ManagedPipeline>(*store_, config_.fit_options(), config_.seed);
}

std::optional<ModelId> Run::deployed_model() const {
    const auto d = pipeline_->deployed();
    if (!d) return std::nullopt;
    return d->version.model_id;
}

RunSummary Run::execute(const std::atomic<bool>* stop) {
    const auto points = ingest(dataset_, config_.drift_specs);
    const auto s = split_index(points.size(), config_.split_fraction);
    const std::span<const TimePoint> all(points);
    const auto train_points = all.first(s);
    const auto eval_points = all.subspan(s);
    auto train = make_windows(train_points);
    const auto eval = make_windows(eval_points);

    const auto& policy = *config_.policy;
    store_->set_training_data(train);

    mape::MapeEngine engine(*store_, *pipeline_, config_.mape);
    const ModelId initial = policy.kind == PolicyKind::fixed ? policy.fixed_model : config_.initial_model;
    const auto warm = pipeline_->train_offline(initial, train);
    pipeline_->swap_model(warm);
    engine.set_reference(warm.signature);

    const auto window = config_.mape.window;
    for (std::size_t j = 0; j < eval.size(); ++j) {
        if (stop && stop->load()) break;
        pipeline_->complete_previous();
        const auto done = static_cast<std::int64_t>(j);
        if (done > 0) {
            if (policy.kind == PolicyKind::round_robin) {
                if (done % policy.switch_interval == 0) {
                    mape::PlannedTactic scheduled;
                    scheduled.goal = "schedule";
                    scheduled.tactic.kind = TacticKind::SwitchTo;
                    scheduled.tactic.model = mape::next_in_rotation(*deployed_model());
                    engine.execute(scheduled);
                }
            } else if (policy.kind == PolicyKind::rules && done % window == 0) {
                engine.cycle();
            }
        }
        pipeline_->step(eval[j], eval_points[j + kLags].timestamp);
    }
    pipeline_->complete_previous();
    return summarize(*store_, pipeline_->pending_training_j(),
                     warm.training_cost_j + engine.offline_training_j());
}

RunSummary summarize(const KnowledgeStore& store, double pending_training_j, double warmup_energy_j) {
    RunSummary out;
    const auto records = store.read_telemetry(0, std::numeric_limits<std::int64_t>::max());
    std::vector<double> predictions;
    std::vector<double> actuals;
    double latency = 0.0;
    for (const auto& r : records) {
        latency += r.latency_ms;
        if (r.actual) {
            predictions.push_back(r.prediction);
            actuals.push_back(*r.actual);
        }
    }
    out.n_records = static_cast<std::int64_t>(records.size());
    out.mean_latency_ms = records.empty() ? 0.0 : latency / static_cast<double>(records.size());
    out.total_energy_j = (records.empty() ? 0.0 : records.back().cumulative_energy_j) + pending_training_j;
    try {
        out.r2 = compute_r2(predictions, actuals);
    } catch (const Error&) {
        out.r2 = std::numeric_limits<double>::quiet_NaN();
    }
    for (const auto& e : store.read_events(0)) {
        if (e.outcome == Outcome::noop) continue;
        ++out.n_adaptations;
        if (e.outcome == Outcome::retrained) ++out.n_retrains;
        if (e.outcome == Outcome::reuse_hit) ++out.n_reuses;
    }
    out.warmup_energy_j = warmup_energy_j;
    return out;
}

RunSummary run_scenario(std::vector<TimePoint> dataset, const RunConfig& config,
                        std::shared_ptr<KnowledgeStore>* store_out) {
    Run run(std::move(dataset), config);
    const auto summary = run.execute();
    if (store_out) *store_out = run.store();
    return summary;
}

} // namespace harmonica
