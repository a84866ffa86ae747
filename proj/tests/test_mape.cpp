#include "harmonica/config.hpp"
#include "harmonica/error.hpp"
#include "harmonica/mape.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace harmonica;
using namespace harmonica::mape;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SustainabilityGoal goal(Metric m, Direction d, double threshold, int n = 1) {
    SustainabilityGoal g;
    g.metric = m;
    g.direction = d;
    g.static_threshold = threshold;
    g.hysteresis_n = n;
    return g;
}

MetricsSnapshot mae_snapshot(double mae) {
    MetricsSnapshot s;
    s.rolling_mae = mae;
    return s;
}

// Appends a completed record with the given error and energy plus its input sample.
void push_completed(KnowledgeStore& store, double abs_error, double energy, double lag = 100.0) {
    const auto seq = store.telemetry_size();
    const double cumulative = (store.last_record() ? store.last_record()->cumulative_energy_j : 0.0) + energy;
    TelemetryRecord r;
    r.seq = seq;
    r.timestamp = "t";
    r.prediction = 0.0;
    r.energy_j = energy;
    r.cumulative_energy_j = cumulative;
    WindowSample w;
    w.lags.fill(lag);
    store.add_replayed_sample(w);
    store.append_telemetry(r);
    store.backfill_last(abs_error);
}

std::vector<WindowSample> warmup_samples(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<WindowSample> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < kLags; ++k) out[j].lags[k] = 100.0 + noise(rng);
        out[j].target = 100.0 + noise(rng);
    }
    return out;
}

// A run loop with a persistence model, so each step's absolute error is
// exactly the offset scripted into its target.
struct ScriptedLoop {
    KnowledgeStore store;
    ManagedPipeline pipeline;
    MapeEngine engine;
    std::int64_t window;

    ScriptedLoop(std::vector<SustainabilityGoal> goals, AdaptationPolicy policy, std::int64_t w,
                 models::FitOptions fit = {})
        : pipeline(store, fit, 1), engine(store, pipeline, config(w)), window(w) {
        const auto train = warmup_samples(40, 3);
        store.set_training_data(train);
        store.put_goals(std::move(goals));
        store.put_policy(std::move(policy));
        models::LinearParams p;
        p.coef = {0, 0, 0, 0, 1};
        models::ModelVersion v;
        v.model_id = ModelId::lin;
        v.weights = models::serialize(p);
        v.signature = models::signature(train);
        v.version_id = store.store_version(v);
        pipeline.swap_model(v);
        engine.set_reference(v.signature);
    }

    static MapeConfig config(std::int64_t w) {
        MapeConfig c;
        c.window = w;
        c.retrain_window = 30;
        return c;
    }

    /// One analysis window whose records all carry absolute error `err`.
    std::optional<AdaptationEvent> window_with_error(double err) {
        for (std::int64_t i = 0; i < window; ++i) {
            WindowSample s;
            s.lags.fill(100.0);
            s.target = 100.0 + err;
            pipeline.step(s, "t");
        }
        pipeline.complete_previous();
        return engine.cycle();
    }
};

AdaptationPolicy mae_switch_policy() { return builtin_policy("harmone"); }

} // namespace

TEST(DynamicBoundary, HandEvaluatedStep) {
    auto g = goal(Metric::rolling_mae, Direction::upper, kInf);
    g.dynamic = true;
    g.ewma_alpha = 0.5;
    g.band_k = 2.0;
    MetricBoundary s;
    s.initialized = true;
    s.ewma_mean = 10.0;
    s.ewma_var = 0.0;
    const auto u = update_dynamic_boundary(s, 14.0, g);
    EXPECT_DOUBLE_EQ(u.effective_threshold, 10.0);
    // mean = 0.5*14 + 0.5*10; var = 0.5*(14-10)^2 + 0.5*0
    EXPECT_DOUBLE_EQ(u.state.ewma_mean, 12.0);
    EXPECT_DOUBLE_EQ(u.state.ewma_var, 8.0);
}

TEST(DynamicBoundary, FirstObservationInitializes) {
    auto g = goal(Metric::rolling_mae, Direction::upper, 7.0);
    g.dynamic = true;
    const auto u = update_dynamic_boundary(MetricBoundary{}, 3.5, g);
    EXPECT_TRUE(u.state.initialized);
    EXPECT_EQ(u.state.ewma_mean, 3.5);
    EXPECT_EQ(u.state.ewma_var, 0.0);
    EXPECT_EQ(u.effective_threshold, 7.0);
}

TEST(DynamicBoundary, ConstantSeriesCollapsesBand) {
    for (double alpha : {0.05, 0.3, 1.0}) {
        for (double static_t : {3.0, 9.0}) {
            auto g = goal(Metric::rolling_mae, Direction::upper, static_t);
            g.dynamic = true;
            g.ewma_alpha = alpha;
            MetricBoundary s;
            BoundaryUpdate u;
            for (int i = 0; i < 20; ++i) {
                u = update_dynamic_boundary(s, 5.0, g);
                s = u.state;
            }
            EXPECT_EQ(s.ewma_mean, 5.0);
            EXPECT_EQ(s.ewma_var, 0.0);
            EXPECT_EQ(u.effective_threshold, std::min(static_t, 5.0));
        }
    }
}

TEST(DynamicBoundary, LowerDirectionTakesMax) {
    auto g = goal(Metric::energy_per_inference_j, Direction::lower, 1.0);
    g.dynamic = true;
    g.ewma_alpha = 0.5;
    g.band_k = 1.0;
    MetricBoundary s{true, 10.0, 4.0, 0};
    EXPECT_DOUBLE_EQ(update_dynamic_boundary(s, 9.0, g).effective_threshold, 8.0);
    g.static_threshold = 9.5;
    EXPECT_DOUBLE_EQ(update_dynamic_boundary(s, 9.0, g).effective_threshold, 9.5);
}

TEST(Analyze, Examples) {
    BoundaryState states;
    const std::vector<SustainabilityGoal> once{goal(Metric::rolling_mae, Direction::upper, 1.5, 1)};
    auto r = analyze(mae_snapshot(2.0), once, states);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].value, 2.0);
    EXPECT_EQ(r.violations[0].effective_threshold, 1.5);
    EXPECT_FALSE(r.drift_flag);

    BoundaryState fresh;
    const std::vector<SustainabilityGoal> thrice{goal(Metric::rolling_mae, Direction::upper, 1.5, 3)};
    r = analyze(mae_snapshot(2.0), thrice, fresh);
    EXPECT_TRUE(r.violations.empty());
    EXPECT_EQ((fresh[{Metric::rolling_mae, Direction::upper}].consecutive_breaches), 1);
}

TEST(Analyze, ScriptedFourWindowSequence) {
    const std::vector<SustainabilityGoal> goals{goal(Metric::rolling_mae, Direction::upper, 1.5, 3)};
    BoundaryState states;
    const double maes[4] = {2.0, 2.0, 2.0, 2.0};
    // Oracle: counter 1, 2, 3 -> violation and reset to 0, then 1 again.
    const int expected_counter[4] = {1, 2, 0, 1};
    const bool expected_violation[4] = {false, false, true, false};
    for (int i = 0; i < 4; ++i) {
        const auto r = analyze(mae_snapshot(maes[i]), goals, states);
        EXPECT_EQ(!r.violations.empty(), expected_violation[i]) << "window " << i;
        EXPECT_EQ((states[{Metric::rolling_mae, Direction::upper}].consecutive_breaches), expected_counter[i])
            << "window " << i;
    }
}

TEST(Analyze, NonBreachResetsCounter) {
    const std::vector<SustainabilityGoal> goals{goal(Metric::rolling_mae, Direction::upper, 1.5, 3)};
    BoundaryState states;
    for (double v : {2.0, 2.0, 1.0, 2.0, 2.0}) EXPECT_TRUE(analyze(mae_snapshot(v), goals, states).violations.empty());
    EXPECT_EQ(analyze(mae_snapshot(2.0), goals, states).violations.size(), 1u);
}

TEST(Analyze, DriftFlagFollowsDriftGoal) {
    const std::vector<SustainabilityGoal> goals{goal(Metric::drift_score, Direction::upper, 1.0, 2)};
    BoundaryState states;
    MetricsSnapshot s;
    s.drift_score = 3.0;
    EXPECT_FALSE(analyze(s, goals, states).drift_flag);
    EXPECT_TRUE(analyze(s, goals, states).drift_flag);
}

TEST(Analyze, EmptyGoalsNeverViolate) {
    BoundaryState states;
    MetricsSnapshot s;
    s.rolling_mae = 1e9;
    s.drift_score = 1e9;
    const auto r = analyze(s, std::vector<SustainabilityGoal>{}, states);
    EXPECT_TRUE(r.violations.empty());
    EXPECT_FALSE(r.drift_flag);
    EXPECT_TRUE(states.empty());
}

TEST(Analyze, ViolationOnlyAfterNConsecutiveBreachesProperty) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    for (int n = 1; n <= 4; ++n) {
        const std::vector<SustainabilityGoal> goals{goal(Metric::rolling_mae, Direction::upper, 2.0, n)};
        BoundaryState states;
        int run = 0;
        for (int i = 0; i < 500; ++i) {
            const double v = u(rng);
            run = v > 2.0 ? run + 1 : 0;
            const bool fired = !analyze(mae_snapshot(v), goals, states).violations.empty();
            EXPECT_EQ(fired, run == n) << "n=" << n << " window " << i;
            if (fired) run = 0;
        }
    }
}

TEST(Analyze, RaisingStaticThresholdNeverAddsViolationsProperty) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> series(200);
        for (auto& v : series) v = u(rng);
        const bool dynamic = trial % 2 == 1;
        const int n = 1 + trial % 3;
        auto count = [&](double threshold) {
            auto g = goal(Metric::rolling_mae, Direction::upper, threshold, n);
            g.dynamic = dynamic;
            g.ewma_alpha = 0.2;
            g.band_k = 1.0;
            const std::vector<SustainabilityGoal> goals{g};
            BoundaryState states;
            int total = 0;
            for (double v : series) total += static_cast<int>(analyze(mae_snapshot(v), goals, states).violations.size());
            return total;
        };
        int previous = std::numeric_limits<int>::max();
        for (double t = 0.0; t <= 11.0; t += 0.5) {
            const int c = count(t);
            EXPECT_LE(c, previous) << "threshold " << t;
            previous = c;
        }
    }
}

TEST(Monitor, Examples) {
    KnowledgeStore errors;
    for (double e : {1.0, 2.0, 3.0}) push_completed(errors, e, 1.0);
    const auto a = monitor(errors, 3, models::signature(errors.replayed_samples(0, 3)));
    ASSERT_TRUE(a.has_value());
    EXPECT_DOUBLE_EQ(a->rolling_mae, 2.0);
    EXPECT_EQ(a->window_start_seq, 0);
    EXPECT_EQ(a->window_end_seq, 2);
    EXPECT_EQ(a->drift_score, 0.0);

    KnowledgeStore energies;
    for (double e : {2.0, 4.0}) push_completed(energies, 0.0, e);
    const auto b = monitor(energies, 2, {});
    ASSERT_TRUE(b.has_value());
    EXPECT_DOUBLE_EQ(b->energy_per_inference_j, 3.0);
}

TEST(Monitor, SkipsWhenTooFewCompleted) {
    KnowledgeStore store;
    push_completed(store, 1.0, 1.0);
    EXPECT_FALSE(monitor(store, 2, {}).has_value());
    EXPECT_FALSE(monitor(store, 0, {}).has_value());
}

TEST(Monitor, UsesNewestWindow) {
    KnowledgeStore store;
    for (int i = 0; i < 10; ++i) push_completed(store, i, 1.0);
    const auto s = monitor(store, 4, {});
    EXPECT_EQ(s->window_start_seq, 6);
    EXPECT_EQ(s->window_end_seq, 9);
    EXPECT_DOUBLE_EQ(s->rolling_mae, 7.5);
}

TEST(Plan, EnergyViolationOnMlpSwitchesDown) {
    KnowledgeStore store;
    AnalysisReport r;
    r.violations.push_back({Metric::energy_per_inference_j, Direction::upper, 30.0, 5.0});
    const auto p = plan(r, builtin_policy("harmone"), store, ModelId::mlp, 0.5);
    EXPECT_EQ(p.tactic.kind, TacticKind::SwitchDown);
    EXPECT_EQ(p.goal, "energy_per_inference_j");
    EXPECT_EQ(p.metric_value, 30.0);
    EXPECT_EQ(p.threshold, 5.0);
}

TEST(Plan, DriftWithStoredMatchReuses) {
    KnowledgeStore store;
    const DataSignature sig{150, 12, 130, 150, 170, 120};
    models::ModelVersion v;
    v.model_id = ModelId::ridge2;
    models::Ridge2Params params;
    params.scale.fill(1.0);
    v.weights = models::serialize(params);
    v.signature = sig;
    const auto id = store.store_version(v);
    AnalysisReport r;
    r.snapshot.current_signature = sig;
    r.drift_flag = true;
    r.violations.push_back({Metric::drift_score, Direction::upper, 4.0, 2.0});
    const auto p = plan(r, builtin_policy("harmone"), store, ModelId::ridge2, 0.5);
    EXPECT_EQ(p.tactic.kind, TacticKind::ReuseVersion);
    EXPECT_EQ(p.tactic.version_id, id);
    EXPECT_EQ(p.goal, "drift");
    // Same inputs, same answer.
    EXPECT_EQ(plan(r, builtin_policy("harmone"), store, ModelId::ridge2, 0.5).tactic, p.tactic);
    // No match for another tier: retrain instead.
    EXPECT_EQ(plan(r, builtin_policy("harmone"), store, ModelId::lin, 0.5).tactic.kind, TacticKind::Retrain);
}

TEST(Plan, NothingToDo) {
    KnowledgeStore store;
    const auto p = plan(AnalysisReport{}, builtin_policy("harmone"), store, ModelId::lin, 0.5);
    EXPECT_EQ(p.tactic.kind, TacticKind::NoOp);
    EXPECT_TRUE(p.goal.empty());
}

TEST(Plan, TierLimitsDegradeToNoOp) {
    KnowledgeStore store;
    AnalysisReport mae;
    mae.violations.push_back({Metric::rolling_mae, Direction::upper, 80.0, 60.0});
    EXPECT_EQ(plan(mae, builtin_policy("harmone"), store, ModelId::mlp, 0.5).tactic.kind, TacticKind::NoOp);
    EXPECT_EQ(plan(mae, builtin_policy("harmone"), store, ModelId::lin, 0.5).tactic.kind, TacticKind::SwitchUp);
    AnalysisReport energy;
    energy.violations.push_back({Metric::energy_per_inference_j, Direction::upper, 9.0, 5.0});
    EXPECT_EQ(plan(energy, builtin_policy("harmone"), store, ModelId::lin, 0.5).tactic.kind, TacticKind::NoOp);
}

TEST(Plan, FirstMatchingRuleWins) {
    KnowledgeStore store;
    AnalysisReport r;
    r.drift_flag = true;
    r.violations.push_back({Metric::rolling_mae, Direction::upper, 80.0, 60.0});
    r.violations.push_back({Metric::drift_score, Direction::upper, 4.0, 2.0});
    EXPECT_EQ(plan(r, builtin_policy("harmone"), store, ModelId::lin, 0.5).tactic.kind, TacticKind::Retrain);
    EXPECT_EQ(plan(r, builtin_policy("static:lin"), store, ModelId::lin, 0.5).tactic.kind, TacticKind::NoOp);
}

TEST(Execute, SwitchToMlp) {
    ScriptedLoop loop({}, builtin_policy("harmone"), 5);
    PlannedTactic t;
    t.tactic = Tactic{TacticKind::SwitchTo, ModelId::mlp, std::nullopt};
    t.goal = "rolling_mae";
    const auto e = loop.engine.execute(t);
    ASSERT_TRUE(e.has_value());
    EXPECT_EQ(e->model_before, ModelId::lin);
    EXPECT_EQ(e->model_after, ModelId::mlp);
    EXPECT_EQ(e->outcome, Outcome::applied);
    EXPECT_EQ(loop.pipeline.deployed()->version.model_id, ModelId::mlp);
    EXPECT_GT(loop.engine.offline_training_j(), 0.0);
    EXPECT_EQ(loop.pipeline.pending_training_j(), 0.0);
}

TEST(Execute, ReuseAddsNoTrainingEnergy) {
    ScriptedLoop loop({}, builtin_policy("harmone"), 5);
    loop.window_with_error(1.0);
    const auto target = loop.pipeline.train_offline(ModelId::lin, warmup_samples(20, 9));
    PlannedTactic t;
    t.tactic = Tactic{TacticKind::ReuseVersion, std::nullopt, target.version_id};
    t.goal = "drift";
    const auto before = loop.store.last_record()->cumulative_energy_j;
    const auto e = loop.engine.execute(t);
    ASSERT_TRUE(e.has_value());
    EXPECT_EQ(e->outcome, Outcome::reuse_hit);
    EXPECT_EQ(e->version_used, target.version_id);
    EXPECT_EQ(loop.pipeline.pending_training_j(), 0.0);
    WindowSample s;
    s.lags.fill(100.0);
    const auto r = loop.pipeline.step(s, "t");
    EXPECT_DOUBLE_EQ(r.cumulative_energy_j - before, r.energy_j);
    EXPECT_TRUE(loop.store.training_charges().empty());
}

TEST(Execute, RetrainJumpMatchesCostLedger) {
    models::FitOptions fit;
    fit.energy.joules_per_unit = 0.25;
    ScriptedLoop loop({}, builtin_policy("harmone"), 5, fit);
    for (int i = 0; i < 4; ++i) loop.window_with_error(1.0);
    PlannedTactic t;
    t.tactic = Tactic{TacticKind::Retrain, std::nullopt, std::nullopt};
    t.goal = "drift";
    const auto before = loop.store.last_record()->cumulative_energy_j;
    const auto e = loop.engine.execute(t);
    ASSERT_TRUE(e.has_value());
    EXPECT_EQ(e->outcome, Outcome::retrained);
    WindowSample s;
    s.lags.fill(100.0);
    const auto r = loop.pipeline.step(s, "t");
    // 30 samples (retrain window) of the lin model at 6 units each.
    const double training = 30 * 6 * 0.25;
    EXPECT_DOUBLE_EQ(r.cumulative_energy_j - before, r.energy_j + training);
    EXPECT_DOUBLE_EQ(r.energy_j, 6 * 0.25);
}

TEST(Execute, NoOpIsSilentUnlessConfigured) {
    ScriptedLoop loop({}, builtin_policy("harmone"), 5);
    PlannedTactic t;
    t.goal = "rolling_mae";
    EXPECT_FALSE(loop.engine.execute(t).has_value());
    EXPECT_TRUE(loop.store.read_events(0).empty());
}

TEST(Engine, SingleBreachingWindowTriggersNothing) {
    ScriptedLoop loop({goal(Metric::rolling_mae, Direction::upper, 1.5, 3)}, mae_switch_policy(), 6);
    for (double err : {2.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0}) EXPECT_FALSE(loop.window_with_error(err).has_value());
    EXPECT_TRUE(loop.store.read_events(0).empty());
}

TEST(Engine, ThreeConsecutiveBreachesTriggerExactlyOne) {
    ScriptedLoop loop({goal(Metric::rolling_mae, Direction::upper, 1.5, 3)}, mae_switch_policy(), 6);
    std::vector<AdaptationEvent> fired;
    for (double err : {2.0, 2.0, 2.0}) {
        if (auto e = loop.window_with_error(err)) fired.push_back(*e);
    }
    ASSERT_EQ(fired.size(), 1u);
    EXPECT_EQ(fired[0].goal, "rolling_mae");
    EXPECT_EQ(fired[0].tactic, TacticKind::SwitchUp);
    EXPECT_EQ(fired[0].seq, 18);
    EXPECT_DOUBLE_EQ(*fired[0].metric_value, 2.0);
    EXPECT_EQ(*fired[0].threshold, 1.5);
    EXPECT_EQ(loop.store.read_events(0).size(), 1u);
}

TEST(Engine, DriftScoreReanchorsAfterRetrain) {
    auto drift = goal(Metric::drift_score, Direction::upper, 2.0, 1);
    ScriptedLoop loop({drift}, builtin_policy("harmone"), 10);
    // Shift the inputs far from the warm-up signature.
    auto shifted_window = [&](double level) {
        for (int i = 0; i < 10; ++i) {
            WindowSample s;
            for (std::size_t k = 0; k < kLags; ++k) s.lags[k] = level + static_cast<double>((i + k) % 3);
            s.target = s.lags[4];
            loop.pipeline.step(s, "t");
        }
        loop.pipeline.complete_previous();
        return loop.engine.cycle();
    };
    const auto first = shifted_window(200.0);
    ASSERT_TRUE(first.has_value());
    EXPECT_EQ(first->goal, "drift");
    EXPECT_EQ(first->outcome, Outcome::retrained);
    // The next window becomes the reference; same conditions then stay quiet.
    EXPECT_FALSE(shifted_window(200.0).has_value());
    EXPECT_EQ(loop.engine.last_report()->snapshot.drift_score, 0.0);
    EXPECT_FALSE(shifted_window(200.0).has_value());
    EXPECT_LT(loop.engine.last_report()->snapshot.drift_score, 2.0);
}

TEST(Engine, ConfigValidation) {
    MapeConfig c;
    c.window = 0;
    EXPECT_THROW(validate(c), Error);
    c.window = 5;
    c.retrain_window = 3;
    EXPECT_THROW(validate(c), Error);
    c.retrain_window = 50;
    c.reuse_max_distance = -1;
    EXPECT_THROW(validate(c), Error);
}

TEST(Rotation, WrapsAround) {
    EXPECT_EQ(next_in_rotation(ModelId::lin), ModelId::ridge2);
    EXPECT_EQ(next_in_rotation(ModelId::ridge2), ModelId::mlp);
    EXPECT_EQ(next_in_rotation(ModelId::mlp), ModelId::lin);
}
