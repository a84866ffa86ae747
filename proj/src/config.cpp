#include "harmonica/config.hpp"

#include "harmonica/error.hpp"

#include <cmath>
#include <limits>

namespace harmonica {

namespace {

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

[[noreturn]] void fail(const std::string& field, const std::string& message) {
    throw Error(ErrorKind::validation, message, field);
}

void require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) fail(path, (path.empty() ? std::string("document") : path) + " must be an object");
}

const Json* find(const Json& j, std::string_view key) {
    const auto it = j.find(std::string(key));
    return it == j.end() || it->is_null() ? nullptr : &*it;
}

double get_real(const Json& j, std::string_view key, const std::string& path,
                std::optional<double> fallback = std::nullopt) {
    const auto* v = find(j, key);
    if (!v) {
        if (fallback) return *fallback;
        fail(join(path, key), "missing field " + join(path, key));
    }
    if (!v->is_number()) fail(join(path, key), join(path, key) + " must be a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) fail(join(path, key), join(path, key) + " must be finite");
    return d;
}

std::int64_t get_int(const Json& j, std::string_view key, const std::string& path,
                     std::optional<std::int64_t> fallback = std::nullopt) {
    const auto* v = find(j, key);
    if (!v) {
        if (fallback) return *fallback;
        fail(join(path, key), "missing field " + join(path, key));
    }
    if (!v->is_number_integer()) fail(join(path, key), join(path, key) + " must be an integer");
    return v->get<std::int64_t>();
}

bool get_bool(const Json& j, std::string_view key, const std::string& path, bool fallback) {
    const auto* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(join(path, key), join(path, key) + " must be true or false");
    return v->get<bool>();
}

std::optional<std::string> get_string(const Json& j, std::string_view key, const std::string& path) {
    const auto* v = find(j, key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(join(path, key), join(path, key) + " must be a string");
    return v->get<std::string>();
}

ModelId get_model(const Json& j, std::string_view key, const std::string& path, ModelId fallback) {
    const auto text = get_string(j, key, path);
    if (!text) return fallback;
    const auto id = parse_model_id(*text);
    if (!id) fail(join(path, key), "unknown model '" + *text + "'");
    return *id;
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

AdaptationPolicy harmone_policy() {
    AdaptationPolicy p;
    p.name = "harmone";
    p.kind = PolicyKind::rules;
    p.reuse_before_retrain = true;
    PolicyRule drift;
    drift.drift = true;
    drift.tactic.kind = TacticKind::Retrain;
    PolicyRule accuracy;
    accuracy.metric = Metric::rolling_mae;
    accuracy.direction = Direction::upper;
    accuracy.tactic.kind = TacticKind::SwitchUp;
    PolicyRule power;
    power.metric = Metric::energy_per_inference_j;
    power.direction = Direction::upper;
    power.tactic.kind = TacticKind::SwitchDown;
    p.rules = {drift, accuracy, power};
    return p;
}

} // namespace

models::FitOptions RunConfig::fit_options() const {
    models::FitOptions o;
    o.ridge_lambda = ridge_lambda;
    o.mlp_epochs = mlp_epochs;
    o.mlp_step = mlp_step;
    o.energy = energy;
    return o;
}

AdaptationPolicy builtin_policy(const std::string& name, int switch_interval) {
    if (name.rfind("static:", 0) == 0) {
        const auto id = parse_model_id(std::string_view(name).substr(7));
        if (!id) throw Error(ErrorKind::not_found, "unknown approach '" + name + "'");
        AdaptationPolicy p;
        p.name = name;
        p.kind = PolicyKind::fixed;
        p.fixed_model = *id;
        return p;
    }
    if (name == "switch") {
        AdaptationPolicy p;
        p.name = name;
        p.kind = PolicyKind::round_robin;
        p.switch_interval = switch_interval;
        return p;
    }
    if (name == "harmone") return harmone_policy();
    throw Error(ErrorKind::not_found, "unknown approach '" + name + "'");
}

std::vector<SustainabilityGoal> harmone_default_goals() {
    SustainabilityGoal drift;
    drift.metric = Metric::drift_score;
    drift.direction = Direction::upper;
    drift.static_threshold = 2.0;
    drift.hysteresis_n = 2;

    SustainabilityGoal accuracy;
    accuracy.metric = Metric::rolling_mae;
    accuracy.direction = Direction::upper;
    accuracy.static_threshold = 60.0;
    accuracy.dynamic = true;
    accuracy.ewma_alpha = 0.1;
    accuracy.band_k = 3.0;
    accuracy.hysteresis_n = 3;

    SustainabilityGoal power;
    power.metric = Metric::energy_per_inference_j;
    power.direction = Direction::upper;
    power.static_threshold = 5.0;
    power.hysteresis_n = 1;
    return {drift, accuracy, power};
}

// --- goals ------------------------------------------------------------------

SustainabilityGoal goal_from_json(const Json& j, const std::string& path) {
    require_object(j, path);
    SustainabilityGoal g;
    const auto metric = get_string(j, "metric", path);
    if (!metric) fail(join(path, "metric"), "missing field " + join(path, "metric"));
    const auto m = parse_metric(*metric);
    if (!m) fail(join(path, "metric"), "unknown metric '" + *metric + "'");
    g.metric = *m;
    const auto direction = get_string(j, "direction", path).value_or("upper");
    const auto d = parse_direction(direction);
    if (!d) fail(join(path, "direction"), "direction must be 'upper' or 'lower'");
    g.direction = *d;
    g.static_threshold = get_real(j, "static_threshold", path);
    g.dynamic = get_bool(j, "dynamic", path, false);
    g.ewma_alpha = get_real(j, "ewma_alpha", path, 0.1);
    g.band_k = get_real(j, "band_k", path, 3.0);
    const auto n = get_int(j, "hysteresis_n", path, 3);
    if (n < 1 || n > std::numeric_limits<int>::max()) fail(join(path, "hysteresis_n"), "hysteresis_n must be >= 1");
    g.hysteresis_n = static_cast<int>(n);
    validate_goal(g, path);
    return g;
}

std::vector<SustainabilityGoal> goals_from_json(const Json& j) {
    const Json* list = &j;
    if (j.is_object() && j.contains("goals")) list = &j.at("goals");
    if (!list->is_array()) fail("goals", "goals must be a list");
    std::vector<SustainabilityGoal> goals;
    for (std::size_t i = 0; i < list->size(); ++i) {
        goals.push_back(goal_from_json((*list)[i], "goals[" + std::to_string(i) + "]"));
    }
    validate_goals(goals);
    return goals;
}

Json to_json(const SustainabilityGoal& g) {
    return Json{{"metric", to_string(g.metric)},
                {"direction", to_string(g.direction)},
                {"static_threshold", g.static_threshold},
                {"dynamic", g.dynamic},
                {"ewma_alpha", g.ewma_alpha},
                {"band_k", g.band_k},
                {"hysteresis_n", g.hysteresis_n}};
}

Json to_json(std::span<const SustainabilityGoal> goals) {
    Json out = Json::array();
    for (const auto& g : goals) out.push_back(to_json(g));
    return out;
}

// --- policies ---------------------------------------------------------------

AdaptationPolicy policy_from_json(const Json& j) {
    if (j.is_string()) return builtin_policy(j.get<std::string>());
    require_object(j, "");
    // {"name": "harmone"} without rules selects the built-in of that name.
    if (!j.contains("rules") && !j.contains("kind")) {
        const auto name = get_string(j, "name", "");
        if (!name) fail("name", "missing field name");
        const auto interval = get_int(j, "switch_interval", "", 50);
        if (interval < 1 || interval > std::numeric_limits<int>::max()) {
            fail("switch_interval", "switch_interval must be >= 1");
        }
        return builtin_policy(*name, static_cast<int>(interval));
    }

    AdaptationPolicy p;
    p.name = get_string(j, "name", "").value_or("");
    if (p.name.empty()) fail("name", "policy name must be a non-empty string");
    const auto interval = get_int(j, "switch_interval", "", 50);
    if (interval < 1 || interval > std::numeric_limits<int>::max()) {
        fail("switch_interval", "switch_interval must be >= 1");
    }
    p.switch_interval = static_cast<int>(interval);
    p.reuse_before_retrain = get_bool(j, "reuse_before_retrain", "", false);

    const auto kind = get_string(j, "kind", "").value_or("rules");
    if (kind == "fixed") {
        p.kind = PolicyKind::fixed;
        p.fixed_model = get_model(j, "model", "", ModelId::lin);
    } else if (kind == "round_robin") {
        p.kind = PolicyKind::round_robin;
    } else if (kind == "rules") {
        p.kind = PolicyKind::rules;
    } else {
        fail("kind", "kind must be 'rules', 'round_robin' or 'fixed'");
    }

    if (const auto* rules = find(j, "rules")) {
        if (!rules->is_array()) fail("rules", "rules must be a list");
        for (std::size_t i = 0; i < rules->size(); ++i) {
            const auto path = "rules[" + std::to_string(i) + "]";
            const auto& r = (*rules)[i];
            require_object(r, path);
            PolicyRule rule;
            const auto metric = get_string(r, "metric", path);
            if (!metric) fail(join(path, "metric"), "missing field " + join(path, "metric"));
            if (*metric == "drift") {
                rule.drift = true;
            } else {
                const auto m = parse_metric(*metric);
                if (!m) fail(join(path, "metric"), "unknown metric '" + *metric + "'");
                rule.metric = *m;
            }
            if (const auto dir = get_string(r, "direction", path)) {
                const auto d = parse_direction(*dir);
                if (!d) fail(join(path, "direction"), "direction must be 'upper' or 'lower'");
                rule.direction = *d;
            }
            const auto tactic = get_string(r, "tactic", path);
            if (!tactic) fail(join(path, "tactic"), "missing field " + join(path, "tactic"));
            const auto t = parse_tactic(*tactic);
            if (!t) fail(join(path, "tactic"), "unknown tactic '" + *tactic + "'");
            rule.tactic.kind = *t;
            if (*t == TacticKind::SwitchTo) {
                const auto arg = get_string(r, "tactic_arg", path);
                if (!arg) fail(join(path, "tactic_arg"), "SwitchTo needs tactic_arg naming a model");
                const auto id = parse_model_id(*arg);
                if (!id) fail(join(path, "tactic_arg"), "unknown model '" + *arg + "'");
                rule.tactic.model = *id;
            }
            p.rules.push_back(rule);
        }
    }
    validate_policy(p);
    return p;
}

Json to_json(const AdaptationPolicy& p) {
    Json out{{"name", p.name}, {"switch_interval", p.switch_interval},
             {"reuse_before_retrain", p.reuse_before_retrain}};
    switch (p.kind) {
        case PolicyKind::fixed:
            out["kind"] = "fixed";
            out["model"] = to_string(p.fixed_model);
            break;
        case PolicyKind::round_robin: out["kind"] = "round_robin"; break;
        case PolicyKind::rules: out["kind"] = "rules"; break;
    }
    Json rules = Json::array();
    for (const auto& r : p.rules) {
        Json jr{{"metric", r.drift ? std::string("drift") : std::string(to_string(r.metric))},
                {"tactic", to_string(r.tactic.kind)}};
        if (r.direction) jr["direction"] = to_string(*r.direction);
        if (r.tactic.model) jr["tactic_arg"] = to_string(*r.tactic.model);
        rules.push_back(jr);
    }
    out["rules"] = rules;
    return out;
}

// --- energy, drift, run config ------------------------------------------------

energy::EnergyConfig energy_from_json(const Json& j, const std::string& path) {
    require_object(j, path);
    energy::EnergyConfig e;
    if (const auto mode = get_string(j, "mode", path)) {
        const auto m = energy::parse_mode(*mode);
        if (!m) fail(join(path, "mode"), "mode must be 'cost_model' or 'wall_clock_informational'");
        e.mode = *m;
    }
    e.joules_per_unit = get_real(j, "joules_per_unit", path, e.joules_per_unit);
    e.nominal_watts = get_real(j, "nominal_watts", path, e.nominal_watts);
    e.latency_ms_per_unit = get_real(j, "latency_ms_per_unit", path, e.latency_ms_per_unit);
    energy::validate(e);
    return e;
}

Json to_json(const energy::EnergyConfig& e) {
    return Json{{"mode", energy::to_string(e.mode)},
                {"joules_per_unit", e.joules_per_unit},
                {"nominal_watts", e.nominal_watts},
                {"latency_ms_per_unit", e.latency_ms_per_unit}};
}

DriftSpec drift_from_json(const Json& j, const std::string& path) {
    require_object(j, path);
    DriftSpec d;
    d.start_index = get_int(j, "start_index", path);
    d.end_index = get_int(j, "end_index", path);
    d.scale = get_real(j, "scale", path, 1.0);
    d.shift = get_real(j, "shift", path, 0.0);
    if (d.start_index < 0) fail(join(path, "start_index"), "start_index must be >= 0");
    if (d.end_index <= d.start_index) fail(join(path, "end_index"), "end_index must exceed start_index");
    return d;
}

Json to_json(const DriftSpec& d) {
    return Json{{"start_index", d.start_index}, {"end_index", d.end_index}, {"scale", d.scale},
                {"shift", d.shift}};
}

RunConfig run_config_from_json(const Json& j) {
    require_object(j, "");
    RunConfig c;
    c.dataset_id = get_string(j, "dataset_id", "").value_or("");
    c.dataset_path = get_string(j, "dataset_path", "").value_or("");
    if (const auto* p = find(j, "policy")) {
        try {
            c.policy = policy_from_json(*p);
        } catch (const Error& e) {
            throw Error(e.kind(), e.what(), e.field().empty() ? "policy" : "policy." + e.field());
        }
    }
    if (const auto* g = find(j, "goals")) {
        if (!g->is_array()) fail("goals", "goals must be a list");
        c.goals = goals_from_json(*g);
    }
    c.mape.window = get_int(j, "window_W", "", c.mape.window);
    const auto r = get_int(j, "retrain_R", "", static_cast<std::int64_t>(c.mape.retrain_window));
    if (r < 0) fail("retrain_R", "retrain_R must be >= 10");
    c.mape.retrain_window = static_cast<std::size_t>(r);
    c.mape.reuse_max_distance = get_real(j, "reuse_max_distance", "", c.mape.reuse_max_distance);
    c.mape.log_noop = get_bool(j, "log_noop", "", false);
    mape::validate(c.mape);
    if (const auto* d = find(j, "drift_specs")) {
        if (!d->is_array()) fail("drift_specs", "drift_specs must be a list");
        for (std::size_t i = 0; i < d->size(); ++i) {
            c.drift_specs.push_back(drift_from_json((*d)[i], "drift_specs[" + std::to_string(i) + "]"));
        }
    }
    if (const auto* s = find(j, "seed")) {
        if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<std::int64_t>() >= 0)) {
            fail("seed", "seed must be a non-negative integer");
        }
        c.seed = s->get<std::uint64_t>();
    }
    if (const auto* e = find(j, "energy")) c.energy = energy_from_json(*e, "energy");
    c.initial_model = get_model(j, "initial_model", "", c.initial_model);
    c.split_fraction = get_real(j, "split_fraction", "", c.split_fraction);
    if (!(c.split_fraction > 0.0 && c.split_fraction < 1.0)) {
        fail("split_fraction", "split_fraction must lie in (0, 1)");
    }
    c.ridge_lambda = get_real(j, "ridge_lambda", "", c.ridge_lambda);
    if (c.ridge_lambda < 0.0) fail("ridge_lambda", "ridge_lambda must be >= 0");
    const auto epochs = get_int(j, "mlp_epochs", "", c.mlp_epochs);
    if (epochs < 1 || epochs > 100000) fail("mlp_epochs", "mlp_epochs must lie in [1, 100000]");
    c.mlp_epochs = static_cast<int>(epochs);
    c.mlp_step = get_real(j, "mlp_step", "", c.mlp_step);
    if (!(c.mlp_step > 0.0)) fail("mlp_step", "mlp_step must be > 0");
    return c;
}

Json to_json(const RunConfig& c) {
    Json out{{"dataset_id", c.dataset_id},
             {"window_W", c.mape.window},
             {"retrain_R", c.mape.retrain_window},
             {"reuse_max_distance", c.mape.reuse_max_distance},
             {"log_noop", c.mape.log_noop},
             {"seed", c.seed},
             {"energy", to_json(c.energy)},
             {"initial_model", to_string(c.initial_model)},
             {"split_fraction", c.split_fraction},
             {"ridge_lambda", c.ridge_lambda},
             {"mlp_epochs", c.mlp_epochs},
             {"mlp_step", c.mlp_step}};
    if (!c.dataset_path.empty()) out["dataset_path"] = c.dataset_path;
    if (c.policy) out["policy"] = to_json(*c.policy);
    if (c.goals) out["goals"] = to_json(std::span<const SustainabilityGoal>(*c.goals));
    Json drifts = Json::array();
    for (const auto& d : c.drift_specs) drifts.push_back(to_json(d));
    out["drift_specs"] = drifts;
    return out;
}

Json to_json(const TelemetryRecord& r) {
    return Json{{"seq", r.seq},
                {"timestamp", r.timestamp},
                {"model_id", to_string(r.model_id)},
                {"prediction", r.prediction},
                {"actual", optional_json(r.actual)},
                {"abs_error", optional_json(r.abs_error)},
                {"latency_ms", r.latency_ms},
                {"energy_j", r.energy_j},
                {"cumulative_energy_j", r.cumulative_energy_j}};
}

Json to_json(const AdaptationEvent& e) {
    return Json{{"seq", e.seq},
                {"timestamp", e.timestamp},
                {"goal", e.goal},
                {"metric_value", optional_json(e.metric_value)},
                {"threshold", optional_json(e.threshold)},
                {"tactic", to_string(e.tactic)},
                {"model_before", to_string(e.model_before)},
                {"model_after", to_string(e.model_after)},
                {"version_used", optional_json(e.version_used)},
                {"outcome", to_string(e.outcome)},
                {"note", e.note}};
}

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::validation, std::string("malformed JSON: ") + e.what());
    }
}

} // namespace harmonica
