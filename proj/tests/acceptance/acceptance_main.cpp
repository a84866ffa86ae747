// Runs every primary acceptance criterion and prints one PASS/FAIL line each.

#include "harmonica/config.hpp"
#include "harmonica/error.hpp"
#include "harmonica/harness.hpp"
#include "harmonica/mape.hpp"
#include "harmonica/model_spectrum.hpp"
#include "harmonica/runner.hpp"
#include "harmonica/service.hpp"
#include "harmonica/trace.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>

using namespace harmonica;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const std::vector<TimePoint>& default_trace() {
    static const auto t = generate_trace(default_trace_params());
    return t;
}

// --- ordering -----------------------------------------------------------------

Verdict ordering_suite() {
    const auto t0 = Clock::now();
    const auto& data = default_trace();
    auto base = scenario_config("static:lin", data.size());
    base.policy.reset();
    base.goals.reset();
    const std::vector<std::string> names{"static:lin", "static:ridge2", "static:mlp", "switch", "harmone"};
    const auto rows = compare(names, data, base, 5);
    std::map<std::string, ComparisonRow> by;
    for (const auto& r : rows) by[r.policy] = r;
    const auto& lin = by["static:lin"];
    const auto& ridge = by["static:ridge2"];
    const auto& mlp = by["static:mlp"];
    const auto& sw = by["switch"];
    const auto& h = by["harmone"];
    const double elapsed = seconds_since(t0);

    std::vector<std::pair<std::string, bool>> checks{
        {"r2 lin<ridge2", lin.r2 < ridge.r2},
        {"r2 ridge2<mlp", ridge.r2 < mlp.r2},
        {"energy lin<ridge2", lin.total_energy_j < ridge.total_energy_j},
        {"energy ridge2<mlp", ridge.total_energy_j < mlp.total_energy_j},
        {"switch r2 between", lin.r2 < sw.r2 && sw.r2 < mlp.r2},
        {"switch energy between", lin.total_energy_j < sw.total_energy_j && sw.total_energy_j < mlp.total_energy_j},
        {"harmone r2>=switch", h.r2 >= sw.r2},
        {"harmone energy<=mlp", h.total_energy_j <= mlp.total_energy_j},
        {"runtime<=180s", elapsed <= 180.0},
    };
    Verdict v{true, {}};
    std::ostringstream d;
    for (const auto& r : rows) d << r.policy << " r2=" << fmt(r.r2) << " E=" << fmt(r.total_energy_j, 1) << "; ";
    for (const auto& [name, ok] : checks) {
        if (!ok) {
            v.pass = false;
            d << "violated: " << name << "; ";
        }
    }
    d << "elapsed " << fmt(elapsed, 1) << " s";
    v.detail = d.str();
    return v;
}

// --- OLS oracle -----------------------------------------------------------------

// Normal equations X'X b = X'y with an explicit design [1, lags], solved by
// Gauss-Jordan elimination with partial pivoting.
std::array<double, 6> ols_oracle(const std::vector<WindowSample>& samples) {
    double m[6][7] = {};
    for (const auto& s : samples) {
        const double x[6] = {1.0, s.lags[0], s.lags[1], s.lags[2], s.lags[3], s.lags[4]};
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) m[i][j] += x[i] * x[j];
            m[i][6] += x[i] * s.target;
        }
    }
    for (int c = 0; c < 6; ++c) {
        int pivot = c;
        for (int r = c + 1; r < 6; ++r) {
            if (std::fabs(m[r][c]) > std::fabs(m[pivot][c])) pivot = r;
        }
        for (int k = 0; k < 7; ++k) std::swap(m[c][k], m[pivot][k]);
        const double p = m[c][c];
        for (int k = 0; k < 7; ++k) m[c][k] /= p;
        for (int r = 0; r < 6; ++r) {
            if (r == c) continue;
            const double f = m[r][c];
            for (int k = 0; k < 7; ++k) m[r][k] -= f * m[c][k];
        }
    }
    std::array<double, 6> b{};
    for (int i = 0; i < 6; ++i) b[i] = m[i][6];
    return b;
}

Verdict ols_oracle_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    double worst = 0.0;
    for (int instance = 0; instance < 100; ++instance) {
        std::vector<WindowSample> samples(20);
        for (auto& s : samples) {
            for (auto& l : s.lags) l = u(rng);
            s.target = u(rng);
        }
        const auto fitted = std::get<models::LinearParams>(models::fit_params(ModelId::lin, samples, 1));
        const auto beta = ols_oracle(samples);
        worst = std::max(worst, std::fabs(fitted.intercept - beta[0]));
        for (int i = 0; i < 5; ++i) worst = std::max(worst, std::fabs(fitted.coef[i] - beta[i + 1]));
    }
    const double elapsed = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "max-abs diff %.3e over 100 instances, %.3f s", worst, elapsed);
    return {worst <= 1e-8 && elapsed <= 5.0, buf};
}

// --- determinism ---------------------------------------------------------------

Verdict determinism() {
    const auto t0 = Clock::now();
    const auto cfg = scenario_config("harmone", default_trace().size());
    const auto a = run_with_logs(default_trace(), cfg);
    const auto b = run_with_logs(default_trace(), cfg);
    const bool tel = telemetry_csv(a.telemetry) == telemetry_csv(b.telemetry);
    const bool ev = adaptations_csv(a.events) == adaptations_csv(b.events);
    const double elapsed = seconds_since(t0);
    std::ostringstream d;
    d << "telemetry " << (tel ? "identical" : "differs") << " (" << a.telemetry.size() << " rows), adaptations "
      << (ev ? "identical" : "differs") << " (" << a.events.size() << " rows), " << fmt(elapsed, 2) << " s";
    return {tel && ev && elapsed <= 30.0, d.str()};
}

// --- drift response ------------------------------------------------------------

double mean_abs_error(const std::vector<TelemetryRecord>& t, std::int64_t begin, std::int64_t end) {
    double sum = 0.0;
    std::int64_t n = 0;
    for (auto i = std::max<std::int64_t>(begin, 0); i < std::min<std::int64_t>(end, t.size()); ++i) {
        if (!t[i].abs_error) continue;
        sum += *t[i].abs_error;
        ++n;
    }
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

Verdict drift_response() {
    const auto& data = default_trace();
    const auto cfg = scenario_config("harmone", data.size());
    const auto r = run_with_logs(data, cfg);
    const auto split = static_cast<std::int64_t>(split_index(data.size(), cfg.split_fraction));
    const auto w = cfg.mape.window;
    Verdict v{true, {}};
    std::ostringstream d;
    for (const auto& chunk : cfg.drift_specs) {
        const auto onset = chunk.start_index - split;
        const AdaptationEvent* hit = nullptr;
        for (const auto& e : r.events) {
            if (e.goal == "drift" && e.outcome != Outcome::noop && e.seq >= onset && e.seq <= onset + 3 * w) {
                hit = &e;
                break;
            }
        }
        d << "chunk@" << onset << ": ";
        if (!hit) {
            v.pass = false;
            d << "no drift event within 3 windows; ";
            continue;
        }
        // Mean of the five window MAEs equals the mean over their records.
        const double pre = mean_abs_error(r.telemetry, hit->seq - 5 * w, hit->seq);
        const double post = mean_abs_error(r.telemetry, hit->seq, hit->seq + 5 * w);
        d << "event@" << hit->seq << " (" << to_string(hit->outcome) << ") pre " << fmt(pre, 2) << " post "
          << fmt(post, 2) << "; ";
        if (!(post < pre)) v.pass = false;
    }
    v.detail = d.str();
    return v;
}

// --- version reuse -------------------------------------------------------------

std::string outcome_list(const std::vector<AdaptationEvent>& events) {
    std::string s;
    for (const auto& e : events) {
        if (e.outcome == Outcome::noop) continue;
        s += std::string(to_string(e.outcome)) + "@" + std::to_string(e.seq) + " ";
    }
    return s;
}

// First non-noop drift event raised while a chunk is active.
const AdaptationEvent* chunk_response(const std::vector<AdaptationEvent>& events, const DriftSpec& chunk,
                                      std::int64_t split) {
    for (const auto& e : events) {
        if (e.goal == "drift" && e.outcome != Outcome::noop && e.seq >= chunk.start_index - split &&
            e.seq < chunk.end_index - split) {
            return &e;
        }
    }
    return nullptr;
}

Verdict version_reuse() {
    const auto& data = default_trace();
    Verdict v{true, {}};
    std::ostringstream d;

    const auto same_cfg = recurrence_config(data.size());
    const auto split = static_cast<std::int64_t>(split_index(data.size(), same_cfg.split_fraction));
    const auto same = recurrence_scenario(data, same_cfg);
    std::map<std::int64_t, double> charged;
    for (const auto& c : same.charges) charged[c.seq] += c.joules;
    const auto* first = chunk_response(same.events, same_cfg.drift_specs[0], split);
    const auto* second = chunk_response(same.events, same_cfg.drift_specs[1], split);
    d << "identical: " << outcome_list(same.events) << "; ";
    if (!first || first->outcome != Outcome::retrained || !second || second->outcome != Outcome::reuse_hit ||
        charged.count(second->seq)) {
        v.pass = false;
    }

    const auto cfg = recurrence_config(data.size(), 42, 1.3, 40.0, 0.7, -40.0);
    const auto sig = [&](const DriftSpec& chunk) {
        const auto points = ingest(data, cfg.drift_specs);
        const auto span = std::span<const TimePoint>(points).subspan(
            static_cast<std::size_t>(chunk.start_index), static_cast<std::size_t>(chunk.end_index - chunk.start_index));
        return models::signature(make_windows(span));
    };
    const double distance = models::signature_distance(sig(cfg.drift_specs[1]), sig(cfg.drift_specs[0]));
    const auto other = recurrence_scenario(data, cfg);
    std::int64_t retrains = 0;
    for (const auto& e : other.events) {
        if (e.outcome == Outcome::retrained) ++retrains;
    }
    const auto* a = chunk_response(other.events, cfg.drift_specs[0], split);
    const auto* b = chunk_response(other.events, cfg.drift_specs[1], split);
    d << "dissimilar (chunk distance " << fmt(distance, 2) << " > " << fmt(cfg.mape.reuse_max_distance, 2)
      << "): " << outcome_list(other.events);
    if (!(distance > cfg.mape.reuse_max_distance) || retrains != 2 || !a || a->outcome != Outcome::retrained || !b ||
        b->outcome != Outcome::retrained) {
        v.pass = false;
    }
    v.detail = d.str();
    return v;
}

// --- hysteresis ----------------------------------------------------------------

// Persistence-model loop whose per-record absolute error is scripted.
std::size_t scripted_events(const std::vector<double>& window_errors) {
    constexpr std::int64_t kWindow = 10;
    KnowledgeStore store;
    ManagedPipeline pipeline(store, {}, 1);
    mape::MapeConfig mc;
    mc.window = kWindow;
    mc.retrain_window = 20;
    mape::MapeEngine engine(store, pipeline, mc);
    std::vector<WindowSample> warm(30);
    for (std::size_t i = 0; i < warm.size(); ++i) {
        warm[i].lags.fill(100.0 + static_cast<double>(i % 3));
        warm[i].target = warm[i].lags[4];
    }
    store.set_training_data(warm);
    SustainabilityGoal g;
    g.metric = Metric::rolling_mae;
    g.direction = Direction::upper;
    g.static_threshold = 1.5;
    g.hysteresis_n = 3;
    store.put_goals({g});
    store.put_policy(builtin_policy("harmone"));
    models::LinearParams p;
    p.coef = {0, 0, 0, 0, 1};
    models::ModelVersion v;
    v.model_id = ModelId::lin;
    v.weights = models::serialize(p);
    v.signature = models::signature(warm);
    v.version_id = store.store_version(v);
    pipeline.swap_model(v);
    engine.set_reference(v.signature);
    for (double err : window_errors) {
        for (std::int64_t i = 0; i < kWindow; ++i) {
            WindowSample s;
            s.lags.fill(100.0);
            s.target = 100.0 + err;
            pipeline.step(s, "t");
        }
        pipeline.complete_previous();
        engine.cycle();
    }
    return store.read_events(0).size();
}

Verdict hysteresis() {
    const auto single = scripted_events({2.0, 1.0, 1.0, 1.0});
    const auto triple = scripted_events({2.0, 2.0, 2.0});
    std::ostringstream d;
    d << "single breach -> " << single << " events, three consecutive -> " << triple << " events";
    return {single == 0 && triple == 1, d.str()};
}

// --- energy additivity ---------------------------------------------------------

Verdict energy_additivity() {
    const auto& data = default_trace();
    const auto r = run_with_logs(data, scenario_config("harmone", data.size()));
    double inference = 0.0;
    for (const auto& t : r.telemetry) inference += t.energy_j;
    double training = 0.0;
    for (const auto& c : r.charges) training += c.joules;
    const double final_cum = r.telemetry.back().cumulative_energy_j;
    const double diff = std::fabs(final_cum - (inference + training));
    char buf[200];
    std::snprintf(buf, sizeof buf, "cumulative %.6f = inference %.6f + training %.6f (|diff| %.2e, %zu charges)",
                  final_cum, inference, training, diff, r.charges.size());
    return {diff <= 1e-9 && !r.charges.empty(), buf};
}

// --- API contract --------------------------------------------------------------

Verdict api_contract() {
    std::random_device rd;
    const auto dir = fs::temp_directory_path() / ("harmonica-acceptance-" + std::to_string(rd()));
    Verdict v{true, {}};
    std::ostringstream d;
    {
        ControlService service(dir);
        httplib::Server server;
        service.mount(server);
        const int port = server.bind_to_any_port("127.0.0.1");
        std::thread listener([&] { server.listen_after_bind(); });
        server.wait_until_ready();
        httplib::Client client("127.0.0.1", port);
        client.set_read_timeout(120, 0);

        int failures = 0;
        auto expect = [&](const std::string& what, const httplib::Result& res, int http, const std::string& code,
                          const std::string& field = {}, const std::string& needle = {}) {
            bool ok = res && res->status == http;
            if (ok) {
                const auto body = Json::parse(res->body, nullptr, false);
                ok = body.is_object() && body.value("code", "") == code && body.contains("message");
                if (ok && !field.empty()) ok = body.value("field", "") == field;
                if (ok && !needle.empty()) ok = res->body.find(needle) != std::string::npos;
            }
            if (!ok) {
                ++failures;
                d << what << " -> " << (res ? std::to_string(res->status) + " " + res->body : "no response") << "; ";
            }
        };
        auto state = [&] { return Json::parse(client.Get("/api/status")->body)["state"].get<std::string>(); };
        auto upload = [&](int days) {
            TraceParams p = default_trace_params();
            p.days = days;
            const auto res = client.Post("/api/dataset", dataset_csv(generate_trace(p)), "text/csv");
            return Json::parse(res->body)["dataset_id"].get<std::string>();
        };
        const Json base{{"policy", "harmone"}, {"window_W", 24}, {"retrain_R", 72}, {"reuse_max_distance", 1.0},
                        {"ridge_lambda", 10.0}, {"initial_model", "ridge2"}};

        // Idle-state and validation cases.
        expect("stop when idle", client.Post("/api/run/stop", "", "application/json"), 409, "conflict");
        expect("unknown approach", client.Post("/api/approach", "\"greedy\"", "application/json"), 404, "not_found");
        expect("bad rule metric",
               client.Post("/api/approach", R"({"name":"c","rules":[{"metric":"foo","tactic":"NoOp"}]})",
                           "application/json"),
               400, "validation_error", "rules[0].metric");
        expect("duplicate goals",
               client.Post("/api/goals",
                           R"([{"metric":"rolling_mae","static_threshold":1},{"metric":"rolling_mae","static_threshold":2}])",
                           "application/json"),
               400, "validation_error");
        std::string bad_csv = "timestamp,flow\n";
        for (int i = 0; i < 20; ++i) bad_csv += "r," + std::string(i == 15 ? "abc" : "5") + "\n";
        expect("row 17 abc", client.Post("/api/dataset", bad_csv, "text/csv"), 400, "input_error", {}, "line 17");
        expect("header only", client.Post("/api/dataset", "timestamp,flow\n", "text/csv"), 400, "insufficient_data");
        auto zero = base;
        zero["dataset_id"] = "ds1";
        zero["energy"] = Json{{"joules_per_unit", 0}};
        expect("joules_per_unit 0", client.Post("/api/run/start", zero.dump(), "application/json"), 400,
               "validation_error", "energy.joules_per_unit");

        // Conflicts while a long run is active.
        auto long_cfg = base;
        long_cfg["dataset_id"] = upload(200);
        const auto started = client.Post("/api/run/start", long_cfg.dump(), "application/json");
        if (!started || started->status != 200 || state() != "running") {
            ++failures;
            d << "long run did not start; ";
        } else {
            expect("deploy while running", client.Post("/api/approach", "\"switch\"", "application/json"), 409,
                   "conflict");
            expect("start while running", client.Post("/api/run/start", long_cfg.dump(), "application/json"), 409,
                   "conflict");
            const auto goals = client.Post("/api/goals", "[]", "application/json");
            if (!goals || goals->status != 200) {
                ++failures;
                d << "goal update while running rejected; ";
            }
            client.Post("/api/run/stop", "", "application/json");
        }
        service.wait();

        // Poll a complete run and reconcile with the export.
        auto run_cfg = base;
        run_cfg["dataset_id"] = upload(60);
        client.Post("/api/run/start", run_cfg.dump(), "application/json");
        std::vector<Json> polled;
        std::int64_t next = 0;
        int polls = 0;
        bool gap = false;
        auto drain = [&] {
            const auto res = client.Get("/api/telemetry?since=" + std::to_string(next) + "&limit=1000");
            ++polls;
            const auto arr = Json::parse(res->body);
            for (const auto& j : arr) {
                if (j["seq"].get<std::int64_t>() != next) gap = true;
                polled.push_back(j);
                next = j["seq"].get<std::int64_t>() + 1;
            }
            return arr.size();
        };
        while (state() == "running") drain();
        while (drain() > 0) {
        }
        const auto csv = parse_telemetry_csv(client.Get("/api/logs/telemetry.csv")->body);
        bool match = polled.size() == csv.size() && !gap;
        for (std::size_t i = 0; match && i < csv.size(); ++i) {
            const auto& j = polled[i];
            match = j["seq"].get<std::int64_t>() == csv[i].seq && j["prediction"].get<double>() == csv[i].prediction &&
                    j["energy_j"].get<double>() == csv[i].energy_j &&
                    j["cumulative_energy_j"].get<double>() == csv[i].cumulative_energy_j &&
                    j["model_id"].get<std::string>() == to_string(csv[i].model_id) &&
                    j["timestamp"].get<std::string>() == csv[i].timestamp;
        }
        if (!match) {
            ++failures;
            d << "poll stream does not reconcile with CSV; ";
        }
        d << polled.size() << " polled records over " << polls << " polls vs " << csv.size() << " CSV rows; "
          << failures << " contract failures";
        v.pass = failures == 0;

        server.stop();
        listener.join();
    }
    std::error_code ec;
    fs::remove_all(dir, ec);
    v.detail = d.str();
    return v;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"Ordering suite", ordering_suite},
        {"OLS oracle equivalence", ols_oracle_equivalence},
        {"Determinism", determinism},
        {"Drift response", drift_response},
        {"Version reuse", version_reuse},
        {"Hysteresis", hysteresis},
        {"Energy additivity", energy_additivity},
        {"API contract", api_contract},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        if (!v.pass) ++failed;
        std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
