#include "harmonica/service.hpp"

#include "harmonica/error.hpp"
#include "harmonica/pipeline.hpp"

#include <httplib.h>

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <regex>

namespace harmonica {

namespace fs = std::filesystem;

std::string_view to_string(RunState s) noexcept {
    switch (s) {
        case RunState::idle: return "idle";
        case RunState::running: return "running";
        case RunState::finished: return "finished";
        case RunState::failed: return "failed";
    }
    return "unknown";
}

int http_status(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::validation:
        case ErrorKind::input:
        case ErrorKind::insufficient_data:
        case ErrorKind::sequencing: return 400;
        case ErrorKind::not_found: return 404;
        case ErrorKind::conflict: return 409;
        case ErrorKind::runtime: return 500;
    }
    return 500;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::runtime, "cannot write " + path.string());
    out << text;
}

} // namespace

ControlService::ControlService(fs::path data_dir) : data_dir_(std::move(data_dir)) {
    fs::create_directories(data_dir_ / "datasets");
    fs::create_directories(data_dir_ / "logs");
    approach_ = builtin_policy("harmone");
    goals_ = harmone_default_goals();
    const std::regex id_pattern("ds([0-9]+)\\.csv");
    for (const auto& entry : fs::directory_iterator(data_dir_ / "datasets")) {
        std::smatch m;
        const auto name = entry.path().filename().string();
        if (std::regex_match(name, m, id_pattern)) {
            const std::int64_t n = std::stoll(m[1].str());
            datasets_["ds" + m[1].str()] = entry.path();
            next_dataset_ = std::max(next_dataset_, n + 1);
        }
    }
}

ControlService::~ControlService() {
    stop_ = true;
    join_worker();
}

void ControlService::join_worker() {
    if (worker_.joinable()) worker_.join();
}

void ControlService::deploy_approach(const Json& doc) {
    auto policy = policy_from_json(doc);
    std::lock_guard lock(gate_);
    if (state_ == RunState::running) {
        throw Error(ErrorKind::conflict, "approach changes are rejected while a run is active");
    }
    approach_ = std::move(policy);
}

void ControlService::set_goals(const Json& doc) {
    auto goals = goals_from_json(doc);
    std::lock_guard lock(gate_);
    if (state_ == RunState::running) store_->put_goals(goals);
    goals_ = std::move(goals);
}

std::string ControlService::upload_dataset(std::string_view csv) {
    const auto points = parse_dataset_csv(csv);
    std::lock_guard lock(gate_);
    const auto id = "ds" + std::to_string(next_dataset_++);
    const auto path = data_dir_ / "datasets" / (id + ".csv");
    write_file(path, dataset_csv(points));
    datasets_[id] = path;
    return id;
}

void ControlService::start_run(const Json& config_doc) {
    auto config = run_config_from_json(config_doc);
    std::unique_lock lock(gate_);
    if (state_ == RunState::running) throw Error(ErrorKind::conflict, "a run is already active");
    const auto it = datasets_.find(config.dataset_id);
    if (it == datasets_.end()) {
        throw Error(ErrorKind::not_found, "unknown dataset '" + config.dataset_id + "'", "dataset_id");
    }
    if (!config.policy) config.policy = approach_;
    if (!config.goals) config.goals = goals_;
    auto dataset = load_dataset_csv(it->second.string());
    auto store = std::make_shared<KnowledgeStore>();
    auto run = std::make_shared<Run>(std::move(dataset), std::move(config), store);

    join_worker();
    store_ = store;
    run_ = run;
    summary_.reset();
    error_.clear();
    stop_ = false;
    state_ = RunState::running;
    worker_ = std::thread([this, run] {
        RunState final_state = RunState::finished;
        std::optional<RunSummary> summary;
        std::string error;
        try {
            summary = run->execute(&stop_);
            write_file(data_dir_ / "logs" / "telemetry.csv", run->store()->export_csv(CsvKind::telemetry));
            write_file(data_dir_ / "logs" / "adaptations.csv",
                       run->store()->export_csv(CsvKind::adaptations));
        } catch (const std::exception& e) {
            final_state = RunState::failed;
            error = e.what();
        }
        std::lock_guard done(gate_);
        state_ = final_state;
        summary_ = summary;
        error_ = error;
    });
}

Json ControlService::stop_run() {
    {
        std::lock_guard lock(gate_);
        if (state_ != RunState::running) throw Error(ErrorKind::conflict, "no run is active");
        stop_ = true;
    }
    join_worker();
    return status();
}

void ControlService::wait() {
    std::thread::id self = std::this_thread::get_id();
    if (worker_.joinable() && worker_.get_id() != self) worker_.join();
}

Json ControlService::status() const {
    std::lock_guard lock(gate_);
    const auto size = store_->telemetry_size();
    Json out{{"state", to_string(state_)},
             {"current_seq", size - 1},
             {"active_policy", approach_.name},
             {"deployed_model", nullptr},
             {"summary", nullptr}};
    if (run_) {
        const auto policy = store_->policy();
        if (!policy.name.empty()) out["active_policy"] = policy.name;
        if (const auto m = run_->deployed_model()) out["deployed_model"] = to_string(*m);
    }
    if (state_ == RunState::finished && summary_) out["summary"] = to_json(*summary_);
    if (state_ == RunState::failed) out["error"] = error_;
    return out;
}

std::shared_ptr<KnowledgeStore> ControlService::active_store() const {
    std::lock_guard lock(gate_);
    return store_;
}

std::vector<TelemetryRecord> ControlService::telemetry(std::int64_t since, std::int64_t limit) const {
    return active_store()->read_telemetry(since, limit);
}

std::vector<AdaptationEvent> ControlService::events(std::int64_t since) const {
    return active_store()->read_events(since);
}

std::string ControlService::export_csv(CsvKind kind) const { return active_store()->export_csv(kind); }

// --- HTTP -------------------------------------------------------------------

namespace {

Json error_body(const Error& e) {
    Json body{{"code", to_string(e.kind())}, {"message", e.what()}};
    if (!e.field().empty()) body["field"] = e.field();
    return body;
}

void reply_json(httplib::Response& res, const Json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            reply_json(res, error_body(e), http_status(e.kind()));
        } catch (const std::exception& e) {
            reply_json(res, Json{{"code", "runtime_error"}, {"message", e.what()}}, 500);
        }
    };
}

std::int64_t query_int(const httplib::Request& req, const std::string& key, std::int64_t fallback,
                       std::int64_t minimum) {
    if (!req.has_param(key)) return fallback;
    const auto text = req.get_param_value(key);
    std::int64_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || end != text.data() + text.size() || v < minimum) {
        throw Error(ErrorKind::validation, key + " must be an integer >= " + std::to_string(minimum), key);
    }
    return v;
}

Json approach_document(const std::string& body) {
    try {
        return Json::parse(body);
    } catch (const Json::parse_error&) {
        // A bare name such as `harmone` is accepted as well.
        std::string name = body;
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
        if (!name.empty() && name.find_first_of("{}[]\"") == std::string::npos) return Json(name);
        throw Error(ErrorKind::validation, "approach body must be a name or a JSON policy document");
    }
}

} // namespace

void ControlService::mount(httplib::Server& server) {
    server.Get("/api/status", guarded([this](const auto&, auto& res) { reply_json(res, status()); }));
    server.Post("/api/approach", guarded([this](const auto& req, auto& res) {
        deploy_approach(approach_document(req.body));
        reply_json(res, Json{{"ok", true}, {"active_policy", status()["active_policy"]}});
    }));
    server.Post("/api/goals", guarded([this](const auto& req, auto& res) {
        set_goals(parse_json(req.body));
        reply_json(res, Json{{"ok", true}});
    }));
    server.Post("/api/dataset", guarded([this](const auto& req, auto& res) {
        reply_json(res, Json{{"dataset_id", upload_dataset(req.body)}});
    }));
    server.Post("/api/run/start", guarded([this](const auto& req, auto& res) {
        start_run(parse_json(req.body.empty() ? std::string("{}") : req.body));
        reply_json(res, status());
    }));
    server.Post("/api/run/stop", guarded([this](const auto&, auto& res) { reply_json(res, stop_run()); }));
    server.Get("/api/telemetry", guarded([this](const auto& req, auto& res) {
        const auto since = query_int(req, "since", 0, 0);
        const auto limit = query_int(req, "limit", 1000, 1);
        Json out = Json::array();
        for (const auto& r : telemetry(since, limit)) out.push_back(to_json(r));
        reply_json(res, out);
    }));
    server.Get("/api/events", guarded([this](const auto& req, auto& res) {
        Json out = Json::array();
        for (const auto& e : events(query_int(req, "since", 0, 0))) out.push_back(to_json(e));
        reply_json(res, out);
    }));
    server.Get("/api/logs/telemetry.csv", guarded([this](const auto&, auto& res) {
        res.set_content(export_csv(CsvKind::telemetry), "text/csv");
    }));
    server.Get("/api/logs/adaptations.csv", guarded([this](const auto&, auto& res) {
        res.set_content(export_csv(CsvKind::adaptations), "text/csv");
    }));
}

int serve(const fs::path& data_dir, const std::string& host, int port) {
    if (port == 0) {
        port = 8080;
        if (const char* env = std::getenv("HARMONICA_PORT")) {
            const std::string text(env);
            int v = 0;
            const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc{} || end != text.data() + text.size() || v < 1 || v > 65535) {
                throw Error(ErrorKind::validation, "HARMONICA_PORT must be a port number", "HARMONICA_PORT");
            }
            port = v;
        }
    }
    ControlService service(data_dir);
    httplib::Server server;
    service.mount(server);
    std::cerr << "harmonica: listening on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) {
        throw Error(ErrorKind::runtime, "cannot listen on " + host + ":" + std::to_string(port));
    }
    return 0;
}

} // namespace harmonica
