#pragma once

#include "harmonica/config.hpp"
#include "harmonica/error.hpp"
#include "harmonica/knowledge.hpp"
#include "harmonica/runner.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace harmonica {

enum class RunState { idle, running, finished, failed };

std::string_view to_string(RunState s) noexcept;

/// Control plane: approach and goal configuration, dataset uploads, run
/// lifecycle and read-only views over the active run's knowledge store.
/// Mutations go through one gate; reads only touch the store's snapshots.
class ControlService {
public:
    explicit ControlService(std::filesystem::path data_dir);
    ~ControlService();

    ControlService(const ControlService&) = delete;
    ControlService& operator=(const ControlService&) = delete;

    /// Name (`static:<model>`, `switch`, `harmone`) or policy document.
    /// Errors: not_found for unknown names, validation, conflict while running.
    void deploy_approach(const Json& doc);
    /// Allowed during a run; the next MAPE cycle sees the new set.
    void set_goals(const Json& doc);
    std::string upload_dataset(std::string_view csv);
    void start_run(const Json& config);
    Json stop_run();
    Json status() const;

    std::vector<TelemetryRecord> telemetry(std::int64_t since, std::int64_t limit) const;
    std::vector<AdaptationEvent> events(std::int64_t since) const;
    std::string export_csv(CsvKind kind) const;

    /// Blocks until the current run (if any) has ended.
    void wait();

    /// Registers every endpoint on `server`.
    void mount(httplib::Server& server);

private:
    std::shared_ptr<KnowledgeStore> active_store() const;
    void join_worker();

    std::filesystem::path data_dir_;
    mutable std::mutex gate_;
    AdaptationPolicy approach_;
    std::vector<SustainabilityGoal> goals_;
    std::map<std::string, std::filesystem::path> datasets_;
    std::int64_t next_dataset_ = 1;

    RunState state_ = RunState::idle;
    std::string error_;
    std::optional<RunSummary> summary_;
    std::shared_ptr<KnowledgeStore> store_ = std::make_shared<KnowledgeStore>();
    std::shared_ptr<Run> run_;
    std::atomic<bool> stop_{false};
    std::thread worker_;
};

/// HTTP status for an error class.
int http_status(ErrorKind kind) noexcept;

/// Serves until the process is stopped. `port` 0 reads HARMONICA_PORT (default 8080).
int serve(const std::filesystem::path& data_dir, const std::string& host, int port);

} // namespace harmonica
