#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hitlopt/pipeline.hpp"

namespace httplib {
class Server;
}

namespace hitlopt::service {

enum class JobKind { train, sweep, carbon };
enum class JobState { queued, running, done, failed };

std::string_view to_string(JobKind k) noexcept;
std::string_view to_string(JobState s) noexcept;
JobKind job_kind_from_string(std::string_view s);
JobState job_state_from_string(std::string_view s);

struct Job {
    std::string id;
    JobKind kind = JobKind::train;
    JobState state = JobState::queued;
    double progress = 0.0;
    std::string result; // object id, set iff done
    std::string error;
    nlohmann::json request = nlohmann::json::object();

    nlohmann::json to_json() const;
    static Job from_json(const nlohmann::json& j);
};

// Disk layout under the store root:
//   datasets/<id>.csv, datasets/<id>.json   uploaded bytes and metadata
//   objects/<id>.json                       models and reports, named by content hash
//   jobs/<id>.json                          job records
// Files are written to a temporary name and renamed into place, so a reader
// never sees a partial file.
class Store {
public:
    explicit Store(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    // Returns the dataset id.
    std::string put_dataset(const std::string& bytes, const nlohmann::json& schema);
    // Throws std::out_of_range for an unknown id and Error when the stored
    // bytes no longer match their recorded hash.
    std::string dataset_bytes(const std::string& id) const;
    nlohmann::json dataset_meta(const std::string& id) const;
    bool has_dataset(const std::string& id) const;

    std::string put_object(const nlohmann::json& doc);
    std::optional<std::string> object_text(const std::string& id) const;

    void save_job(const Job& job);
    std::vector<Job> load_jobs() const;

private:
    void write_atomic(const std::filesystem::path& path, const std::string& bytes) const;

    std::filesystem::path root_;
};

struct ServiceOptions {
    std::string store_dir = "hitlopt_store";
    std::string token; // empty disables the check
    pipeline::RunConfig defaults;
};

class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Registers every route on `server`.
    void install(httplib::Server& server);

    // Binds and serves until stop(); returns false when binding fails.
    bool listen(const std::string& host, int port);
    // Binds to an ephemeral port and serves on a background thread.
    int listen_background(const std::string& host = "127.0.0.1");
    void stop();

    Job submit(JobKind kind, nlohmann::json request);
    std::optional<Job> job(const std::string& id) const;
    std::vector<Job> jobs() const;
    // Blocks until no job is queued or running, or the timeout passes.
    bool wait_idle(double timeout_seconds) const;
    Store& store() noexcept { return store_; }

private:
    struct Queue {
        std::deque<std::string> pending;
        std::thread worker;
    };

    void worker_loop(JobKind kind);
    void run_job(const std::string& id);
    void update(const std::string& id, const std::function<void(Job&)>& fn);
    nlohmann::json execute(JobKind kind, const nlohmann::json& request, const std::string& id);
    std::string next_id();

    ServiceOptions options_;
    Store store_;
    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    std::map<std::string, Job> jobs_;
    std::map<JobKind, Queue> queues_;
    std::uint64_t counter_ = 0;
    bool stopping_ = false;
    std::unique_ptr<httplib::Server> server_;
    std::thread server_thread_;
};

} // namespace hitlopt::service
