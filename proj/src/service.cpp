#include "hitlopt/service.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "httplib.h"

#include "hitlopt/error.hpp"

namespace hitlopt::service {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(JobKind k) noexcept
{
    switch (k) {
    case JobKind::train:
        return "train";
    case JobKind::sweep:
        return "sweep";
    case JobKind::carbon:
        return "carbon";
    }
    return "train";
}

std::string_view to_string(JobState s) noexcept
{
    switch (s) {
    case JobState::queued:
        return "queued";
    case JobState::running:
        return "running";
    case JobState::done:
        return "done";
    case JobState::failed:
        return "failed";
    }
    return "queued";
}

JobKind job_kind_from_string(std::string_view s)
{
    if (s == "train")
        return JobKind::train;
    if (s == "sweep")
        return JobKind::sweep;
    if (s == "carbon")
        return JobKind::carbon;
    throw ValidationError("unknown job kind '" + std::string(s) + "'");
}

JobState job_state_from_string(std::string_view s)
{
    if (s == "queued")
        return JobState::queued;
    if (s == "running")
        return JobState::running;
    if (s == "done")
        return JobState::done;
    if (s == "failed")
        return JobState::failed;
    throw ValidationError("unknown job state '" + std::string(s) + "'");
}

json Job::to_json() const
{
    return {{"schema_version", pipeline::kSchemaVersion},
            {"id", id},
            {"kind", to_string(kind)},
            {"state", to_string(state)},
            {"progress", progress},
            {"result", state == JobState::done ? json(result) : json(nullptr)},
            {"error", error.empty() ? json(nullptr) : json(error)},
            {"request", request}};
}

Job Job::from_json(const json& j)
{
    Job job;
    job.id = j.at("id").get<std::string>();
    job.kind = job_kind_from_string(j.at("kind").get<std::string>());
    job.state = job_state_from_string(j.at("state").get<std::string>());
    job.progress = j.value("progress", 0.0);
    if (j.contains("result") && j["result"].is_string())
        job.result = j["result"].get<std::string>();
    if (j.contains("error") && j["error"].is_string())
        job.error = j["error"].get<std::string>();
    job.request = j.value("request", json::object());
    return job;
}

// ---------------------------------------------------------------------------
// Store

Store::Store(fs::path root) : root_(std::move(root))
{
    fs::create_directories(root_ / "datasets");
    fs::create_directories(root_ / "objects");
    fs::create_directories(root_ / "jobs");
}

void Store::write_atomic(const fs::path& path, const std::string& bytes) const
{
    static std::atomic<std::uint64_t> seq{0};
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(seq++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw std::out_of_range("missing file " + p.filename().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool valid_id(const std::string& id)
{
    if (id.empty() || id.size() > 64)
        return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
            return false;
    return true;
}

void check_id(const std::string& id)
{
    if (!valid_id(id))
        throw std::out_of_range("unknown id '" + id + "'");
}

} // namespace

std::string Store::put_dataset(const std::string& bytes, const json& schema)
{
    const std::string content_hash = fnv1a_hex(bytes);
    const std::string id = fnv1a_hex(schema.dump() + "\n" + content_hash);
    write_atomic(root_ / "datasets" / (id + ".csv"), bytes);
    write_atomic(root_ / "datasets" / (id + ".json"),
                 json{{"schema_version", pipeline::kSchemaVersion},
                      {"id", id},
                      {"content_hash", content_hash},
                      {"bytes", bytes.size()},
                      {"schema", schema}}
                     .dump());
    return id;
}

bool Store::has_dataset(const std::string& id) const
{
    return valid_id(id) && fs::exists(root_ / "datasets" / (id + ".json"));
}

json Store::dataset_meta(const std::string& id) const
{
    check_id(id);
    return json::parse(read_file(root_ / "datasets" / (id + ".json")));
}

std::string Store::dataset_bytes(const std::string& id) const
{
    const json meta = dataset_meta(id);
    std::string bytes = read_file(root_ / "datasets" / (id + ".csv"));
    if (fnv1a_hex(bytes) != meta.at("content_hash").get<std::string>())
        throw Error("dataset " + id + " failed its content hash check");
    return bytes;
}

std::string Store::put_object(const json& doc)
{
    const std::string text = doc.dump();
    const std::string id = fnv1a_hex(text);
    const fs::path p = root_ / "objects" / (id + ".json");
    if (!fs::exists(p))
        write_atomic(p, text);
    return id;
}

std::optional<std::string> Store::object_text(const std::string& id) const
{
    if (!valid_id(id))
        return std::nullopt;
    const fs::path p = root_ / "objects" / (id + ".json");
    if (!fs::exists(p))
        return std::nullopt;
    return read_file(p);
}

void Store::save_job(const Job& job) { write_atomic(root_ / "jobs" / (job.id + ".json"), job.to_json().dump()); }

std::vector<Job> Store::load_jobs() const
{
    std::vector<Job> out;
    for (const auto& entry : fs::directory_iterator(root_ / "jobs")) {
        if (entry.path().extension() != ".json")
            continue;
        try {
            out.push_back(Job::from_json(json::parse(read_file(entry.path()))));
        } catch (const std::exception&) {
            // Unreadable record; skip it rather than refuse to start.
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Service

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, const json& body, int status = 200)
{
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& msg)
{
    send_json(res, {{"schema_version", pipeline::kSchemaVersion}, {"error", msg}}, status);
}

json parse_body(const httplib::Request& req)
{
    if (req.body.empty())
        return json::object();
    try {
        json j = json::parse(req.body);
        if (!j.is_object())
            throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON body: ") + e.what());
    }
}

// Runs `fn`, translating exceptions into status codes.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn)
{
    try {
        fn();
    } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
    } catch (const std::out_of_range& e) {
        send_error(res, 404, e.what());
    } catch (const std::invalid_argument& e) {
        send_error(res, 400, std::string("malformed number: ") + e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

pipeline::RunConfig merge_config(const pipeline::RunConfig& base, const json& overrides)
{
    json j = base.to_json();
    for (const auto& [k, v] : overrides.items())
        j[k] = v;
    pipeline::RunConfig cfg = pipeline::RunConfig::from_json(j);
    cfg.validate();
    return cfg;
}

DataTable load_table(const Store& store, const std::string& dataset_id)
{
    const json meta = store.dataset_meta(dataset_id);
    std::istringstream in(store.dataset_bytes(dataset_id));
    return ingest_csv(in, FeatureSchema::from_json(meta.at("schema")), "dataset " + dataset_id);
}

json load_object(const Store& store, const std::string& id, const char* kind)
{
    const auto text = store.object_text(id);
    if (!text)
        throw std::out_of_range("unknown " + std::string(kind) + " '" + id + "'");
    json j = json::parse(*text);
    if (j.value("kind", std::string()) != kind)
        throw std::out_of_range("'" + id + "' is not a " + std::string(kind));
    return j;
}

// Sweep-request keys mapped onto RunConfig keys.
json sweep_overrides(const json& request)
{
    json o = json::object();
    static const std::map<std::string, std::string> rename{{"tau_list", "taus"}, {"quantiles", "quantile_levels"}};
    for (const auto& [k, v] : request.items()) {
        if (k == "model_id")
            continue;
        const auto it = rename.find(k);
        o[it == rename.end() ? k : it->second] = v;
    }
    return o;
}

} // namespace

Service::Service(ServiceOptions options) : options_(std::move(options)), store_(options_.store_dir)
{
    for (Job job : store_.load_jobs()) {
        if (job.state == JobState::queued || job.state == JobState::running) {
            job.state = JobState::failed;
            job.error = "interrupted by a service restart";
            store_.save_job(job);
        }
        if (job.state == JobState::done && !store_.object_text(job.result)) {
            job.state = JobState::failed;
            job.error = "result missing from the store";
            job.result.clear();
            store_.save_job(job);
        }
        unsigned long long n = 0;
        if (std::sscanf(job.id.c_str(), "job-%llu", &n) == 1)
            counter_ = std::max<std::uint64_t>(counter_, n);
        jobs_[job.id] = job;
    }
    for (JobKind k : {JobKind::train, JobKind::sweep, JobKind::carbon})
        queues_[k].worker = std::thread([this, k] { worker_loop(k); });
}

Service::~Service()
{
    stop();
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& [_, q] : queues_)
        if (q.worker.joinable())
            q.worker.join();
}

std::string Service::next_id()
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "job-%06llu", static_cast<unsigned long long>(++counter_));
    return buf;
}

Job Service::submit(JobKind kind, json request)
{
    Job job;
    job.kind = kind;
    job.request = std::move(request);
    {
        std::lock_guard lock(mutex_);
        job.id = next_id();
        jobs_[job.id] = job;
        store_.save_job(job);
        queues_[kind].pending.push_back(job.id);
    }
    cv_.notify_all();
    return job;
}

std::optional<Job> Service::job(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end())
        return std::nullopt;
    return it->second;
}

std::vector<Job> Service::jobs() const
{
    std::lock_guard lock(mutex_);
    std::vector<Job> out;
    for (const auto& [_, j] : jobs_)
        out.push_back(j);
    return out;
}

bool Service::wait_idle(double timeout_seconds) const
{
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, std::chrono::duration<double>(timeout_seconds), [&] {
        for (const auto& [_, j] : jobs_)
            if (j.state == JobState::queued || j.state == JobState::running)
                return false;
        return true;
    });
}

void Service::update(const std::string& id, const std::function<void(Job&)>& fn)
{
    {
        std::lock_guard lock(mutex_);
        Job& j = jobs_.at(id);
        fn(j);
        store_.save_job(j);
    }
    cv_.notify_all();
}

void Service::worker_loop(JobKind kind)
{
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [&] { return stopping_ || !queues_[kind].pending.empty(); });
            if (stopping_)
                return;
            id = queues_[kind].pending.front();
            queues_[kind].pending.pop_front();
        }
        run_job(id);
    }
}

void Service::run_job(const std::string& id)
{
    json request;
    JobKind kind;
    {
        std::lock_guard lock(mutex_);
        request = jobs_.at(id).request;
        kind = jobs_.at(id).kind;
    }
    update(id, [](Job& j) { j.state = JobState::running; });
    try {
        const json doc = execute(kind, request, id);
        // The object is on disk before the job reports done.
        const std::string object = store_.put_object(doc);
        update(id, [&](Job& j) {
            j.state = JobState::done;
            j.progress = 1.0;
            j.result = object;
        });
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        update(id, [&](Job& j) {
            j.state = JobState::failed;
            j.error = msg;
        });
    }
}

json Service::execute(JobKind kind, const json& request, const std::string& id)
{
    switch (kind) {
    case JobKind::train: {
        const std::string dataset_id = request.at("dataset_id").get<std::string>();
        const pipeline::RunConfig cfg = merge_config(options_.defaults, request.value("config", json::object()));
        const DataTable table = load_table(store_, dataset_id);
        const pipeline::TrainedBundle bundle = pipeline::train(table, cfg);
        return {{"schema_version", pipeline::kSchemaVersion},
                {"kind", "model_record"},
                {"dataset_id", dataset_id},
                {"config", cfg.to_json()},
                {"bundle", bundle.to_json()}};
    }
    case JobKind::sweep: {
        const std::string model_id = request.at("model_id").get<std::string>();
        const json record = load_object(store_, model_id, "model_record");
        pipeline::RunConfig base = pipeline::RunConfig::from_json(record.at("config"));
        base.jobs = options_.defaults.jobs;
        const pipeline::RunConfig cfg = merge_config(base, sweep_overrides(request));
        const DataTable table = load_table(store_, record.at("dataset_id").get<std::string>());
        const auto bundle = pipeline::TrainedBundle::from_json(record.at("bundle"));
        auto report = pipeline::run_sweep(table, bundle, cfg, [&](std::size_t done, std::size_t total) {
            update(id, [&](Job& j) { j.progress = static_cast<double>(done) / static_cast<double>(total); });
        });
        report.metadata["model_id"] = model_id;
        return report.to_json();
    }
    case JobKind::carbon: {
        pipeline::RunConfig cfg = merge_config(options_.defaults, request);
        return pipeline::carbon_report(cfg).to_json();
    }
    }
    throw Error("unknown job kind");
}

void Service::install(httplib::Server& server)
{
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type, X-Auth-Token, Authorization"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (options_.token.empty() || req.path == "/healthz" || req.method == "OPTIONS")
            return httplib::Server::HandlerResponse::Unhandled;
        std::string given = req.get_header_value("X-Auth-Token");
        const std::string auth = req.get_header_value("Authorization");
        if (given.empty() && auth.rfind("Bearer ", 0) == 0)
            given = auth.substr(7);
        if (given == options_.token)
            return httplib::Server::HandlerResponse::Unhandled;
        send_error(res, 401, "missing or wrong auth token");
        return httplib::Server::HandlerResponse::Handled;
    });
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

    server.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            pipeline::RunConfig cfg = options_.defaults;
            if (req.has_param("schema"))
                cfg.schema = req.get_param_value("schema");
            cfg.validate();
            const FeatureSchema schema = pipeline::schema_for(cfg);
            std::istringstream in(req.body);
            const DataTable table = ingest_csv(in, schema, "upload");
            const std::string id = store_.put_dataset(req.body, schema.to_json());
            send_json(res,
                      {{"schema_version", pipeline::kSchemaVersion},
                       {"dataset_id", id},
                       {"summary", pipeline::summarize(table).to_json()}},
                      201);
        });
    });

    server.Get(R"(/datasets/([\w-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { res.set_content(store_.dataset_bytes(req.matches[1]), "text/csv"); });
    });

    server.Get(R"(/datasets/([\w-]+)/stats)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            double threshold = options_.defaults.correlation_threshold;
            if (req.has_param("threshold"))
                threshold = std::stod(req.get_param_value("threshold"));
            const DataTable table = load_table(store_, req.matches[1]);
            json body = pipeline::dataset_stats(table, threshold);
            body["dataset_id"] = std::string(req.matches[1]);
            send_json(res, body);
        });
    });

    server.Post("/jobs/train", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            json body = parse_body(req);
            if (!body.contains("dataset_id") || !body["dataset_id"].is_string())
                throw ValidationError("train request needs 'dataset_id'");
            if (!store_.has_dataset(body["dataset_id"]))
                throw std::out_of_range("unknown dataset '" + body["dataset_id"].get<std::string>() + "'");
            merge_config(options_.defaults, body.value("config", json::object()));
            send_json(res, submit(JobKind::train, body).to_json(), 202);
        });
    });

    server.Post("/jobs/sweep", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            json body = parse_body(req);
            if (!body.contains("model_id") || !body["model_id"].is_string())
                throw ValidationError("sweep request needs 'model_id'");
            const json record = load_object(store_, body["model_id"], "model_record");
            merge_config(pipeline::RunConfig::from_json(record.at("config")), sweep_overrides(body));
            send_json(res, submit(JobKind::sweep, body).to_json(), 202);
        });
    });

    server.Post("/jobs/carbon", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            json body = parse_body(req);
            merge_config(options_.defaults, body);
            send_json(res, submit(JobKind::carbon, body).to_json(), 202);
        });
    });

    server.Get("/jobs", [this](const httplib::Request&, httplib::Response& res) {
        json arr = json::array();
        for (const auto& j : jobs())
            arr.push_back(j.to_json());
        send_json(res, {{"schema_version", pipeline::kSchemaVersion}, {"jobs", arr}});
    });

    server.Get(R"(/jobs/([\w-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto j = job(req.matches[1]);
        if (!j)
            return send_error(res, 404, "unknown job '" + std::string(req.matches[1]) + "'");
        send_json(res, j->to_json());
    });

    // Resolves a job id (which must be done) or an object id to stored text.
    auto resolve = [this](const std::string& id, httplib::Response& res) -> std::optional<std::string> {
        if (const auto j = job(id)) {
            if (j->state == JobState::failed) {
                send_error(res, 500, "job failed: " + j->error);
                return std::nullopt;
            }
            if (j->state != JobState::done) {
                send_error(res, 409, "job '" + id + "' is " + std::string(to_string(j->state)));
                return std::nullopt;
            }
            return store_.object_text(j->result);
        }
        if (auto text = store_.object_text(id))
            return text;
        send_error(res, 404, "unknown id '" + id + "'");
        return std::nullopt;
    };

    server.Get(R"(/reports/sweep/([\w-]+))", [this, resolve](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto text = resolve(req.matches[1], res);
            if (!text)
                return;
            if (json::parse(*text).value("kind", std::string()) != "sweep_report")
                return send_error(res, 404, "'" + std::string(req.matches[1]) + "' is not a sweep report");
            res.set_content(*text, kJson);
        });
    });

    server.Get(R"(/models/([\w-]+))", [this, resolve](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto text = resolve(req.matches[1], res);
            if (text)
                res.set_content(*text, kJson);
        });
    });

    server.Get(R"(/reports/shap/([\w-]+))", [this, resolve](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto text = resolve(req.matches[1], res);
            if (!text)
                return;
            const json record = json::parse(*text);
            if (record.value("kind", std::string()) != "model_record")
                return send_error(res, 404, "'" + std::string(req.matches[1]) + "' is not a model");
            const auto bundle = pipeline::TrainedBundle::from_json(record.at("bundle"));
            const DataTable table = load_table(store_, record.at("dataset_id").get<std::string>());
            json reports = json::array();
            for (const auto& r : pipeline::explain_models(table, bundle))
                reports.push_back(r.to_json());
            send_json(res, {{"schema_version", pipeline::kSchemaVersion},
                            {"kind", "shap_report"},
                            {"model_id", std::string(req.matches[1])},
                            {"targets", reports}});
        });
    });

    server.Post("/export/setpoints", [this, resolve](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const json body = parse_body(req);
            if (!body.contains("job") || !body["job"].is_string())
                throw ValidationError("export request needs 'job'");
            const double quantile = body.value("quantile", 50.0);
            std::optional<double> tau;
            if (body.contains("tau") && !body["tau"].is_null())
                tau = body["tau"].get<double>();
            const auto text = resolve(body["job"], res);
            if (!text)
                return;
            const json report = json::parse(*text);
            if (report.value("kind", std::string()) != "sweep_report")
                throw ValidationError("export needs a sweep job");
            const json record = load_object(store_, report.at("metadata").at("model_id"), "model_record");
            const FeatureSchema schema = FeatureSchema::from_json(record.at("bundle").at("schema"));

            const json* entry = nullptr;
            if (!tau) {
                entry = &report.at("unconstrained");
            } else {
                for (const auto& e : report.at("entries"))
                    if (e.at("tau").is_number() && std::abs(e.at("tau").get<double>() - *tau) < 1e-9)
                        entry = &e;
            }
            if (!entry)
                throw ValidationError("sweep has no entry for tau " + std::to_string(*tau));
            if (entry->at("picks").is_null())
                throw ValidationError("sweep entry has no successful solutions");
            const json* pick = nullptr;
            for (const auto& p : entry->at("picks").at("picks"))
                if (std::abs(p.at("level").get<double>() - quantile) < 1e-9)
                    pick = &p;
            if (!pick)
                throw ValidationError("quantile " + std::to_string(quantile) + " was not picked in this sweep");
            const json& rec = pick->at("record");
            json vars = json::array();
            const auto names = report.at("variables");
            for (std::size_t k = 0; k < names.size(); ++k) {
                const auto& v = schema.variables()[schema.index_of(names[k].get<std::string>())];
                vars.push_back({{"name", v.name},
                                {"unit", v.unit},
                                {"value", rec.at("x_eng")[k]},
                                {"scaled", rec.at("x_scaled")[k]}});
            }
            send_json(res, {{"schema_version", pipeline::kSchemaVersion},
                            {"kind", "setpoint_sheet"},
                            {"entry", entry->at("label")},
                            {"tau", tau ? json(*tau) : json(nullptr)},
                            {"quantile", quantile},
                            {"guess_id", rec.at("guess_id")},
                            {"feasible", rec.at("feasible")},
                            {"objective_value", rec.at("objective_value")},
                            {"te_pred", rec.at("te_pred")},
                            {"thr_pred", rec.at("thr_pred")},
                            {"variables", vars}});
        });
    });

    server.Get("/carbon", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            pipeline::RunConfig cfg = options_.defaults;
            if (req.has_param("delta_pp"))
                cfg.delta_pp = std::stod(req.get_param_value("delta_pp"));
            cfg.validate();
            send_json(res, pipeline::carbon_report(cfg).to_json());
        });
    });
}

bool Service::listen(const std::string& host, int port)
{
    server_ = std::make_unique<httplib::Server>();
    install(*server_);
    return server_->listen(host, port);
}

int Service::listen_background(const std::string& host)
{
    server_ = std::make_unique<httplib::Server>();
    install(*server_);
    const int port = server_->bind_to_any_port(host);
    if (port < 0)
        throw Error("cannot bind " + host);
    server_thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void Service::stop()
{
    if (server_)
        server_->stop();
    if (server_thread_.joinable())
        server_thread_.join();
}

} // namespace hitlopt::service
