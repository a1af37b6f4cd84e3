#pragma once

// JSON API over a store. `handle` is the whole API as a plain function of
// (method, path, query, body) so it can be driven without a socket; `serve`
// binds it to HTTP.
//
// Reads take a shared lock on the store, mutations an exclusive one and
// persist before returning. Retraining runs on a background worker and
// swaps the model in when done.

#include "nlufix/attribution.hpp"
#include "nlufix/codec.hpp"
#include "nlufix/correction.hpp"
#include "nlufix/refmodel.hpp"
#include "nlufix/store.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>

namespace nlufix {

struct ServiceConfig {
    std::string actor = "reviewer";
    AttributionConfig attribution;
    TemplatedOptions templated;
    std::size_t default_page_size = 50;
    // Clock for history entries; tests pin it.
    std::function<Timestamp()> clock = now_utc;
};

struct Response {
    int status = 200;
    Json body;
};

using Query = std::map<std::string, std::string>;

class Service {
public:
    explicit Service(Store store, ServiceConfig config = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    Response handle(const std::string& method, const std::string& path, const Query& query = {},
                    const std::string& body = {});

    // Blocks until no retrain is running.
    void wait_for_retrain();

    std::shared_ptr<const ReferenceModel> model() const;

private:
    Response dispatch(const std::string& method, const std::vector<std::string>& parts, const Query& query,
                      const Json& body);

    Response list_bugs(const Query& query);
    Response get_bug(const std::string& id);
    Response get_diff(const std::string& id);
    Response grade(const std::string& id, const Json& body);
    Response attribute_bug(const std::string& id);
    Response fix(const std::string& id, const Json& body);
    Response list_proposals(const Query& query);
    Response review(const std::string& id, const Json& body);
    Response retrain(const Json& body);
    Response status();
    Response verify();
    Response pool_check(const Json& body);
    Response report(const Query& query);

    void train_now(std::vector<TrainingExample> data, Gazetteers gazetteers, Ontology ontology);
    std::shared_ptr<const ReferenceModel> require_model() const;

    Store store_;
    ServiceConfig config_;
    mutable std::shared_mutex store_mutex_;

    mutable std::mutex model_mutex_;
    std::shared_ptr<const ReferenceModel> model_;
    std::uint64_t model_version_ = 0;
    std::string last_retrain_error_;

    std::mutex worker_mutex_;
    std::thread worker_;
    std::atomic<bool> retraining_{false};
};

// HTTP front end for a Service. bind() with port 0 picks a free port.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Returns the bound port. Throws Error("BindFailed").
    int bind(const std::string& host, int port);
    // Blocks until stop() is called from another thread.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Listens until the process is stopped. Throws Error("BindFailed").
void serve(Service& service, const std::string& host, int port);

// Bracketed text split into tokens for highlighting; joining `text` fields with
// single spaces reproduces the serialization.
struct DiffSegment {
    std::string text;
    std::string role; // "open", "token", "close"
    std::optional<std::size_t> token_index;
    bool highlight = false;
};

std::vector<DiffSegment> diff_segments(const SemanticFrame& frame, const std::vector<TokenSpan>& highlight);

} // namespace nlufix
