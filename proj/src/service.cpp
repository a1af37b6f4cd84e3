#include "nlufix/service.hpp"

#include "nlufix/pipeline.hpp"
#include "nlufix/text.hpp"

#include <httplib.h>

#include <algorithm>

namespace nlufix {

namespace {

class ApiError : public Error {
public:
    ApiError(int status, std::string code, const std::string& message, Json detail = Json::object())
        : Error(std::move(code), message), status_(status), detail_(std::move(detail)) {}
    int status() const { return status_; }
    const Json& detail() const { return detail_; }

private:
    int status_;
    Json detail_;
};

Response error_body(int status, const std::string& code, const std::string& message, Json detail = Json::object()) {
    return {status, {{"code", code}, {"message", message}, {"detail", std::move(detail)}}};
}

int status_for(const std::string& code) {
    static const std::map<std::string, int> table = {
        {"UnknownBug", 404},          {"UnknownProposal", 404}, {"NotFound", 404},
        {"ProposalNotPending", 409},  {"IllegalTransition", 409}, {"MissingGolden", 409},
        {"RetrainInFlight", 409},     {"NoModel", 409},          {"NotGraded", 409},
        {"NoAttribution", 409},
    };
    auto it = table.find(code);
    return it == table.end() ? 400 : it->second;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        std::size_t start = i;
        while (i < path.size() && path[i] != '/') ++i;
        if (i > start) parts.push_back(path.substr(start, i - start));
    }
    return parts;
}

std::size_t query_size(const Query& q, const std::string& key, std::size_t fallback, std::size_t lo, std::size_t hi) {
    auto it = q.find(key);
    if (it == q.end()) return fallback;
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(it->second, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != it->second.size() || v < static_cast<long long>(lo) || v > static_cast<long long>(hi)) {
        throw ApiError(400, "InvalidQuery", key + " must be an integer in [" + std::to_string(lo) + ", " +
                                                std::to_string(hi) + "]");
    }
    return static_cast<std::size_t>(v);
}

std::string body_string(const Json& body, const std::string& key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_string()) throw ApiError(400, "MalformedRequest", "body field '" + key + "' must be a string");
    return it->get<std::string>();
}

Json bug_row(const Bug& bug, const Ontology& ontology) {
    Json j = to_json(bug);
    j["verdict"] = bug.golden ? Json(to_string(diff_frames(*bug.golden, bug.predicted, ontology).verdict)) : Json(nullptr);
    j["suggested_action"] = bug.attribution ? Json(to_string(correction_for(bug.attribution->category))) : Json(nullptr);
    return j;
}

Json span_json(const std::optional<TokenSpan>& s) { return s ? to_json(*s) : Json(nullptr); }

std::string span_text(const std::vector<std::string>& tokens, const std::optional<TokenSpan>& s) {
    if (!s) return {};
    std::vector<std::string> part(tokens.begin() + static_cast<std::ptrdiff_t>(s->begin),
                                  tokens.begin() + static_cast<std::ptrdiff_t>(s->end));
    return join_tokens(part);
}

Json segments_json(const std::vector<DiffSegment>& segments) {
    Json out = Json::array();
    for (const auto& s : segments) {
        Json j = {{"text", s.text}, {"role", s.role}, {"highlight", s.highlight}};
        j["token_index"] = s.token_index ? Json(*s.token_index) : Json(nullptr);
        out.push_back(std::move(j));
    }
    return out;
}

Json snapshot_json(const LedgerSnapshot& snap, const ReportWindow& window) {
    Json j;
    j["window"] = {{"from", window.from ? Json(format_iso8601(*window.from)) : Json(nullptr)},
                   {"to", window.to ? Json(format_iso8601(*window.to)) : Json(nullptr)}};
    const Json body = to_json(snap);
    for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = *it;
    return j;
}

} // namespace

std::vector<DiffSegment> diff_segments(const SemanticFrame& frame, const std::vector<TokenSpan>& highlight) {
    std::vector<DiffSegment> out;
    std::size_t index = 0;
    auto lit = [&](std::size_t i) {
        return std::any_of(highlight.begin(), highlight.end(), [&](const TokenSpan& s) { return i >= s.begin && i < s.end; });
    };
    auto walk = [&](auto& self, const std::vector<FrameNode>& nodes) -> void {
        for (const auto& n : nodes) {
            if (n.is_token()) {
                out.push_back({n.value, "token", index, lit(index)});
                ++index;
                continue;
            }
            out.push_back({(n.kind == NodeKind::Slot ? "[SL:" : "[IN:") + n.value, "open", std::nullopt, false});
            self(self, n.children);
            out.push_back({"]", "close", std::nullopt, false});
        }
    };
    out.push_back({"[IN:" + frame.intent, "open", std::nullopt, false});
    walk(walk, frame.children);
    out.push_back({"]", "close", std::nullopt, false});
    return out;
}

Service::Service(Store store, ServiceConfig config) : store_(std::move(store)), config_(std::move(config)) {
    check_config(config_.attribution);
    if (auto m = store_.load_model()) {
        model_ = std::make_shared<const ReferenceModel>(std::move(*m));
        model_version_ = 1;
    } else if (store_.training_size() > 0) {
        train_now(store_.training(), store_.gazetteers(), store_.ontology());
    }
}

Service::~Service() { wait_for_retrain(); }

void Service::wait_for_retrain() {
    std::lock_guard lock(worker_mutex_);
    if (worker_.joinable()) worker_.join();
}

std::shared_ptr<const ReferenceModel> Service::model() const {
    std::lock_guard lock(model_mutex_);
    return model_;
}

std::shared_ptr<const ReferenceModel> Service::require_model() const {
    auto m = model();
    if (!m) throw ApiError(409, "NoModel", "no model is loaded; POST /retrain first");
    return m;
}

void Service::train_now(std::vector<TrainingExample> data, Gazetteers gazetteers, Ontology ontology) {
    auto trained = std::make_shared<const ReferenceModel>(train(data, gazetteers, ontology));
    store_.save_model(*trained);
    std::lock_guard lock(model_mutex_);
    model_ = std::move(trained);
    ++model_version_;
    last_retrain_error_.clear();
}

Response Service::handle(const std::string& method, const std::string& path, const Query& query,
                         const std::string& body) {
    try {
        Json parsed = Json::object();
        if (!split_whitespace(body).empty()) {
            try {
                parsed = Json::parse(body);
            } catch (const Json::exception& e) {
                throw ApiError(400, "MalformedRequest", std::string("request body is not JSON: ") + e.what());
            }
            if (!parsed.is_object()) throw ApiError(400, "MalformedRequest", "request body must be a JSON object");
        }
        return dispatch(method, split_path(path), query, parsed);
    } catch (const ApiError& e) {
        return error_body(e.status(), e.code(), e.what(), e.detail());
    } catch (const IllegalTransition& e) {
        return error_body(409, e.code(), e.what(), {{"from", to_string(e.from())}, {"to", to_string(e.to())}});
    } catch (const LineError& e) {
        return error_body(400, e.code(), e.what(), {{"line", e.line()}});
    } catch (const Error& e) {
        return error_body(status_for(e.code()), e.code(), e.what());
    } catch (const std::exception& e) {
        return error_body(500, "InternalError", e.what());
    }
}

Response Service::dispatch(const std::string& method, const std::vector<std::string>& p, const Query& query,
                           const Json& body) {
    const bool get = method == "GET", post = method == "POST";
    auto not_allowed = [&] { return error_body(405, "MethodNotAllowed", method + " is not supported here"); };
    const std::size_t n = p.size();

    if (n >= 1 && p[0] == "bugs") {
        if (n == 1) return get ? list_bugs(query) : not_allowed();
        if (n == 2) return get ? get_bug(p[1]) : not_allowed();
        if (n == 3 && p[2] == "diff") return get ? get_diff(p[1]) : not_allowed();
        if (n == 3 && p[2] == "grade") return post ? grade(p[1], body) : not_allowed();
        if (n == 3 && p[2] == "attribute") return post ? attribute_bug(p[1]) : not_allowed();
        if (n == 3 && p[2] == "fix") return post ? fix(p[1], body) : not_allowed();
    } else if (n >= 1 && p[0] == "proposals") {
        if (n == 1) return get ? list_proposals(query) : not_allowed();
        if (n == 3 && p[2] == "review") return post ? review(p[1], body) : not_allowed();
    } else if (n == 1 && p[0] == "retrain") {
        return post ? retrain(body) : not_allowed();
    } else if (n == 1 && p[0] == "status") {
        return get ? status() : not_allowed();
    } else if (n == 1 && p[0] == "verify") {
        return post ? verify() : not_allowed();
    } else if (n == 2 && p[0] == "pool" && p[1] == "check") {
        return post ? pool_check(body) : not_allowed();
    } else if (n == 1 && p[0] == "report") {
        return get ? report(query) : not_allowed();
    }
    return error_body(404, "NotFound", "no route for " + method + " /" + join_tokens(p, "/"));
}

Response Service::list_bugs(const Query& query) {
    RankingKey key = RankingKey::Frequency;
    if (auto it = query.find("sort"); it != query.end()) {
        try {
            key = ranking_key_from_string(it->second);
        } catch (const ConfigError&) {
            throw ApiError(400, "InvalidSortKey", "sort must be one of frequency, uncertainty, recency",
                           {{"sort", it->second}});
        }
    }
    std::optional<BugStatus> filter;
    if (auto it = query.find("status"); it != query.end()) {
        try {
            filter = bug_status_from_string(it->second);
        } catch (const Error&) {
            throw ApiError(400, "InvalidStatus", "unknown status '" + it->second + "'");
        }
    }
    const std::size_t page = query_size(query, "page", 1, 1, 1000000);
    const std::size_t page_size = query_size(query, "page_size", config_.default_page_size, 1, 1000);

    std::shared_lock lock(store_mutex_);
    std::vector<Bug> bugs;
    for (auto& b : store_.ledger().bugs())
        if (!filter || b.status == *filter) bugs.push_back(std::move(b));
    std::stable_sort(bugs.begin(), bugs.end(), [&](const Bug& a, const Bug& b) {
        const RankFields fa{a.uncertainty, a.frequency, a.last_seen, a.utterance};
        const RankFields fb{b.uncertainty, b.frequency, b.last_seen, b.utterance};
        if (ranks_before(key, fa, fb)) return true;
        if (ranks_before(key, fb, fa)) return false;
        return a.id < b.id;
    });
    Json rows = Json::array();
    const std::size_t begin = std::min(bugs.size(), (page - 1) * page_size);
    const std::size_t end = std::min(bugs.size(), begin + page_size);
    for (std::size_t i = begin; i < end; ++i) rows.push_back(bug_row(bugs[i], store_.ontology()));
    return {200,
            {{"sort", to_string(key)},
             {"status", filter ? Json(to_string(*filter)) : Json(nullptr)},
             {"page", page},
             {"page_size", page_size},
             {"total", bugs.size()},
             {"bugs", rows}}};
}

Response Service::get_bug(const std::string& id) {
    std::shared_lock lock(store_mutex_);
    return {200, bug_row(store_.ledger().get(id), store_.ontology())};
}

Response Service::get_diff(const std::string& id) {
    std::shared_lock lock(store_mutex_);
    const Bug& bug = store_.ledger().get(id);
    if (!bug.golden) throw ApiError(409, "NotGraded", "bug " + id + " has no golden frame yet");
    const FrameDiff diff = diff_frames(*bug.golden, bug.predicted, store_.ontology());
    const auto tokens = bug.predicted.tokens();

    std::vector<TokenSpan> expected_hl, predicted_hl;
    Json spans = Json::array();
    for (const auto& f : diff.details) {
        if (f.expected_span) expected_hl.push_back(*f.expected_span);
        if (f.predicted_span) predicted_hl.push_back(*f.predicted_span);
        spans.push_back({{"kind", to_string(f.kind)},
                         {"label", f.label},
                         {"predicted_label", f.predicted_label},
                         {"path", f.path},
                         {"expected_span", span_json(f.expected_span)},
                         {"predicted_span", span_json(f.predicted_span)},
                         {"expected_text", span_text(tokens, f.expected_span)},
                         {"predicted_text", span_text(tokens, f.predicted_span)}});
    }
    return {200,
            {{"bug_id", bug.id},
             {"verdict", to_string(diff.verdict)},
             {"tokens", tokens},
             {"expected", {{"text", serialize_frame(*bug.golden)}, {"segments", segments_json(diff_segments(*bug.golden, expected_hl))}}},
             {"predicted", {{"text", serialize_frame(bug.predicted)}, {"segments", segments_json(diff_segments(bug.predicted, predicted_hl))}}},
             {"spans", spans}}};
}

Response Service::grade(const std::string& id, const Json& body) {
    const SemanticFrame golden = parse_frame(body_string(body, "golden"));
    std::unique_lock lock(store_mutex_);
    store_.ontology().validate(golden);
    const Bug& bug = store_.ledger().grade(id, golden, config_.actor, config_.clock());
    store_.save();
    return {200, bug_row(bug, store_.ontology())};
}

Response Service::attribute_bug(const std::string& id) {
    std::unique_lock lock(store_mutex_);
    const Bug& current = store_.ledger().get(id);
    if (!current.golden) throw ApiError(409, "NotGraded", "bug " + id + " has no golden frame yet");
    const auto training = store_.training();
    const TrainingIndex index = build_training_index(training, config_.attribution);
    ErrorAttribution a = attribute(current, index, store_.rules(), config_.attribution);
    const Bug& bug = store_.ledger().record_attribution(id, std::move(a), config_.actor, config_.clock());
    store_.save();
    return {200, bug_row(bug, store_.ontology())};
}

Response Service::fix(const std::string& id, const Json& body) {
    std::unique_lock lock(store_mutex_);
    Ledger& ledger = store_.ledger();
    const Bug current = ledger.get(id);
    if (!current.attribution) throw ApiError(409, "NoAttribution", "bug " + id + " has not been attributed");

    std::string strategy;
    if (body.contains("strategy")) {
        strategy = body_string(body, "strategy");
    } else {
        switch (correction_for(current.attribution->category)) {
        case CorrectionKind::GenerateData: strategy = "exact"; break;
        case CorrectionKind::FixAnnotationConflicts: strategy = "relabel"; break;
        case CorrectionKind::FixRule:
        case CorrectionKind::GenerateRule: strategy = "rule"; break;
        }
    }
    const Timestamp at = config_.clock();
    Json out = Json::object();
    out["strategy"] = strategy;

    if (strategy == "exact" || strategy == "templated") {
        AugmentationProposal proposal;
        if (strategy == "exact") {
            proposal = exact_match_proposal(current);
        } else {
            const auto training = store_.training();
            const TrainingIndex index = build_training_index(training, config_.attribution);
            proposal = templated_proposal(current, store_.ontology(), store_.gazetteers(), config_.templated, &index);
        }
        store_.put_proposal(proposal);
        ledger.add_proposal(id, proposal.id, config_.actor, at);
        out["proposal"] = to_json(proposal);
    } else if (strategy == "rule") {
        const Rule rule = generate_rule(current.utterance, *current.golden);
        store_.rules().upsert(rule);
        ledger.transition(id, BugStatus::FixProposed, config_.actor, at);
        ledger.transition(id, BugStatus::FixApplied, config_.actor, at);
        out["rule"] = to_json(rule);
    } else if (strategy == "relabel") {
        const std::size_t changed = store_.relabel(current.utterance, *current.golden);
        ledger.transition(id, BugStatus::FixProposed, config_.actor, at);
        ledger.transition(id, BugStatus::FixApplied, config_.actor, at);
        out["relabeled"] = changed;
    } else {
        throw ApiError(400, "InvalidStrategy", "strategy must be one of exact, templated, rule, relabel",
                       {{"strategy", strategy}});
    }
    store_.save();
    out["bug"] = bug_row(ledger.get(id), store_.ontology());
    return {200, out};
}

Response Service::list_proposals(const Query& query) {
    std::optional<ReviewStatus> filter;
    if (auto it = query.find("status"); it != query.end()) {
        try {
            filter = review_status_from_string(it->second);
        } catch (const Error&) {
            throw ApiError(400, "InvalidStatus", "unknown review status '" + it->second + "'");
        }
    }
    std::shared_lock lock(store_mutex_);
    Json rows = Json::array();
    for (const auto& p : store_.proposals())
        if (!filter || p.review_status == *filter) rows.push_back(to_json(p));
    return {200, {{"total", rows.size()}, {"proposals", rows}}};
}

Response Service::review(const std::string& id, const Json& body) {
    const std::string action = body_string(body, "action");
    if (action != "accept" && action != "reject") {
        throw ApiError(400, "InvalidAction", "action must be accept or reject", {{"action", action}});
    }
    std::unique_lock lock(store_mutex_);
    const AugmentationProposal& p = store_.review_proposal(id, action == "accept");
    Json out = {{"proposal", to_json(p)}};
    if (const Bug* bug = store_.ledger().find(p.source_bug_id)) {
        if (action == "accept" && bug->status == BugStatus::FixProposed) {
            store_.ledger().transition(bug->id, BugStatus::FixApplied, config_.actor, config_.clock());
        }
        out["bug"] = bug_row(store_.ledger().get(p.source_bug_id), store_.ontology());
    } else {
        out["bug"] = nullptr;
    }
    out["training_size"] = store_.training_size();
    store_.save();
    return {200, out};
}

Response Service::retrain(const Json& body) {
    bool expected = false;
    if (!retraining_.compare_exchange_strong(expected, true)) {
        throw ApiError(409, "RetrainInFlight", "a retrain is already running");
    }
    std::vector<TrainingExample> data;
    Gazetteers gazetteers;
    Ontology ontology;
    {
        std::shared_lock lock(store_mutex_);
        data = store_.training();
        gazetteers = store_.gazetteers();
        ontology = store_.ontology();
    }
    const bool sync = body.contains("sync") && body.at("sync").is_boolean() && body.at("sync").get<bool>();
    if (sync) {
        struct Reset {
            std::atomic<bool>& flag;
            ~Reset() { flag = false; }
        } reset{retraining_};
        const std::size_t size = data.size();
        train_now(std::move(data), std::move(gazetteers), std::move(ontology));
        std::lock_guard lock(model_mutex_);
        return {200, {{"state", "idle"}, {"model_version", model_version_}, {"training_size", size}}};
    }

    std::lock_guard lock(worker_mutex_);
    if (worker_.joinable()) worker_.join();
    const std::size_t size = data.size();
    worker_ = std::thread([this, data = std::move(data), gazetteers = std::move(gazetteers),
                           ontology = std::move(ontology)]() mutable {
        try {
            train_now(std::move(data), std::move(gazetteers), std::move(ontology));
        } catch (const std::exception& e) {
            std::lock_guard lock(model_mutex_);
            last_retrain_error_ = e.what();
        }
        retraining_ = false;
    });
    return {202, {{"state", "running"}, {"training_size", size}}};
}

Response Service::status() {
    Json j;
    j["retrain"] = retraining_ ? "running" : "idle";
    {
        std::lock_guard lock(model_mutex_);
        j["model_loaded"] = static_cast<bool>(model_);
        j["model_version"] = model_version_;
        j["last_error"] = last_retrain_error_.empty() ? Json(nullptr) : Json(last_retrain_error_);
    }
    std::shared_lock lock(store_mutex_);
    j["training_size"] = store_.training_size();
    j["bug_count"] = store_.ledger().size();
    j["rule_count"] = store_.rules().size();
    j["proposal_count"] = store_.proposals().size();
    return {200, j};
}

Response Service::verify() {
    const auto model = require_model();
    std::unique_lock lock(store_mutex_);
    const VerifyResult r =
        verify_fixes(store_.ledger(), *model, store_.rules(), store_.ontology(), config_.actor, config_.clock());
    store_.save();
    return {200, {{"verified", r.verified}, {"unverified", r.unverified}}};
}

Response Service::pool_check(const Json& body) {
    auto it = body.find("records");
    if (it == body.end() || !it->is_array()) throw ApiError(400, "MalformedRequest", "body field 'records' must be an array");
    std::vector<LoggedRequest> records;
    for (std::size_t i = 0; i < it->size(); ++i) {
        try {
            records.push_back(logged_request_from_json((*it)[i]));
            check_request(records.back());
        } catch (const ValidationError& e) {
            throw ApiError(400, e.code(), e.what(), {{"index", i}});
        }
    }
    std::unique_lock lock(store_mutex_);
    store_.add_pool(records);
    const auto recurred = check_recurrences(store_.ledger(), records, store_.ontology(), config_.actor, config_.clock());
    store_.save();
    return {200, {{"ingested", records.size()}, {"recurred", recurred}}};
}

Response Service::report(const Query& query) {
    ReportWindow window;
    if (auto it = query.find("from"); it != query.end()) window.from = parse_iso8601(it->second);
    if (auto it = query.find("to"); it != query.end()) window.to = parse_iso8601(it->second);
    std::shared_lock lock(store_mutex_);
    return {200, snapshot_json(store_.ledger().report(window), window)};
}

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>()) {
    auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        Query query;
        for (const auto& [k, v] : req.params) query.emplace(k, v);
        const Response r = service.handle(req.method, req.path, query, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    auto& server = impl_->server;
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Put(".*", handler);
    server.Delete(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& server = impl_->server;
    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw Error("BindFailed", "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

void serve(Service& service, const std::string& host, int port) {
    HttpServer server(service);
    server.bind(host, port);
    server.run();
}

} // namespace nlufix
