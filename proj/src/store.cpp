#include "nlufix/store.hpp"

#include "nlufix/codec.hpp"
#include "nlufix/text.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace nlufix {

LineError::LineError(std::size_t line, const std::string& path, const std::string& detail)
    : ValidationError("MalformedRecord", path + ":" + std::to_string(line) + ": " + detail), line_(line) {}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("FileNotFound", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("IoError", "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error("IoError", "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

template <typename T, typename Parse>
IngestResult<T> read_jsonl(const fs::path& path, const IngestOptions& options, Parse&& parse) {
    std::ifstream in(path);
    if (!in) throw ValidationError("FileNotFound", "cannot open " + path.string());
    IngestResult<T> result;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (split_whitespace(line).empty()) continue;
        try {
            result.records.push_back(parse(Json::parse(line)));
        } catch (const Json::exception& e) {
            LineError err(number, path.string(), std::string("invalid JSON: ") + e.what());
            if (!options.skip_bad_lines) throw err;
            result.skipped.push_back(err);
        } catch (const ValidationError& e) {
            LineError err(number, path.string(), std::string(e.code()) + ": " + e.what());
            if (!options.skip_bad_lines) throw err;
            result.skipped.push_back(err);
        }
    }
    return result;
}

template <typename T>
std::string to_jsonl(const std::vector<T>& items) {
    std::string out;
    for (const auto& item : items) {
        out += to_json(item).dump();
        out += '\n';
    }
    return out;
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

IngestResult<LoggedRequest> ingest_pool(const fs::path& path, const IngestOptions& options) {
    return read_jsonl<LoggedRequest>(path, options, [](const Json& j) { return logged_request_from_json(j); });
}

IngestResult<TrainingExample> ingest_dataset(const fs::path& path, const IngestOptions& options) {
    return read_jsonl<TrainingExample>(path, options, [](const Json& j) { return training_example_from_json(j); });
}

IngestResult<Bug> ingest_bugs(const fs::path& path, const IngestOptions& options) {
    return read_jsonl<Bug>(path, options, [](const Json& j) { return bug_from_json(j); });
}

IngestResult<AugmentationProposal> ingest_proposals(const fs::path& path, const IngestOptions& options) {
    return read_jsonl<AugmentationProposal>(path, options, [](const Json& j) { return proposal_from_json(j); });
}

RuleStore load_rules(const fs::path& path) {
    RuleStore rules;
    auto parsed = read_jsonl<Rule>(path, {}, [](const Json& j) { return rule_from_json(j); });
    for (auto& r : parsed.records) rules.add(std::move(r));
    return rules;
}

Gazetteers load_gazetteers(const fs::path& path) {
    try {
        return gazetteers_from_json(Json::parse(read_file(path)));
    } catch (const Json::exception& e) {
        throw ValidationError("MalformedRecord", path.string() + ": " + e.what());
    }
}

Ontology load_ontology(const fs::path& path) {
    try {
        return ontology_from_json(Json::parse(read_file(path)));
    } catch (const Json::exception& e) {
        throw ValidationError("MalformedRecord", path.string() + ": " + e.what());
    }
}

void emit_pool(const fs::path& path, const std::vector<LoggedRequest>& records) { write_file_atomic(path, to_jsonl(records)); }

void emit_dataset(const fs::path& path, const std::vector<TrainingExample>& examples) {
    write_file_atomic(path, to_jsonl(examples));
}

void emit_bugs(const fs::path& path, const std::vector<Bug>& bugs) { write_file_atomic(path, to_jsonl(bugs)); }

void emit_proposals(const fs::path& path, const std::vector<AugmentationProposal>& proposals) {
    write_file_atomic(path, to_jsonl(proposals));
}

void emit_rules(const fs::path& path, const RuleStore& rules) { write_file_atomic(path, to_jsonl(rules.rules())); }

// --- ledger ------------------------------------------------------------

LedgerSnapshot ledger_report(const std::vector<Bug>& bugs, const ReportWindow& window) {
    LedgerSnapshot snap;
    for (auto s : kAllStatuses) snap.status_counts[s] = 0;
    for (const auto& bug : bugs) {
        ++snap.status_counts[bug.status];
        ++snap.total_bugs;
        for (const auto& h : bug.history) {
            if (!window.contains(h.at)) continue;
            if (h.status == BugStatus::Verified) {
                ++snap.fixes;
                ++snap.fixes_by_day[format_iso8601(h.at).substr(0, 10)];
            } else if (h.status == BugStatus::Recurred) {
                snap.recurrences.push_back({bug.id, h.at});
            }
        }
    }
    std::sort(snap.recurrences.begin(), snap.recurrences.end(), [](const Recurrence& a, const Recurrence& b) {
        return a.at != b.at ? a.at < b.at : a.bug_id < b.bug_id;
    });
    return snap;
}

std::string format_bug_id(std::uint64_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "bug-%06llu", static_cast<unsigned long long>(n));
    return buf;
}

const Bug& Ledger::detect(const LoggedRequest& record, const std::string& actor, Timestamp at) {
    Bug bug;
    bug.id = format_bug_id(next_id_++);
    bug.utterance = record.utterance;
    bug.predicted = record.predicted_frame;
    bug.intent_confidence = record.intent_confidence;
    bug.uncertainty = uncertainty_score(record);
    bug.frequency = record.frequency;
    bug.last_seen = record.timestamp;
    bug.status = BugStatus::Detected;
    bug.history.push_back({at, BugStatus::Detected, actor});
    auto [it, ok] = bugs_.emplace(bug.id, std::move(bug));
    return it->second;
}

void Ledger::insert(Bug bug) {
    if (bugs_.count(bug.id)) throw ValidationError("DuplicateBug", "bug id " + bug.id + " already exists");
    // Keep the id counter ahead of any loaded "bug-NNNNNN" id.
    unsigned long long n = 0;
    if (std::sscanf(bug.id.c_str(), "bug-%llu", &n) == 1) set_next_id(n + 1);
    bugs_.emplace(bug.id, std::move(bug));
}

const Bug* Ledger::find(std::string_view id) const {
    auto it = bugs_.find(id);
    return it == bugs_.end() ? nullptr : &it->second;
}

const Bug& Ledger::get(std::string_view id) const {
    const Bug* b = find(id);
    if (!b) throw ValidationError("UnknownBug", "no bug " + std::string(id));
    return *b;
}

Bug& Ledger::mutable_get(std::string_view id) {
    auto it = bugs_.find(id);
    if (it == bugs_.end()) throw ValidationError("UnknownBug", "no bug " + std::string(id));
    return it->second;
}

const Bug& Ledger::transition(std::string_view id, BugStatus to, const std::string& actor, Timestamp at) {
    Bug& bug = mutable_get(id);
    apply_transition(bug, to, actor, at);
    return bug;
}

const Bug& Ledger::grade(std::string_view id, const SemanticFrame& golden, const std::string& actor, Timestamp at) {
    Bug& bug = mutable_get(id);
    if (golden.tokens() != bug.predicted.tokens()) {
        throw FrameError(FrameErrorKind::TokenSequenceMismatch, "golden frame does not cover the bug utterance");
    }
    Bug next = bug;
    next.golden = golden;
    apply_transition(next, BugStatus::Graded, actor, at);
    bug = std::move(next);
    return bug;
}

const Bug& Ledger::record_attribution(std::string_view id, ErrorAttribution attribution, const std::string& actor,
                                      Timestamp at) {
    Bug& bug = mutable_get(id);
    Bug next = bug;
    next.attribution = std::move(attribution);
    apply_transition(next, BugStatus::Attributed, actor, at);
    bug = std::move(next);
    return bug;
}

const Bug& Ledger::add_proposal(std::string_view id, const std::string& proposal_id, const std::string& actor,
                                Timestamp at) {
    Bug& bug = mutable_get(id);
    if (std::find(bug.proposals.begin(), bug.proposals.end(), proposal_id) == bug.proposals.end()) {
        bug.proposals.push_back(proposal_id);
    }
    if (bug.status != BugStatus::FixProposed) apply_transition(bug, BugStatus::FixProposed, actor, at);
    return bug;
}

std::vector<Bug> Ledger::bugs() const {
    std::vector<Bug> out;
    out.reserve(bugs_.size());
    for (const auto& [id, b] : bugs_) out.push_back(b);
    return out;
}

SemanticFrame runtime_parse(std::string_view utterance, const ReferenceModel& model, const RuleStore& rules) {
    if (auto fired = rules.fire(utterance)) return *fired;
    return model.predict(utterance).frame;
}

VerifyResult verify_fixes(Ledger& ledger, const ReferenceModel& model, const RuleStore& rules,
                          const Ontology& ontology, const std::string& actor, Timestamp at) {
    VerifyResult result;
    for (const auto& bug : ledger.bugs()) {
        if (bug.status != BugStatus::FixApplied) continue;
        if (!is_bug(*bug.golden, runtime_parse(bug.utterance, model, rules), ontology)) {
            ledger.transition(bug.id, BugStatus::Verified, actor, at);
            result.verified.push_back(bug.id);
        } else {
            result.unverified.push_back(bug.id);
        }
    }
    return result;
}

std::vector<std::string> check_recurrences(Ledger& ledger, const std::vector<LoggedRequest>& pool,
                                           const Ontology& ontology, const std::string& actor, Timestamp at) {
    std::map<std::string, const LoggedRequest*> latest;
    for (const auto& r : pool) {
        auto& slot = latest[normalize_text(r.utterance, Normalization::FoldCaseAndWhitespace)];
        if (!slot || r.timestamp >= slot->timestamp) slot = &r;
    }
    std::vector<std::string> recurred;
    for (const auto& bug : ledger.bugs()) {
        if (bug.status != BugStatus::FixApplied && bug.status != BugStatus::Verified) continue;
        auto it = latest.find(normalize_text(bug.utterance, Normalization::FoldCaseAndWhitespace));
        if (it == latest.end()) continue;
        const auto golden = with_tokens(*bug.golden, it->second->predicted_frame.tokens());
        if (is_bug(golden, it->second->predicted_frame, ontology)) {
            ledger.transition(bug.id, BugStatus::Recurred, actor, at);
            recurred.push_back(bug.id);
        }
    }
    return recurred;
}

// --- store -------------------------------------------------------------

namespace {

constexpr const char* kFormat = "nlufix-store";

fs::path ledger_path(const fs::path& root) { return root / "bugs" / "ledger.jsonl"; }
fs::path rules_path(const fs::path& root) { return root / "rules" / "rules.jsonl"; }
fs::path proposals_path(const fs::path& root) { return root / "proposals" / "proposals.jsonl"; }
fs::path accepted_path(const fs::path& root) { return root / "train" / "accepted.jsonl"; }
fs::path ingested_path(const fs::path& root) { return root / "pool" / "ingested.jsonl"; }
fs::path model_path(const fs::path& root) { return root / "model" / "refmodel.json"; }

} // namespace

Store Store::create(const fs::path& root, const Ontology& ontology) {
    if (fs::exists(root / "manifest.json")) throw ConfigError("a store already exists at " + root.string());
    for (const char* dir : {"pool", "train", "bugs", "rules", "gazetteers", "proposals"}) fs::create_directories(root / dir);
    write_file_atomic(root / "ontology.json", to_json(ontology).dump(2) + "\n");
    Store store;
    store.root_ = root;
    store.ontology_ = ontology;
    store.save();
    return store;
}

Store Store::open(const fs::path& root, const IngestOptions& options) {
    Store store;
    store.root_ = root;
    const Json manifest = [&] {
        try {
            return Json::parse(read_file(root / "manifest.json"));
        } catch (const Json::exception& e) {
            throw ValidationError("MalformedRecord", "manifest: " + std::string(e.what()));
        }
    }();
    if (manifest.value("format", "") != kFormat) throw ValidationError("InvalidStore", root.string() + " is not a store");
    store.ontology_ = load_ontology(root / "ontology.json");
    const Ontology& ont = store.ontology_;

    for (const auto& path : files_with_extension(root / "gazetteers", ".json")) {
        const Gazetteers loaded = load_gazetteers(path);
        for (const auto& [id, values] : loaded.all()) {
            std::vector<std::string> joined;
            for (const auto& v : values) joined.push_back(join_tokens(v));
            store.gazetteers_.set(id, joined);
        }
    }
    for (const auto& path : files_with_extension(root / "pool", ".jsonl")) {
        auto records = ingest_pool(path, options).records;
        for (const auto& r : records) ont.validate(r.predicted_frame);
        auto& dst = path == ingested_path(root) ? store.ingested_ : store.pool_;
        dst.insert(dst.end(), records.begin(), records.end());
    }
    store.pool_.insert(store.pool_.end(), store.ingested_.begin(), store.ingested_.end());
    for (const auto& path : files_with_extension(root / "train", ".jsonl")) {
        auto examples = ingest_dataset(path, options).records;
        for (const auto& ex : examples) ont.validate(ex.frame);
        if (path == accepted_path(root)) {
            store.accepted_ = std::move(examples);
        } else {
            store.base_training_.push_back({path, std::move(examples), false});
        }
    }
    if (fs::exists(rules_path(root))) {
        store.rules_ = load_rules(rules_path(root));
        for (const auto& r : store.rules_.rules()) ont.validate(r.frame);
    }
    if (fs::exists(proposals_path(root))) store.proposals_ = ingest_proposals(proposals_path(root)).records;
    if (fs::exists(ledger_path(root))) {
        for (auto& bug : ingest_bugs(ledger_path(root)).records) store.ledger_.insert(std::move(bug));
    }
    store.ledger_.set_next_id(manifest.value("next_bug_id", std::uint64_t{1}));
    return store;
}

std::vector<TrainingExample> Store::training() const {
    std::vector<TrainingExample> out;
    for (const auto& f : base_training_) out.insert(out.end(), f.examples.begin(), f.examples.end());
    out.insert(out.end(), accepted_.begin(), accepted_.end());
    return out;
}

std::size_t Store::training_size() const {
    std::size_t n = accepted_.size();
    for (const auto& f : base_training_) n += f.examples.size();
    return n;
}

std::size_t Store::relabel(std::string_view utterance, const SemanticFrame& golden) {
    ontology_.validate(golden);
    const std::string key = normalize_text(utterance, Normalization::FoldCaseAndWhitespace);
    std::size_t changed = 0;
    auto rewrite = [&](std::vector<TrainingExample>& examples) {
        bool touched = false;
        for (auto& ex : examples) {
            if (normalize_text(ex.utterance, Normalization::FoldCaseAndWhitespace) != key) continue;
            SemanticFrame frame = with_tokens(golden, split_whitespace(ex.utterance));
            if (frame == ex.frame) continue;
            ex.frame = std::move(frame);
            ++changed;
            touched = true;
        }
        return touched;
    };
    for (auto& f : base_training_)
        if (rewrite(f.examples)) f.dirty = true;
    rewrite(accepted_);
    return changed;
}

const AugmentationProposal* Store::find_proposal(std::string_view id) const {
    auto it = std::find_if(proposals_.begin(), proposals_.end(), [&](const auto& p) { return p.id == id; });
    return it == proposals_.end() ? nullptr : &*it;
}

void Store::put_proposal(AugmentationProposal proposal) {
    for (const auto& ex : proposal.examples) ontology_.validate(ex.frame);
    auto it = std::find_if(proposals_.begin(), proposals_.end(), [&](const auto& p) { return p.id == proposal.id; });
    if (it == proposals_.end()) {
        proposals_.push_back(std::move(proposal));
    } else {
        *it = std::move(proposal);
    }
}

const AugmentationProposal& Store::review_proposal(std::string_view id, bool accept) {
    auto it = std::find_if(proposals_.begin(), proposals_.end(), [&](const auto& p) { return p.id == id; });
    if (it == proposals_.end()) throw ValidationError("UnknownProposal", "no proposal " + std::string(id));
    if (it->review_status != ReviewStatus::Pending) {
        throw Error("ProposalNotPending", "proposal " + it->id + " is already " + to_string(it->review_status));
    }
    if (accept) {
        it->review_status = ReviewStatus::Accepted;
        accepted_.insert(accepted_.end(), it->examples.begin(), it->examples.end());
    } else {
        it->review_status = ReviewStatus::Rejected;
    }
    return *it;
}

void Store::add_pool(const std::vector<LoggedRequest>& records) {
    for (const auto& r : records) {
        check_request(r);
        ontology_.validate(r.predicted_frame);
    }
    pool_.insert(pool_.end(), records.begin(), records.end());
    ingested_.insert(ingested_.end(), records.begin(), records.end());
}

void Store::save() const {
    emit_bugs(ledger_path(root_), ledger_.bugs());
    emit_rules(rules_path(root_), rules_);
    emit_proposals(proposals_path(root_), proposals_);
    emit_dataset(accepted_path(root_), accepted_);
    for (const auto& f : base_training_)
        if (f.dirty) emit_dataset(f.path, f.examples);
    if (!ingested_.empty()) emit_pool(ingested_path(root_), ingested_);
    Json manifest;
    manifest["format"] = kFormat;
    manifest["version"] = 1;
    manifest["next_bug_id"] = ledger_.next_id();
    manifest["files"] = {
        {"ontology", "ontology.json"},          {"ledger", "bugs/ledger.jsonl"},
        {"rules", "rules/rules.jsonl"},         {"proposals", "proposals/proposals.jsonl"},
        {"accepted_training", "train/accepted.jsonl"},
    };
    write_file_atomic(root_ / "manifest.json", manifest.dump(2) + "\n");
}

std::optional<ReferenceModel> Store::load_model() const {
    if (!fs::exists(model_path(root_))) return std::nullopt;
    return ReferenceModel::load(read_file(model_path(root_)));
}

void Store::save_model(const ReferenceModel& model) const { write_file_atomic(model_path(root_), model.dump()); }

} // namespace nlufix
