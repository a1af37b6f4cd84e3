#pragma once

// Ingestion, the bug ledger, and the on-disk store.
//
// Store layout under a root directory:
//   manifest.json          format tag, next bug id, file index
//   ontology.json
//   pool/*.jsonl           logged requests
//   train/*.jsonl          training examples (train/accepted.jsonl is ours)
//   bugs/ledger.jsonl
//   rules/rules.jsonl
//   gazetteers/*.json
//   proposals/*.jsonl      (proposals/proposals.jsonl is ours)
//
// Writes replace files atomically (temp file + rename), so a reload after any
// completed save reproduces the saved state. The store is single-writer: the
// caller serializes mutations.

#include "nlufix/bug.hpp"
#include "nlufix/correction.hpp"
#include "nlufix/detection.hpp"
#include "nlufix/refmodel.hpp"
#include "nlufix/rules.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nlufix {

// Validation failure on one line of a JSON-lines file (1-based).
class LineError : public ValidationError {
public:
    LineError(std::size_t line, const std::string& path, const std::string& detail);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct IngestOptions {
    bool skip_bad_lines = false;
};

template <typename T>
struct IngestResult {
    std::vector<T> records;
    std::vector<LineError> skipped;
};

IngestResult<LoggedRequest> ingest_pool(const std::filesystem::path& path, const IngestOptions& options = {});
IngestResult<TrainingExample> ingest_dataset(const std::filesystem::path& path, const IngestOptions& options = {});
IngestResult<Bug> ingest_bugs(const std::filesystem::path& path, const IngestOptions& options = {});
IngestResult<AugmentationProposal> ingest_proposals(const std::filesystem::path& path, const IngestOptions& options = {});
RuleStore load_rules(const std::filesystem::path& path);
Gazetteers load_gazetteers(const std::filesystem::path& path);
Ontology load_ontology(const std::filesystem::path& path);

void emit_pool(const std::filesystem::path& path, const std::vector<LoggedRequest>& records);
void emit_dataset(const std::filesystem::path& path, const std::vector<TrainingExample>& examples);
void emit_bugs(const std::filesystem::path& path, const std::vector<Bug>& bugs);
void emit_proposals(const std::filesystem::path& path, const std::vector<AugmentationProposal>& proposals);
void emit_rules(const std::filesystem::path& path, const RuleStore& rules);

// Writes `content` to `path` via a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

struct ReportWindow {
    std::optional<Timestamp> from; // inclusive
    std::optional<Timestamp> to;   // exclusive
    bool contains(Timestamp t) const { return (!from || t >= *from) && (!to || t < *to); }
};

struct Recurrence {
    std::string bug_id;
    Timestamp at = 0;
    bool operator==(const Recurrence&) const = default;
};

struct LedgerSnapshot {
    std::map<BugStatus, std::size_t> status_counts; // current status, every status present
    std::size_t total_bugs = 0;
    std::size_t fixes = 0;                          // Verified entries in window
    std::map<std::string, std::size_t> fixes_by_day; // "YYYY-MM-DD" -> count
    std::vector<Recurrence> recurrences;             // Recurred entries in window
    bool operator==(const LedgerSnapshot&) const = default;
};

LedgerSnapshot ledger_report(const std::vector<Bug>& bugs, const ReportWindow& window = {});

class Ledger {
public:
    // Registers a new Detected bug from a logged request; ids are never reused.
    const Bug& detect(const LoggedRequest& record, const std::string& actor, Timestamp at);
    // Inserts an existing bug record (load path). Throws on duplicate id.
    void insert(Bug bug);

    const Bug* find(std::string_view id) const;
    const Bug& get(std::string_view id) const;

    // Throws ValidationError("UnknownBug") or IllegalTransition.
    const Bug& transition(std::string_view id, BugStatus to, const std::string& actor, Timestamp at);
    const Bug& grade(std::string_view id, const SemanticFrame& golden, const std::string& actor, Timestamp at);
    const Bug& record_attribution(std::string_view id, ErrorAttribution attribution, const std::string& actor, Timestamp at);
    const Bug& add_proposal(std::string_view id, const std::string& proposal_id, const std::string& actor, Timestamp at);

    std::vector<Bug> bugs() const;
    std::size_t size() const { return bugs_.size(); }
    std::uint64_t next_id() const { return next_id_; }
    void set_next_id(std::uint64_t next) { next_id_ = std::max(next_id_, next); }

    LedgerSnapshot report(const ReportWindow& window = {}) const { return ledger_report(bugs(), window); }

private:
    Bug& mutable_get(std::string_view id);

    std::map<std::string, Bug, std::less<>> bugs_;
    std::uint64_t next_id_ = 1;
};

std::string format_bug_id(std::uint64_t n);

struct VerifyResult {
    std::vector<std::string> verified;
    std::vector<std::string> unverified;
};

// The runtime parse: a firing rule wins over the model.
SemanticFrame runtime_parse(std::string_view utterance, const ReferenceModel& model, const RuleStore& rules);

// FixApplied bugs whose utterance now parses as golden become Verified; the
// rest stay FixApplied.
VerifyResult verify_fixes(Ledger& ledger, const ReferenceModel& model, const RuleStore& rules,
                          const Ontology& ontology, const std::string& actor, Timestamp at);

// FixApplied or Verified bugs whose normalized utterance shows up in `pool`
// with a prediction that is still wrong become Recurred.
std::vector<std::string> check_recurrences(Ledger& ledger, const std::vector<LoggedRequest>& pool,
                                           const Ontology& ontology, const std::string& actor, Timestamp at);

class Store {
public:
    // Creates the directory layout with the given ontology. Fails if a
    // manifest already exists.
    static Store create(const std::filesystem::path& root, const Ontology& ontology);
    static Store open(const std::filesystem::path& root, const IngestOptions& options = {});

    const std::filesystem::path& root() const { return root_; }
    const Ontology& ontology() const { return ontology_; }
    const Gazetteers& gazetteers() const { return gazetteers_; }
    const std::vector<LoggedRequest>& pool() const { return pool_; }

    // Base training files followed by accepted additions.
    std::vector<TrainingExample> training() const;
    std::size_t training_size() const;

    Ledger& ledger() { return ledger_; }
    const Ledger& ledger() const { return ledger_; }
    RuleStore& rules() { return rules_; }
    const RuleStore& rules() const { return rules_; }

    const std::vector<AugmentationProposal>& proposals() const { return proposals_; }
    const AugmentationProposal* find_proposal(std::string_view id) const;
    // Adds or replaces by id.
    void put_proposal(AugmentationProposal proposal);
    // Pending -> Accepted (examples join training) or Rejected. Throws
    // ValidationError("UnknownProposal") or Error("ProposalNotPending").
    const AugmentationProposal& review_proposal(std::string_view id, bool accept);

    // Rewrites every training example whose normalized text equals the
    // utterance to carry `golden` (weights kept). Returns the number changed.
    std::size_t relabel(std::string_view utterance, const SemanticFrame& golden);

    void set_gazetteers(Gazetteers g) { gazetteers_ = std::move(g); }
    // New records are persisted to pool/ingested.jsonl.
    void add_pool(const std::vector<LoggedRequest>& records);

    // Persists all mutable state.
    void save() const;

    std::optional<ReferenceModel> load_model() const;
    void save_model(const ReferenceModel& model) const;

private:
    std::filesystem::path root_;
    Ontology ontology_;
    Gazetteers gazetteers_;
    std::vector<LoggedRequest> pool_;
    std::vector<LoggedRequest> ingested_;
    struct TrainFile {
        std::filesystem::path path;
        std::vector<TrainingExample> examples;
        bool dirty = false;
    };
    std::vector<TrainFile> base_training_;
    std::vector<TrainingExample> accepted_;
    Ledger ledger_;
    RuleStore rules_;
    std::vector<AugmentationProposal> proposals_;
};

} // namespace nlufix
