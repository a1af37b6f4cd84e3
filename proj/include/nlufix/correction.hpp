#pragma once

// Fixes per attribution category: templated augmentation, exact-match
// weighted copies, generated rules, and batch label transforms. Generated
// data is emitted as proposals awaiting review.

#include "nlufix/attribution.hpp"
#include "nlufix/bug.hpp"
#include "nlufix/frames.hpp"
#include "nlufix/rules.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nlufix {

// Slot label (or gazetteer id) -> candidate values, each a token sequence.
class Gazetteers {
public:
    // Values are whitespace-split; duplicates are dropped. Throws
    // ValidationError on an empty list or bracket characters.
    void set(const std::string& id, const std::vector<std::string>& values);

    bool contains(std::string_view id) const { return values_.find(id) != values_.end(); }
    const std::vector<std::vector<std::string>>& values(std::string_view id) const;

    const std::map<std::string, std::vector<std::vector<std::string>>, std::less<>>& all() const { return values_; }
    bool empty() const { return values_.empty(); }

private:
    std::map<std::string, std::vector<std::vector<std::string>>, std::less<>> values_;
};

// One placeholder or literal token of a template pattern.
struct TemplatePiece {
    std::string literal;
    std::optional<std::string> slot; // set for placeholders
    bool operator==(const TemplatePiece&) const = default;
};

struct Template {
    std::vector<TemplatePiece> pattern;
    std::vector<std::string> bound_slots;     // labels, in document order
    std::vector<std::string> bound_gazetteers; // parallel to bound_slots
    std::vector<std::size_t> bound_positions;  // document-order slot indices in `golden`
    std::string source_bug_id;
    SemanticFrame golden;

    // e.g. "Play my <SL:PLAYLIST_NAME> playlist"
    std::string text() const;
    bool operator==(const Template&) const = default;
};

// Leaf slots (tokens only) in document order that the ontology marks
// templatable. Indices refer to a depth-first walk over all slots.
std::vector<std::size_t> templatable_slot_positions(const SemanticFrame& frame, const Ontology& ontology);

// One template per non-empty subset of the golden frame's templatable slots,
// smallest subsets first, then by slot order; at most max_templates.
std::vector<Template> extract_templates(const Bug& bug, const Ontology& ontology, std::size_t max_templates = 5);

// Up to max_expansions examples, each a distinct seeded-random combination of
// gazetteer values; none textually equal to the source utterance. Throws
// ValidationError("MissingGazetteer").
std::vector<TrainingExample> expand_template(const Template& tpl, const Gazetteers& gazetteers,
                                             std::size_t max_expansions = 10, std::uint64_t seed = 0);

enum class ProposalStrategy { ExactMatch, Templated };
enum class ReviewStatus { Pending, Accepted, Rejected };

const char* to_string(ProposalStrategy strategy);
ProposalStrategy proposal_strategy_from_string(std::string_view name);
const char* to_string(ReviewStatus status);
ReviewStatus review_status_from_string(std::string_view name);

inline constexpr int kExactMatchWeight = 5;

struct AugmentationProposal {
    std::string id;
    std::string source_bug_id;
    ProposalStrategy strategy = ProposalStrategy::ExactMatch;
    ReviewStatus review_status = ReviewStatus::Pending;
    std::vector<TrainingExample> examples;
    bool operator==(const AugmentationProposal&) const = default;
};

std::string proposal_id(const std::string& bug_id, ProposalStrategy strategy);

// The bug utterance with its golden frame at weight 5, Pending.
AugmentationProposal exact_match_proposal(const Bug& bug);

struct TemplatedOptions {
    std::size_t max_templates = 5;
    std::size_t max_expansions = 10;
    std::uint64_t seed = 0;
};

// Extract + expand for one bug. Examples whose normalized text already
// appears in `existing` (when given) or earlier in the proposal are dropped.
AugmentationProposal templated_proposal(const Bug& bug, const Ontology& ontology, const Gazetteers& gazetteers,
                                        const TemplatedOptions& options, const TrainingIndex* existing = nullptr);

std::string rule_id_for(std::string_view utterance);

// Throws FrameError(TokenSequenceMismatch) if golden does not cover the
// utterance's tokens.
Rule generate_rule(const std::string& utterance, const SemanticFrame& golden);

enum class TransformOp { RenameIntent, RenameSlot, AddSlotWrap };

const char* to_string(TransformOp op);
TransformOp transform_op_from_string(std::string_view name);

struct TransformScope {
    std::optional<std::string> intent;        // root intent must equal this
    std::optional<std::string> text_contains; // normalized substring of the utterance
};

// RenameIntent / RenameSlot rewrite every from_label node to to_label.
// AddSlotWrap wraps the first bare occurrence of `span` (tokens sitting
// directly under an intent, compared case-insensitively) in a new to_label
// slot; from_label, if set, restricts which intent may hold the span.
struct TransformSpec {
    TransformOp op = TransformOp::RenameSlot;
    std::string from_label;
    std::string to_label;
    std::string span;
    TransformScope scope;
};

struct TransformResult {
    std::vector<TrainingExample> dataset;
    std::size_t change_count = 0;
};

// Throws ValidationError("InvalidTargetLabel") if to_label is not in the
// ontology for the op's label kind.
TransformResult apply_transform(const std::vector<TrainingExample>& dataset, const TransformSpec& spec,
                                const Ontology& ontology);

} // namespace nlufix
