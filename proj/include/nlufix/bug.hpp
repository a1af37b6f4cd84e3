#pragma once

// A graded failure and its fix lifecycle.
//
//   Detected -> Graded -> Attributed -> FixProposed -> FixApplied -> Verified
//                              ^                            |           |
//                              +-------- Recurred <---------+-----------+

#include "nlufix/frames.hpp"
#include "nlufix/timeutil.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nlufix {

enum class AttributionCategory { RuleMismatch, Mislabeled, LowTrainingData, Unknown };
enum class CorrectionKind { FixRule, FixAnnotationConflicts, GenerateData, GenerateRule };

const char* to_string(AttributionCategory category);
AttributionCategory attribution_category_from_string(std::string_view name);
const char* to_string(CorrectionKind kind);

// One correction per category.
CorrectionKind correction_for(AttributionCategory category);

// A rule fired on the utterance and disagrees with the golden frame.
struct RuleConflict {
    std::string rule_id;
    SemanticFrame rule_frame;
    bool operator==(const RuleConflict&) const = default;
};

// Exact training matches whose annotation disagrees with the golden frame.
struct LabelConflict {
    std::vector<TrainingExample> conflicts;
    std::size_t agreeing = 0;
    double confidence = 0.0;
    bool operator==(const LabelConflict&) const = default;
};

// Lookup that missed, with the closest training utterance by token overlap
// for the reviewer. Informational only.
struct NearestMatch {
    std::string lookup_key;
    std::optional<std::string> nearest_utterance;
    double token_overlap = 0.0;
    bool operator==(const NearestMatch&) const = default;
};

using AttributionEvidence = std::variant<std::monostate, RuleConflict, LabelConflict, NearestMatch>;

struct ErrorAttribution {
    AttributionCategory category = AttributionCategory::Unknown;
    AttributionEvidence evidence;
    bool operator==(const ErrorAttribution&) const = default;
};

enum class BugStatus { Detected, Graded, Attributed, FixProposed, FixApplied, Verified, Recurred };

const char* to_string(BugStatus status);
BugStatus bug_status_from_string(std::string_view name);
inline constexpr BugStatus kAllStatuses[] = {BugStatus::Detected,    BugStatus::Graded,     BugStatus::Attributed,
                                            BugStatus::FixProposed, BugStatus::FixApplied, BugStatus::Verified,
                                            BugStatus::Recurred};

bool is_legal_transition(BugStatus from, BugStatus to);

class IllegalTransition : public Error {
public:
    IllegalTransition(BugStatus from, BugStatus to, const std::string& detail = {});
    BugStatus from() const noexcept { return from_; }
    BugStatus to() const noexcept { return to_; }

private:
    BugStatus from_;
    BugStatus to_;
};

struct HistoryEntry {
    Timestamp at = 0;
    BugStatus status = BugStatus::Detected;
    std::string actor;
    bool operator==(const HistoryEntry&) const = default;
};

struct Bug {
    std::string id;
    std::string utterance;
    std::optional<SemanticFrame> golden;
    SemanticFrame predicted;
    std::optional<double> intent_confidence;
    double uncertainty = 1.0;
    std::int64_t frequency = 1;
    Timestamp last_seen = 0;
    std::optional<ErrorAttribution> attribution;
    std::vector<std::string> proposals;
    BugStatus status = BugStatus::Detected;
    std::vector<HistoryEntry> history;

    bool operator==(const Bug&) const = default;
};

// Moves `bug` to `to`, appending a history entry. Entry timestamps never go
// backwards: `at` is clamped to the last entry's time. Throws
// IllegalTransition for an edge outside the state machine, or when the target
// state needs data the bug lacks (golden frame from Graded on, attribution
// from Attributed on).
void apply_transition(Bug& bug, BugStatus to, const std::string& actor, Timestamp at);

} // namespace nlufix
