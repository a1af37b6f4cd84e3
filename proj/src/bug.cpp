#include "nlufix/bug.hpp"

namespace nlufix {

const char* to_string(AttributionCategory category) {
    switch (category) {
    case AttributionCategory::RuleMismatch: return "RuleMismatch";
    case AttributionCategory::Mislabeled: return "Mislabeled";
    case AttributionCategory::LowTrainingData: return "LowTrainingData";
    case AttributionCategory::Unknown: return "Unknown";
    }
    return "Unknown";
}

AttributionCategory attribution_category_from_string(std::string_view name) {
    for (auto c : {AttributionCategory::RuleMismatch, AttributionCategory::Mislabeled, AttributionCategory::LowTrainingData,
                   AttributionCategory::Unknown}) {
        if (name == to_string(c)) return c;
    }
    throw ValidationError("UnknownCategory", "unknown attribution category '" + std::string(name) + "'");
}

const char* to_string(CorrectionKind kind) {
    switch (kind) {
    case CorrectionKind::FixRule: return "FixRule";
    case CorrectionKind::FixAnnotationConflicts: return "FixAnnotationConflicts";
    case CorrectionKind::GenerateData: return "GenerateData";
    case CorrectionKind::GenerateRule: return "GenerateRule";
    }
    return "GenerateRule";
}

CorrectionKind correction_for(AttributionCategory category) {
    switch (category) {
    case AttributionCategory::RuleMismatch: return CorrectionKind::FixRule;
    case AttributionCategory::Mislabeled: return CorrectionKind::FixAnnotationConflicts;
    case AttributionCategory::LowTrainingData: return CorrectionKind::GenerateData;
    case AttributionCategory::Unknown: return CorrectionKind::GenerateRule;
    }
    return CorrectionKind::GenerateRule;
}

const char* to_string(BugStatus status) {
    switch (status) {
    case BugStatus::Detected: return "Detected";
    case BugStatus::Graded: return "Graded";
    case BugStatus::Attributed: return "Attributed";
    case BugStatus::FixProposed: return "FixProposed";
    case BugStatus::FixApplied: return "FixApplied";
    case BugStatus::Verified: return "Verified";
    case BugStatus::Recurred: return "Recurred";
    }
    return "Detected";
}

BugStatus bug_status_from_string(std::string_view name) {
    for (auto s : kAllStatuses) {
        if (name == to_string(s)) return s;
    }
    throw ValidationError("UnknownStatus", "unknown bug status '" + std::string(name) + "'");
}

bool is_legal_transition(BugStatus from, BugStatus to) {
    using S = BugStatus;
    switch (from) {
    case S::Detected: return to == S::Graded;
    case S::Graded: return to == S::Attributed;
    case S::Attributed: return to == S::FixProposed;
    case S::FixProposed: return to == S::FixApplied;
    case S::FixApplied: return to == S::Verified || to == S::Recurred;
    case S::Verified: return to == S::Recurred;
    case S::Recurred: return to == S::Attributed;
    }
    return false;
}

IllegalTransition::IllegalTransition(BugStatus from, BugStatus to, const std::string& detail)
    : Error("IllegalTransition", std::string("illegal transition ") + to_string(from) + " -> " + to_string(to) +
                                     (detail.empty() ? "" : ": " + detail)),
      from_(from), to_(to) {}

void apply_transition(Bug& bug, BugStatus to, const std::string& actor, Timestamp at) {
    if (!is_legal_transition(bug.status, to)) throw IllegalTransition(bug.status, to);
    if (to != BugStatus::Detected && !bug.golden) throw IllegalTransition(bug.status, to, "golden frame required");
    if (to == BugStatus::Attributed && !bug.attribution) throw IllegalTransition(bug.status, to, "attribution required");
    if (!bug.history.empty() && at < bug.history.back().at) at = bug.history.back().at;
    bug.status = to;
    bug.history.push_back({at, to, actor});
}

} // namespace nlufix
