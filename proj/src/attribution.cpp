#include "nlufix/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace nlufix {

void check_config(const AttributionConfig& config) {
    if (!(config.lambda >= 0.0 && config.lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
}

void TrainingIndex::insert(const TrainingExample& example) {
    auto key = normalize_text(example.utterance, mode_);
    auto [it, inserted] = buckets_.try_emplace(std::move(key));
    it->second.push_back(example);
    if (inserted) keys_dirty_ = true;
    ++size_;
}

std::span<const TrainingExample> TrainingIndex::lookup(std::string_view utterance) const {
    auto it = buckets_.find(normalize_text(utterance, mode_));
    if (it == buckets_.end()) return {};
    return it->second;
}

const std::vector<std::string>& TrainingIndex::keys() const {
    if (keys_dirty_ || sorted_keys_.size() != buckets_.size()) {
        sorted_keys_.clear();
        sorted_keys_.reserve(buckets_.size());
        for (const auto& [k, v] : buckets_) sorted_keys_.push_back(k);
        std::sort(sorted_keys_.begin(), sorted_keys_.end());
        keys_dirty_ = false;
    }
    return sorted_keys_;
}

namespace {

std::size_t distinct_annotations(const std::vector<TrainingExample>& bucket) {
    std::vector<const SemanticFrame*> seen;
    for (const auto& ex : bucket) {
        const bool dup = std::any_of(seen.begin(), seen.end(),
                                     [&](const SemanticFrame* f) { return same_annotation(*f, ex.frame); });
        if (!dup) seen.push_back(&ex.frame);
    }
    return seen.size();
}

double token_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

NearestMatch nearest_match(const std::string& key, const TrainingIndex& index) {
    NearestMatch report;
    report.lookup_key = key;
    const auto query = split_whitespace(to_lower_ascii(key));
    for (const auto& k : index.keys()) {
        const double overlap = token_jaccard(query, split_whitespace(to_lower_ascii(k)));
        if (overlap > report.token_overlap) {
            report.token_overlap = overlap;
            report.nearest_utterance = index.lookup(k).front().utterance;
        }
    }
    return report;
}

} // namespace

std::vector<std::string> TrainingIndex::conflicting_keys() const {
    std::vector<std::string> out;
    for (const auto& k : keys()) {
        if (distinct_annotations(buckets_.at(k)) > 1) out.push_back(k);
    }
    return out;
}

TrainingIndex build_training_index(std::span<const TrainingExample> dataset, const AttributionConfig& config,
                                   std::vector<IndexWarning>* warnings) {
    TrainingIndex index(config.normalization);
    for (const auto& ex : dataset) index.insert(ex);
    index.keys(); // settle the sorted key cache before the index is shared
    if (warnings) {
        warnings->clear();
        for (const auto& key : index.conflicting_keys()) {
            const auto bucket = index.lookup(key);
            warnings->push_back({key, distinct_annotations({bucket.begin(), bucket.end()})});
        }
    }
    return index;
}

ErrorAttribution attribute(const Bug& bug, const TrainingIndex& index, const RuleStore& rules,
                           const AttributionConfig& config) {
    if (!bug.golden) throw ValidationError("MissingGolden", "bug " + bug.id + " has no golden frame");
    const SemanticFrame& golden = *bug.golden;

    if (const Rule* rule = rules.find(bug.utterance)) {
        const auto parse = rules.fire(bug.utterance);
        if (!parse || !same_annotation(*parse, golden)) {
            return {AttributionCategory::RuleMismatch, RuleConflict{rule->id, rule->frame}};
        }
    }

    const auto matches = index.lookup(bug.utterance);
    const double confidence =
        bug.intent_confidence && !std::isnan(*bug.intent_confidence) ? *bug.intent_confidence : 0.0;
    if (!matches.empty()) {
        LabelConflict conflict;
        conflict.confidence = confidence;
        for (const auto& ex : matches) {
            if (same_annotation(ex.frame, golden)) {
                ++conflict.agreeing;
            } else {
                conflict.conflicts.push_back(ex);
            }
        }
        if (!conflict.conflicts.empty() && confidence >= config.lambda) {
            return {AttributionCategory::Mislabeled, std::move(conflict)};
        }
        return {AttributionCategory::Unknown, std::monostate{}};
    }

    return {AttributionCategory::LowTrainingData, nearest_match(normalize_text(bug.utterance, index.normalization()), index)};
}

} // namespace nlufix
