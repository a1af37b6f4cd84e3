#pragma once

// Root-cause attribution for graded bugs. Checks run in a fixed order and the
// first hit wins: rule mismatch, mislabel, low training data, unknown.

#include "nlufix/bug.hpp"
#include "nlufix/rules.hpp"
#include "nlufix/text.hpp"

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace nlufix {

struct AttributionConfig {
    // Minimum logged confidence for the mislabel check.
    double lambda = 0.9;
    Normalization normalization = Normalization::FoldCaseAndWhitespace;
};

void check_config(const AttributionConfig& config);

// Normalized utterance -> training examples with that text.
class TrainingIndex {
public:
    explicit TrainingIndex(Normalization mode = Normalization::FoldCaseAndWhitespace) : mode_(mode) {}

    void insert(const TrainingExample& example);

    // Every example whose normalized text equals normalize(utterance), in
    // insertion order.
    std::span<const TrainingExample> lookup(std::string_view utterance) const;
    bool contains(std::string_view utterance) const { return !lookup(utterance).empty(); }

    Normalization normalization() const { return mode_; }
    std::size_t bucket_count() const { return buckets_.size(); }
    std::size_t size() const { return size_; }

    // Keys whose bucket holds more than one distinct annotation, sorted.
    std::vector<std::string> conflicting_keys() const;

    // Keys in sorted order.
    const std::vector<std::string>& keys() const;

private:
    Normalization mode_;
    std::unordered_map<std::string, std::vector<TrainingExample>> buckets_;
    std::size_t size_ = 0;
    mutable std::vector<std::string> sorted_keys_;
    mutable bool keys_dirty_ = false;
};

struct IndexWarning {
    std::string key;
    std::size_t distinct_annotations = 0;
};

// Same-text examples with different frames are reported as warnings, not
// errors; they are exactly what the mislabel check looks for.
TrainingIndex build_training_index(std::span<const TrainingExample> dataset, const AttributionConfig& config,
                                   std::vector<IndexWarning>* warnings = nullptr);

// Requires bug.golden.
ErrorAttribution attribute(const Bug& bug, const TrainingIndex& index, const RuleStore& rules,
                           const AttributionConfig& config);

} // namespace nlufix
