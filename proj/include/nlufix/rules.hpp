#pragma once

// High-precision exact-utterance rules.

#include "nlufix/frames.hpp"
#include "nlufix/text.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nlufix {

struct Rule {
    std::string id;
    std::string utterance;
    SemanticFrame frame;
    bool operator==(const Rule&) const = default;
};

// At most one rule per normalized utterance.
class RuleStore {
public:
    explicit RuleStore(Normalization mode = Normalization::FoldCaseAndWhitespace) : mode_(mode) {}

    // Throws ValidationError("DuplicateRule") if the utterance already has a rule.
    void add(Rule rule);
    // Inserts or replaces the rule for the utterance.
    void upsert(Rule rule);
    bool remove(std::string_view utterance);

    const Rule* find(std::string_view utterance) const;

    // The rule's parse laid over the query's own tokens, if a rule fires.
    std::optional<SemanticFrame> fire(std::string_view utterance) const;

    std::size_t size() const { return rules_.size(); }
    bool empty() const { return rules_.empty(); }
    Normalization normalization() const { return mode_; }

    // Rules ordered by normalized utterance.
    std::vector<Rule> rules() const;

private:
    Normalization mode_;
    std::map<std::string, Rule, std::less<>> rules_;
};

} // namespace nlufix
