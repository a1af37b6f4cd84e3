#include "nlufix/rules.hpp"

namespace nlufix {

void RuleStore::add(Rule rule) {
    auto key = normalize_text(rule.utterance, mode_);
    if (rules_.count(key)) throw ValidationError("DuplicateRule", "a rule already exists for '" + rule.utterance + "'");
    rules_.emplace(std::move(key), std::move(rule));
}

void RuleStore::upsert(Rule rule) {
    auto key = normalize_text(rule.utterance, mode_);
    rules_.insert_or_assign(std::move(key), std::move(rule));
}

bool RuleStore::remove(std::string_view utterance) { return rules_.erase(normalize_text(utterance, mode_)) > 0; }

const Rule* RuleStore::find(std::string_view utterance) const {
    auto it = rules_.find(normalize_text(utterance, mode_));
    return it == rules_.end() ? nullptr : &it->second;
}

std::optional<SemanticFrame> RuleStore::fire(std::string_view utterance) const {
    const Rule* rule = find(utterance);
    if (!rule) return std::nullopt;
    const auto tokens = split_whitespace(utterance);
    if (tokens.size() != rule->frame.tokens().size()) return std::nullopt;
    return with_tokens(rule->frame, tokens);
}

std::vector<Rule> RuleStore::rules() const {
    std::vector<Rule> out;
    out.reserve(rules_.size());
    for (const auto& [key, rule] : rules_) out.push_back(rule);
    return out;
}

} // namespace nlufix
