#pragma once

// Deterministic desk-scale parser: exact-match memorization, then gazetteer
// templates mined from training, then an intent prior over the whole
// utterance. Each backoff level reports a fixed confidence.

#include "nlufix/correction.hpp"
#include "nlufix/frames.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace nlufix {

struct ConfidenceTiers {
    double exact = 0.99;
    double templated = 0.7;
    double fallback = 0.2;
    bool operator==(const ConfidenceTiers&) const = default;
};

enum class PredictionSource { Exact, Template, Fallback };
const char* to_string(PredictionSource source);

struct Prediction {
    SemanticFrame frame;
    double intent_confidence = 0.0;
    PredictionSource source = PredictionSource::Fallback;
};

// A training frame with some leaf slots generalized to gazetteer matchers.
struct BankTemplate {
    SemanticFrame frame; // tokens lowercased
    std::vector<std::size_t> slot_positions; // document-order slot indices
    std::vector<std::string> slot_gazetteers; // parallel to slot_positions
    bool operator==(const BankTemplate&) const = default;
};

class ReferenceModel {
public:
    Prediction predict(std::string_view utterance) const;

    const std::map<std::string, SemanticFrame>& exact_table() const { return exact_; }
    const std::vector<BankTemplate>& template_bank() const { return bank_; }
    const std::string& intent_prior() const { return prior_; }
    const ConfidenceTiers& tiers() const { return tiers_; }

    // Single JSON document; key order is deterministic.
    std::string dump() const;
    static ReferenceModel load(std::string_view json);

    bool operator==(const ReferenceModel& other) const { return dump() == other.dump(); }

private:
    friend ReferenceModel train(const std::vector<TrainingExample>&, const Gazetteers&, const Ontology&);

    struct Element {
        std::string literal;
        int matcher = -1; // index into the template's slot list, or -1 for a literal
    };
    struct Compiled {
        std::vector<Element> elements;
        std::size_t literal_count = 0;
    };

    void compile();
    std::optional<SemanticFrame> match(const BankTemplate& tpl, const Compiled& compiled,
                                       const std::vector<std::string>& query) const;

    std::map<std::string, SemanticFrame> exact_;
    std::vector<BankTemplate> bank_;
    std::string prior_;
    ConfidenceTiers tiers_;
    std::map<std::string, std::vector<std::vector<std::string>>> gazetteers_; // lowercased

    // Derived on compile().
    std::vector<Compiled> compiled_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_first_literal_;
    std::vector<std::size_t> matcher_first_;
    // gazetteer id -> first token -> values sorted longest first
    std::unordered_map<std::string, std::unordered_map<std::string, std::vector<std::size_t>>> lookup_;
};

// Throws ValidationError("EmptyDataset").
ReferenceModel train(const std::vector<TrainingExample>& dataset, const Gazetteers& gazetteers, const Ontology& ontology);

} // namespace nlufix
