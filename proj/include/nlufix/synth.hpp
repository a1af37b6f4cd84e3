#pragma once

// Synthetic task-oriented corpus with ground truth: an ontology, value
// catalogs with controllable coverage, training data with planted label
// noise, logged traffic from a simulated production parser, and stale rules.
//
// Every carrier phrase is a bracketed frame with `$` placeholders that are
// filled from the enclosing slot's value universe. Each intent has "seen"
// carriers (used for training) and "unseen" ones (never trained on).

#include "nlufix/correction.hpp"
#include "nlufix/detection.hpp"
#include "nlufix/frames.hpp"
#include "nlufix/random.hpp"
#include "nlufix/rules.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nlufix {

struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t train_size = 3000;
    std::size_t validation_size = 500;
    std::size_t test_size = 500;
    std::size_t pool_size = 10000;

    // Share of each templatable value universe present in the catalog.
    double gazetteer_coverage = 0.7;
    // Seen-carrier pool records draw a catalog value with this probability.
    double pool_covered_share = 0.9;
    // Share of pool records that use an unseen carrier.
    double pool_unseen_share = 0.05;
    // Share of pool records repeating a training utterance verbatim.
    double pool_train_overlap = 0.15;
    // Share of validation/test records from unseen carriers.
    double eval_unseen_share = 0.25;

    // Training texts that get an extra, heavier copy with a wrong frame.
    double label_noise = 0.02;
    // Logged predictions replaced by a corrupted frame at a random confidence.
    double prediction_noise = 0.03;

    std::size_t rule_count = 40;
    double rule_conflict_share = 0.5;

    // Final dialog act: Error with these probabilities, else Inform (or
    // Other at other_act_rate for correct predictions).
    double fail_if_bug = 0.7;
    double fail_if_correct = 0.05;
    double other_act_rate = 0.03;

    Timestamp window_start = 1630454400; // 2021-09-01
    Timestamp window_length = 7 * 86400;
};

void check_config(const SynthConfig& config);

enum class CarrierSet { Seen, Unseen };
enum class ValueDraw { Uniform, Covered, Uncovered };

struct Carrier {
    std::string intent;
    std::string pattern; // bracketed frame with `$` placeholders
    bool unseen = false;
};

class CorpusGenerator {
public:
    explicit CorpusGenerator(const SynthConfig& config);

    const Ontology& ontology() const { return ontology_; }
    // Coverage-limited catalog, what the tools get to see.
    const Gazetteers& gazetteers() const { return catalog_; }
    const std::vector<Carrier>& carriers() const { return carriers_; }
    // Full value universe per gazetteer id or closed slot label.
    const std::map<std::string, std::vector<std::string>>& universe() const { return universe_; }

    // A fresh example from one carrier set. ValueDraw applies to templatable
    // slots only; closed-class slots draw uniformly.
    TrainingExample draw(Rng& rng, CarrierSet set, ValueDraw values) const;
    TrainingExample fill(const Carrier& carrier, Rng& rng, ValueDraw values) const;

private:
    std::string value_for(const std::string& slot, Rng& rng, ValueDraw values) const;

    Ontology ontology_;
    Gazetteers catalog_;
    std::vector<Carrier> carriers_;
    std::vector<std::size_t> seen_, unseen_;
    std::map<std::string, std::vector<std::string>> universe_;
    std::map<std::string, std::vector<std::string>> covered_, uncovered_;
};

// A frame differing from `frame` over the same tokens: a slot unwrapped or
// the root intent swapped.
SemanticFrame corrupt_frame(const SemanticFrame& frame, const Ontology& ontology, Rng& rng);

struct SynthCorpus {
    Ontology ontology;
    Gazetteers gazetteers;
    std::vector<TrainingExample> train; // clean examples followed by planted noise
    std::size_t clean_train_size = 0;
    std::vector<TrainingExample> validation;
    std::vector<TrainingExample> test;
    std::vector<LoggedRequest> pool;
    std::vector<SemanticFrame> pool_golden; // parallel to pool
    std::vector<bool> pool_unseen;          // parallel to pool
    RuleStore rules;
};

SynthCorpus generate_corpus(const SynthConfig& config);

} // namespace nlufix
