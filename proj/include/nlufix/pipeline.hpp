#pragma once

// One pass of the improvement loop over a store: sample, grade against an
// oracle, attribute, fix, retrain, verify.

#include "nlufix/attribution.hpp"
#include "nlufix/codec.hpp"
#include "nlufix/correction.hpp"
#include "nlufix/store.hpp"
#include "nlufix/synth.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace nlufix {

// Writes a synthetic corpus as a store, plus oracle/goldens.jsonl (the
// simulated grader) and eval/{validation,test}.jsonl.
void write_corpus_store(const std::filesystem::path& root, const SynthCorpus& corpus);

// Normalized utterance -> golden frame.
std::map<std::string, SemanticFrame> load_goldens(const std::filesystem::path& path);

struct PipelineConfig {
    std::size_t k = 100;
    std::uint64_t seed = 0;
    ProposalStrategy data_strategy = ProposalStrategy::ExactMatch;
    TemplatedOptions templated;
    AttributionConfig attribution;
    std::string actor = "pipeline";
    Timestamp at = 0;
};

struct PipelineReport {
    std::size_t sampled = 0;
    std::size_t ungraded = 0;      // no oracle label
    std::size_t sampled_correct = 0;
    std::size_t bugs = 0;
    std::map<std::string, std::size_t> categories;
    std::size_t proposals = 0;
    std::size_t rules_written = 0;
    std::size_t relabeled = 0;
    std::size_t training_before = 0;
    std::size_t training_after = 0;
    double pool_accuracy_before = 0.0;
    double pool_accuracy_after = 0.0;
    std::vector<std::string> verified;
    std::vector<std::string> unverified;
    LedgerSnapshot ledger;
};

PipelineReport run_pipeline(Store& store, const std::map<std::string, SemanticFrame>& goldens,
                            const PipelineConfig& config);

Json to_json(const PipelineReport& report);
Json to_json(const LedgerSnapshot& snapshot);

} // namespace nlufix
