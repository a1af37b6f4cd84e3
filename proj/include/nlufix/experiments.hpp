#pragma once

// Seeded experiments over the synthetic corpus. Each report renders both as
// JSON and as aligned text carrying the same fields.

#include "nlufix/codec.hpp"
#include "nlufix/detection.hpp"
#include "nlufix/synth.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nlufix {

struct SamplingExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t pool_size = 10000;
    std::size_t k = 100;
    std::size_t repeats = 5; // each repeat draws a fresh corpus and sampling seed
    std::size_t bins = 10;
    SynthConfig synth;       // seed and pool_size are overridden per repeat
};

struct SamplingRun {
    std::uint64_t seed = 0;
    std::size_t pool_size = 0;
    std::size_t pool_bugs = 0;
    std::size_t pool_failures = 0;
    std::size_t lc_failures = 0;
    std::size_t random_failures = 0;
    std::size_t lc_bugs = 0;
    std::size_t random_bugs = 0;
};

struct SamplingReport {
    SamplingExperimentConfig config;
    std::vector<SamplingRun> runs;
    double mean_lc_failures = 0.0;
    double mean_random_failures = 0.0;
    double failure_ratio = 0.0; // lc / random
    double base_error_rate = 0.0;
    double lc_precision = 0.0;     // bugs in the lc sample / k
    double random_precision = 0.0;
    double precision_lift = 0.0;   // lc_precision / base_error_rate
    double misclassified_above_half = 0.0;
    std::vector<HistogramBin> misclassified_histogram;
    std::vector<HistogramBin> correct_histogram;
};

SamplingReport run_sampling_experiment(const SamplingExperimentConfig& config);
Json to_json(const SamplingReport& report);
std::string to_text(const SamplingReport& report);

struct AugmentExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t seed_bugs = 200;
    std::size_t max_templates = 5;
    std::size_t max_expansions = 10;
    SynthConfig synth; // seed is overridden; gazetteer_coverage applies
};

struct AugmentRow {
    std::string strategy; // Baseline, ExactMatch, Templated
    std::size_t training_size = 0;
    std::size_t added_examples = 0;
    double bugs_accuracy = 0.0;
    double validation_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t fixed_bugs = 0;
};

struct AugmentReport {
    AugmentExperimentConfig config;
    std::size_t seed_bug_count = 0;
    double slot_value_coverage = 0.0; // share of seed-bug templatable values in the catalog
    std::vector<AugmentRow> rows;
    std::vector<AugmentRow> deltas; // each augmented row minus Baseline
};

AugmentReport run_augment_experiment(const AugmentExperimentConfig& config);
Json to_json(const AugmentReport& report);
std::string to_text(const AugmentReport& report);

} // namespace nlufix
