#include "nlufix/experiments.hpp"

#include "nlufix/attribution.hpp"
#include "nlufix/correction.hpp"
#include "nlufix/refmodel.hpp"
#include "nlufix/text.hpp"

#include <cstdio>
#include <map>
#include <unordered_set>

namespace nlufix {

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

double ratio(double a, double b) { return b > 0.0 ? a / b : 0.0; }

Json histogram_json(const std::vector<HistogramBin>& bins) {
    Json j = Json::array();
    for (const auto& b : bins) j.push_back(to_json(b));
    return j;
}

} // namespace

SamplingReport run_sampling_experiment(const SamplingExperimentConfig& config) {
    if (config.repeats == 0) throw ConfigError("repeats must be positive");
    if (config.k == 0 || config.k > config.pool_size) throw ConfigError("k must lie in [1, pool_size]");
    SamplingReport report;
    report.config = config;

    std::vector<double> mis_scores, ok_scores;
    std::size_t total_pool = 0, total_bugs = 0, mis_above = 0;
    std::size_t lc_bugs = 0, random_bugs = 0, lc_fail = 0, random_fail = 0;

    for (std::size_t rep = 0; rep < config.repeats; ++rep) {
        const std::uint64_t seed = derive_seed(config.seed, rep);
        SynthConfig synth = config.synth;
        synth.seed = seed;
        synth.pool_size = config.pool_size;
        const SynthCorpus corpus = generate_corpus(synth);

        std::map<std::string, std::size_t> row_of;
        std::vector<bool> wrong(corpus.pool.size());
        SamplingRun run;
        run.seed = seed;
        run.pool_size = corpus.pool.size();
        for (std::size_t i = 0; i < corpus.pool.size(); ++i) {
            const auto& r = corpus.pool[i];
            row_of[r.id] = i;
            wrong[i] = is_bug(corpus.pool_golden[i], r.predicted_frame, corpus.ontology);
            const double score = uncertainty_score(r);
            if (wrong[i]) {
                ++run.pool_bugs;
                mis_scores.push_back(score);
                if (score > 0.5) ++mis_above;
            } else {
                ok_scores.push_back(score);
            }
            if (!task_success_proxy(r)) ++run.pool_failures;
        }

        auto tally = [&](SamplingStrategy strategy, std::size_t& failures, std::size_t& bugs) {
            SamplingConfig sc;
            sc.k = config.k;
            sc.strategy = strategy;
            sc.seed = seed;
            for (const auto& r : sample_candidates(corpus.pool, sc)) {
                if (!task_success_proxy(r)) ++failures;
                if (wrong[row_of.at(r.id)]) ++bugs;
            }
        };
        tally(SamplingStrategy::LeastConfidence, run.lc_failures, run.lc_bugs);
        tally(SamplingStrategy::Random, run.random_failures, run.random_bugs);

        total_pool += run.pool_size;
        total_bugs += run.pool_bugs;
        lc_fail += run.lc_failures;
        random_fail += run.random_failures;
        lc_bugs += run.lc_bugs;
        random_bugs += run.random_bugs;
        report.runs.push_back(run);
    }

    const double reps = static_cast<double>(config.repeats);
    const double drawn = reps * static_cast<double>(config.k);
    report.mean_lc_failures = static_cast<double>(lc_fail) / reps;
    report.mean_random_failures = static_cast<double>(random_fail) / reps;
    report.failure_ratio = ratio(static_cast<double>(lc_fail), static_cast<double>(random_fail));
    report.base_error_rate = ratio(static_cast<double>(total_bugs), static_cast<double>(total_pool));
    report.lc_precision = static_cast<double>(lc_bugs) / drawn;
    report.random_precision = static_cast<double>(random_bugs) / drawn;
    report.precision_lift = ratio(report.lc_precision, report.base_error_rate);
    report.misclassified_above_half = ratio(static_cast<double>(mis_above), static_cast<double>(mis_scores.size()));
    report.misclassified_histogram = score_histogram(mis_scores, config.bins);
    report.correct_histogram = score_histogram(ok_scores, config.bins);
    return report;
}

Json to_json(const SamplingReport& r) {
    Json j;
    j["experiment"] = "sampling";
    j["seed"] = r.config.seed;
    j["pool_size"] = r.config.pool_size;
    j["k"] = r.config.k;
    j["repeats"] = r.config.repeats;
    Json runs = Json::array();
    for (const auto& run : r.runs) {
        runs.push_back({{"seed", run.seed},
                        {"pool_size", run.pool_size},
                        {"pool_bugs", run.pool_bugs},
                        {"pool_failures", run.pool_failures},
                        {"lc_failures", run.lc_failures},
                        {"random_failures", run.random_failures},
                        {"lc_bugs", run.lc_bugs},
                        {"random_bugs", run.random_bugs}});
    }
    j["runs"] = runs;
    j["mean_lc_failures"] = r.mean_lc_failures;
    j["mean_random_failures"] = r.mean_random_failures;
    j["failure_ratio"] = r.failure_ratio;
    j["base_error_rate"] = r.base_error_rate;
    j["lc_precision"] = r.lc_precision;
    j["random_precision"] = r.random_precision;
    j["precision_lift"] = r.precision_lift;
    j["misclassified_above_half"] = r.misclassified_above_half;
    j["misclassified_histogram"] = histogram_json(r.misclassified_histogram);
    j["correct_histogram"] = histogram_json(r.correct_histogram);
    return j;
}

std::string to_text(const SamplingReport& r) {
    std::string out;
    out += "sampling experiment  seed=" + std::to_string(r.config.seed) + " pool_size=" + std::to_string(r.config.pool_size) +
           " k=" + std::to_string(r.config.k) + " repeats=" + std::to_string(r.config.repeats) + "\n\n";
    out += "seed                  pool_bugs  pool_failures  lc_failures  random_failures  lc_bugs  random_bugs\n";
    for (const auto& run : r.runs) {
        char line[200];
        std::snprintf(line, sizeof line, "%-20llu  %9zu  %13zu  %11zu  %15zu  %7zu  %11zu\n",
                      static_cast<unsigned long long>(run.seed), run.pool_bugs, run.pool_failures, run.lc_failures,
                      run.random_failures, run.lc_bugs, run.random_bugs);
        out += line;
    }
    out += "\n";
    out += "mean_lc_failures          " + fmt("%.4f", r.mean_lc_failures) + "\n";
    out += "mean_random_failures      " + fmt("%.4f", r.mean_random_failures) + "\n";
    out += "failure_ratio             " + fmt("%.4f", r.failure_ratio) + "\n";
    out += "base_error_rate           " + fmt("%.4f", r.base_error_rate) + "\n";
    out += "lc_precision              " + fmt("%.4f", r.lc_precision) + "\n";
    out += "random_precision          " + fmt("%.4f", r.random_precision) + "\n";
    out += "precision_lift            " + fmt("%.4f", r.precision_lift) + "\n";
    out += "misclassified_above_half  " + fmt("%.4f", r.misclassified_above_half) + "\n\n";
    out += "uncertainty histogram     misclassified  correct\n";
    for (std::size_t i = 0; i < r.misclassified_histogram.size(); ++i) {
        char line[120];
        std::snprintf(line, sizeof line, "  [%.2f, %.2f%c  %13zu  %7zu\n", r.misclassified_histogram[i].lo,
                      r.misclassified_histogram[i].hi, i + 1 == r.misclassified_histogram.size() ? ']' : ')',
                      r.misclassified_histogram[i].count, r.correct_histogram[i].count);
        out += line;
    }
    return out;
}

// --- augmentation --------------------------------------------------------

namespace {

double accuracy(const ReferenceModel& model, const std::vector<TrainingExample>& set, const Ontology& ontology,
                std::size_t* correct_out = nullptr) {
    std::size_t correct = 0;
    for (const auto& ex : set)
        if (!is_bug(ex.frame, model.predict(ex.utterance).frame, ontology)) ++correct;
    if (correct_out) *correct_out = correct;
    return set.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(set.size());
}

} // namespace

AugmentReport run_augment_experiment(const AugmentExperimentConfig& config) {
    if (config.seed_bugs == 0) throw ConfigError("seed_bugs must be positive");
    AugmentReport report;
    report.config = config;

    SynthConfig synth = config.synth;
    synth.seed = config.seed;
    synth.pool_size = 0;
    const SynthCorpus corpus = generate_corpus(synth);
    const Ontology& ont = corpus.ontology;
    const ReferenceModel baseline = train(corpus.train, corpus.gazetteers, ont);

    const AttributionConfig attr_config;
    const TrainingIndex index = build_training_index(corpus.train, attr_config);

    // Seed bugs: fresh unseen-carrier utterances the baseline gets wrong and
    // attribution files under LowTrainingData.
    std::unordered_set<std::string> taken;
    auto key = [](const std::string& s) { return normalize_text(s, Normalization::FoldCaseAndWhitespace); };
    for (const auto* set : {&corpus.train, &corpus.validation, &corpus.test})
        for (const auto& ex : *set) taken.insert(key(ex.utterance));

    CorpusGenerator gen(synth);
    Rng rng(derive_seed(config.seed, fnv1a64("seed-bugs")));
    std::vector<Bug> bugs;
    std::vector<TrainingExample> bug_set;
    std::size_t attempts = 0;
    while (bugs.size() < config.seed_bugs) {
        if (++attempts > config.seed_bugs * 1000) throw ConfigError("could not draw enough seed bugs");
        TrainingExample ex = gen.draw(rng, CarrierSet::Unseen, ValueDraw::Uniform);
        if (!taken.insert(key(ex.utterance)).second) continue;
        const Prediction p = baseline.predict(ex.utterance);
        if (!is_bug(ex.frame, p.frame, ont)) continue;
        Bug bug;
        bug.id = "seed-" + std::to_string(bugs.size() + 1);
        bug.utterance = ex.utterance;
        bug.golden = ex.frame;
        bug.predicted = p.frame;
        bug.intent_confidence = p.intent_confidence;
        bug.uncertainty = 1.0 - p.intent_confidence;
        if (attribute(bug, index, corpus.rules, attr_config).category != AttributionCategory::LowTrainingData) continue;
        bugs.push_back(std::move(bug));
        bug_set.push_back(std::move(ex));
    }
    report.seed_bug_count = bugs.size();

    std::size_t values = 0, covered = 0;
    for (const auto& bug : bugs) {
        const auto positions = templatable_slot_positions(*bug.golden, ont);
        visit_slots(bug.golden->children, [&](const FrameNode& slot, std::size_t i) {
            if (std::find(positions.begin(), positions.end(), i) == positions.end()) return;
            std::vector<std::string> tokens;
            for (const auto& c : slot.children) tokens.push_back(c.value);
            const auto& gaz = corpus.gazetteers.values(*ont.template_gazetteer(slot.value));
            ++values;
            if (std::find(gaz.begin(), gaz.end(), tokens) != gaz.end()) ++covered;
        });
    }
    report.slot_value_coverage = ratio(static_cast<double>(covered), static_cast<double>(values));

    auto evaluate = [&](const std::string& name, const std::vector<TrainingExample>& added) {
        std::vector<TrainingExample> data = corpus.train;
        data.insert(data.end(), added.begin(), added.end());
        const ReferenceModel model = name == "Baseline" ? baseline : train(data, corpus.gazetteers, ont);
        AugmentRow row;
        row.strategy = name;
        row.training_size = data.size();
        row.added_examples = added.size();
        row.bugs_accuracy = accuracy(model, bug_set, ont, &row.fixed_bugs);
        row.validation_accuracy = accuracy(model, corpus.validation, ont);
        row.test_accuracy = accuracy(model, corpus.test, ont);
        report.rows.push_back(row);
    };

    evaluate("Baseline", {});

    std::vector<TrainingExample> exact;
    for (const auto& bug : bugs)
        for (auto& ex : exact_match_proposal(bug).examples) exact.push_back(std::move(ex));
    evaluate("ExactMatch", exact);

    std::vector<TrainingExample> templated;
    TemplatedOptions opts{config.max_templates, config.max_expansions, derive_seed(config.seed, fnv1a64("templated"))};
    for (const auto& bug : bugs)
        for (auto& ex : templated_proposal(bug, ont, corpus.gazetteers, opts, &index).examples) templated.push_back(std::move(ex));
    evaluate("Templated", templated);

    const AugmentRow& base = report.rows.front();
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        AugmentRow d = report.rows[i];
        d.strategy = "delta " + d.strategy;
        d.training_size -= base.training_size;
        d.bugs_accuracy -= base.bugs_accuracy;
        d.validation_accuracy -= base.validation_accuracy;
        d.test_accuracy -= base.test_accuracy;
        d.fixed_bugs -= base.fixed_bugs;
        report.deltas.push_back(d);
    }
    return report;
}

namespace {

Json row_json(const AugmentRow& r) {
    return {{"strategy", r.strategy},
            {"training_size", r.training_size},
            {"added_examples", r.added_examples},
            {"bugs_accuracy", r.bugs_accuracy},
            {"validation_accuracy", r.validation_accuracy},
            {"test_accuracy", r.test_accuracy},
            {"fixed_bugs", r.fixed_bugs}};
}

} // namespace

Json to_json(const AugmentReport& r) {
    Json j;
    j["experiment"] = "augment";
    j["seed"] = r.config.seed;
    j["seed_bug_count"] = r.seed_bug_count;
    j["max_templates"] = r.config.max_templates;
    j["max_expansions"] = r.config.max_expansions;
    j["gazetteer_coverage"] = r.config.synth.gazetteer_coverage;
    j["slot_value_coverage"] = r.slot_value_coverage;
    Json rows = Json::array(), deltas = Json::array();
    for (const auto& row : r.rows) rows.push_back(row_json(row));
    for (const auto& row : r.deltas) deltas.push_back(row_json(row));
    j["rows"] = rows;
    j["deltas"] = deltas;
    return j;
}

std::string to_text(const AugmentReport& r) {
    std::string out;
    out += "augment experiment  seed=" + std::to_string(r.config.seed) + " seed_bug_count=" +
           std::to_string(r.seed_bug_count) + " max_templates=" + std::to_string(r.config.max_templates) +
           " max_expansions=" + std::to_string(r.config.max_expansions) + "\n";
    out += "gazetteer_coverage=" + fmt("%.4f", r.config.synth.gazetteer_coverage) +
           " slot_value_coverage=" + fmt("%.4f", r.slot_value_coverage) + "\n\n";
    out += "strategy            training_size  added_examples  bugs_accuracy  validation_accuracy  test_accuracy  fixed_bugs\n";
    auto line = [&](const AugmentRow& row) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "%-18s  %13zu  %14zu  %13.4f  %19.4f  %13.4f  %10zu\n", row.strategy.c_str(),
                      row.training_size, row.added_examples, row.bugs_accuracy, row.validation_accuracy,
                      row.test_accuracy, row.fixed_bugs);
        out += buf;
    };
    for (const auto& row : r.rows) line(row);
    for (const auto& row : r.deltas) line(row);
    return out;
}

} // namespace nlufix
