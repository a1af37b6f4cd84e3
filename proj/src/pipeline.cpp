#include "nlufix/pipeline.hpp"

#include "nlufix/refmodel.hpp"
#include "nlufix/text.hpp"

namespace nlufix {

namespace fs = std::filesystem;

void write_corpus_store(const fs::path& root, const SynthCorpus& corpus) {
    Store store = Store::create(root, corpus.ontology);
    write_file_atomic(root / "gazetteers" / "catalog.json", to_json(corpus.gazetteers).dump(2) + "\n");
    emit_dataset(root / "train" / "base.jsonl", corpus.train);
    emit_pool(root / "pool" / "logged.jsonl", corpus.pool);
    emit_rules(root / "rules" / "rules.jsonl", corpus.rules);
    std::vector<TrainingExample> goldens;
    for (std::size_t i = 0; i < corpus.pool.size(); ++i)
        goldens.push_back({corpus.pool[i].utterance, corpus.pool_golden[i], 1});
    emit_dataset(root / "oracle" / "goldens.jsonl", goldens);
    emit_dataset(root / "eval" / "validation.jsonl", corpus.validation);
    emit_dataset(root / "eval" / "test.jsonl", corpus.test);
}

std::map<std::string, SemanticFrame> load_goldens(const fs::path& path) {
    std::map<std::string, SemanticFrame> out;
    for (auto& ex : ingest_dataset(path).records)
        out[normalize_text(ex.utterance, Normalization::FoldCaseAndWhitespace)] = std::move(ex.frame);
    return out;
}

namespace {

const SemanticFrame* golden_for(const std::map<std::string, SemanticFrame>& goldens, const std::string& utterance) {
    auto it = goldens.find(normalize_text(utterance, Normalization::FoldCaseAndWhitespace));
    return it == goldens.end() ? nullptr : &it->second;
}

} // namespace

PipelineReport run_pipeline(Store& store, const std::map<std::string, SemanticFrame>& goldens,
                            const PipelineConfig& config) {
    PipelineReport report;
    const Ontology& ont = store.ontology();
    const Timestamp at = config.at;
    Ledger& ledger = store.ledger();
    report.training_before = store.training_size();

    const auto pool = dedup_pool(store.pool());
    std::size_t graded = 0, correct = 0;
    for (const auto& r : pool) {
        const SemanticFrame* g = golden_for(goldens, r.utterance);
        if (!g) continue;
        ++graded;
        if (!is_bug(with_tokens(*g, r.predicted_frame.tokens()), r.predicted_frame, ont)) ++correct;
    }
    report.pool_accuracy_before = graded ? static_cast<double>(correct) / static_cast<double>(graded) : 0.0;

    SamplingConfig sc;
    sc.k = std::min(config.k, pool.size());
    sc.strategy = SamplingStrategy::LeastConfidence;
    sc.seed = config.seed;
    std::vector<std::string> ids;
    for (const auto& r : sample_candidates(pool, sc)) {
        ++report.sampled;
        const SemanticFrame* g = golden_for(goldens, r.utterance);
        if (!g) {
            ++report.ungraded;
            continue;
        }
        const SemanticFrame golden = with_tokens(*g, r.predicted_frame.tokens());
        if (!is_bug(golden, r.predicted_frame, ont)) {
            ++report.sampled_correct;
            continue;
        }
        const Bug& bug = ledger.detect(r, config.actor, at);
        ledger.grade(bug.id, golden, config.actor, at);
        ids.push_back(bug.id);
    }
    report.bugs = ids.size();

    {
        const auto training = store.training();
        const TrainingIndex index = build_training_index(training, config.attribution);
        for (const auto& id : ids) {
            ErrorAttribution a = attribute(ledger.get(id), index, store.rules(), config.attribution);
            ++report.categories[to_string(a.category)];
            ledger.record_attribution(id, std::move(a), config.actor, at);
        }
    }

    const auto training = store.training();
    const TrainingIndex index = build_training_index(training, config.attribution);
    for (const auto& id : ids) {
        const Bug bug = ledger.get(id);
        switch (correction_for(bug.attribution->category)) {
        case CorrectionKind::GenerateData: {
            AugmentationProposal p = config.data_strategy == ProposalStrategy::ExactMatch
                                         ? exact_match_proposal(bug)
                                         : templated_proposal(bug, ont, store.gazetteers(), config.templated, &index);
            const std::string pid = p.id;
            store.put_proposal(std::move(p));
            ledger.add_proposal(id, pid, config.actor, at);
            store.review_proposal(pid, true);
            ledger.transition(id, BugStatus::FixApplied, config.actor, at);
            ++report.proposals;
            break;
        }
        case CorrectionKind::FixAnnotationConflicts:
            report.relabeled += store.relabel(bug.utterance, *bug.golden);
            ledger.transition(id, BugStatus::FixProposed, config.actor, at);
            ledger.transition(id, BugStatus::FixApplied, config.actor, at);
            break;
        case CorrectionKind::FixRule:
        case CorrectionKind::GenerateRule:
            store.rules().upsert(generate_rule(bug.utterance, *bug.golden));
            ++report.rules_written;
            ledger.transition(id, BugStatus::FixProposed, config.actor, at);
            ledger.transition(id, BugStatus::FixApplied, config.actor, at);
            break;
        }
    }

    const ReferenceModel model = train(store.training(), store.gazetteers(), ont);
    store.save_model(model);
    report.training_after = store.training_size();

    graded = correct = 0;
    for (const auto& r : pool) {
        const SemanticFrame* g = golden_for(goldens, r.utterance);
        if (!g) continue;
        ++graded;
        const SemanticFrame parse = runtime_parse(r.utterance, model, store.rules());
        if (!is_bug(with_tokens(*g, parse.tokens()), parse, ont)) ++correct;
    }
    report.pool_accuracy_after = graded ? static_cast<double>(correct) / static_cast<double>(graded) : 0.0;

    const VerifyResult v = verify_fixes(ledger, model, store.rules(), ont, config.actor, at);
    report.verified = v.verified;
    report.unverified = v.unverified;
    report.ledger = ledger.report();
    store.save();
    return report;
}

Json to_json(const LedgerSnapshot& snap) {
    Json j;
    j["total_bugs"] = snap.total_bugs;
    Json counts = Json::object();
    for (const auto& [status, n] : snap.status_counts) counts[to_string(status)] = n;
    j["status_counts"] = counts;
    j["fixes"] = snap.fixes;
    j["fixes_by_day"] = snap.fixes_by_day;
    Json rec = Json::array();
    for (const auto& r : snap.recurrences) rec.push_back({{"bug_id", r.bug_id}, {"at", format_iso8601(r.at)}});
    j["recurrences"] = rec;
    return j;
}

Json to_json(const PipelineReport& r) {
    Json j;
    j["sampled"] = r.sampled;
    j["ungraded"] = r.ungraded;
    j["sampled_correct"] = r.sampled_correct;
    j["bugs"] = r.bugs;
    j["categories"] = r.categories;
    j["proposals"] = r.proposals;
    j["rules_written"] = r.rules_written;
    j["relabeled"] = r.relabeled;
    j["training_before"] = r.training_before;
    j["training_after"] = r.training_after;
    j["pool_accuracy_before"] = r.pool_accuracy_before;
    j["pool_accuracy_after"] = r.pool_accuracy_after;
    j["verified"] = r.verified;
    j["unverified"] = r.unverified;
    j["ledger"] = to_json(r.ledger);
    return j;
}

} // namespace nlufix
