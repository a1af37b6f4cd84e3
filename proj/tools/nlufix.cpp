// nlufix command-line entry points. Exit codes: 0 success, 1 validation
// error, 2 usage error.

#include "nlufix/attribution.hpp"
#include "nlufix/codec.hpp"
#include "nlufix/correction.hpp"
#include "nlufix/experiments.hpp"
#include "nlufix/pipeline.hpp"
#include "nlufix/refmodel.hpp"
#include "nlufix/service.hpp"
#include "nlufix/store.hpp"
#include "nlufix/synth.hpp"
#include "nlufix/text.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace nlufix;
namespace fs = std::filesystem;

namespace {

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    write_file_atomic(path, content);
}

template <typename T>
std::string jsonl(const std::vector<T>& items) {
    std::string out;
    for (const auto& item : items) out += to_json(item).dump() + "\n";
    return out;
}

std::vector<TrainingExample> load_training(const std::vector<std::string>& paths, const Ontology* ontology) {
    std::vector<TrainingExample> out;
    for (const auto& p : paths) {
        auto records = ingest_dataset(p).records;
        if (ontology)
            for (const auto& ex : records) ontology->validate(ex.frame);
        out.insert(out.end(), records.begin(), records.end());
    }
    return out;
}

Timestamp latest(const std::vector<Bug>& bugs) {
    Timestamp t = 0;
    for (const auto& b : bugs) {
        t = std::max(t, b.last_seen);
        for (const auto& h : b.history) t = std::max(t, h.at);
    }
    return t;
}

Timestamp resolve_at(const std::string& at, Timestamp fallback) { return at.empty() ? fallback : parse_iso8601(at); }

ReportWindow window_from(const std::string& from, const std::string& to) {
    ReportWindow w;
    if (!from.empty()) w.from = parse_iso8601(from);
    if (!to.empty()) w.to = parse_iso8601(to);
    return w;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nlufix: find, triage and fix semantic parser bugs"};
    app.require_subcommand(1);
    std::function<void()> run;

    // Shared option storage; each subcommand binds what it uses. Defaults live
    // here, not in default_val(), which writes the variable when the option is
    // declared and would leak one subcommand's default into another.
    std::string pool_path, out_path, text_path, bugs_path, goldens_path, rules_path, gazetteers_path, ontology_path,
        model_path, proposals_path, transform_path, root, at, actor = "cli", from, to, utterance, in_path,
        bugs_out, normalization = "fold_case_and_whitespace", detect_strategy = "lc", fix_strategy,
        pipe_strategy = "exact", ranking = "uncertainty", host = "127.0.0.1";
    std::vector<std::string> train_paths;
    std::size_t k = 100, pool_size = 0, exp_pool_size = 10000, repeats = 5, bins = 10, seed_bugs = 200, max_templates = 5, max_expansions = 10;
    std::uint64_t seed = 0;
    double lambda = 0.9;
    bool skip_bad = false, auto_accept = false;
    int port = 8080;
    SynthConfig synth;

    // detect
    auto* detect = app.add_subcommand("detect", "Sample logged requests for grading");
    detect->add_option("--pool", pool_path, "Pool JSON-lines file")->required();
    detect->add_option("--k", k, "Sample budget")->required()->check(CLI::PositiveNumber);
    detect->add_option("--strategy", detect_strategy, "random or lc")->capture_default_str();
    detect->add_option("--seed", seed, "Sampling seed");
    detect->add_option("--ranking", ranking, "Output order: uncertainty, frequency or recency");
    detect->add_option("--pool-size", pool_size, "Cap on candidates considered (0 = all)");
    detect->add_option("--out", out_path, "Output bugs JSON-lines (default stdout)");
    detect->add_option("--root", root, "Also register the bugs in this store");
    detect->add_option("--at", at, "Detection time, ISO-8601 (default: latest pool timestamp)");
    detect->add_option("--actor", actor);
    detect->add_flag("--skip-bad-lines", skip_bad, "Skip invalid pool lines instead of failing");
    detect->callback([&] {
        run = [&] {
            auto pool = ingest_pool(pool_path, {skip_bad});
            for (const auto& e : pool.skipped) std::cerr << "skipped: " << e.what() << "\n";
            SamplingConfig sc;
            sc.k = k;
            sc.pool_size = exp_pool_size;
            sc.strategy = sampling_strategy_from_string(detect_strategy);
            sc.ranking = ranking_key_from_string(ranking);
            sc.seed = seed;
            const auto sample = sample_candidates(pool.records, sc);
            Timestamp t = 0;
            for (const auto& r : pool.records) t = std::max(t, r.timestamp);
            t = resolve_at(at, t);
            std::optional<Store> store;
            if (!root.empty()) store = Store::open(root);
            Ledger scratch;
            Ledger& ledger = store ? store->ledger() : scratch;
            std::vector<Bug> bugs;
            for (const auto& r : sample) bugs.push_back(ledger.detect(r, actor, t));
            if (store) store->save();
            write_output(out_path, jsonl(bugs));
        };
    });

    // grade
    auto* grade = app.add_subcommand("grade", "Attach golden frames to detected bugs");
    grade->add_option("--bugs", bugs_path)->required();
    grade->add_option("--goldens", goldens_path, "JSON-lines of {utterance, frame}")->required();
    grade->add_option("--ontology", ontology_path)->required();
    grade->add_option("--out", out_path);
    grade->add_option("--at", at);
    grade->add_option("--actor", actor);
    grade->callback([&] {
        run = [&] {
            const Ontology ont = load_ontology(ontology_path);
            const auto goldens = load_goldens(goldens_path);
            auto bugs = ingest_bugs(bugs_path).records;
            const Timestamp t = resolve_at(at, latest(bugs));
            std::vector<Bug> out;
            std::size_t ungraded = 0, correct = 0;
            for (auto& bug : bugs) {
                auto it = goldens.find(normalize_text(bug.utterance, Normalization::FoldCaseAndWhitespace));
                if (it == goldens.end()) {
                    ++ungraded;
                    out.push_back(std::move(bug));
                    continue;
                }
                const SemanticFrame golden = with_tokens(it->second, bug.predicted.tokens());
                if (!is_bug(golden, bug.predicted, ont)) {
                    ++correct;
                    continue;
                }
                bug.golden = golden;
                apply_transition(bug, BugStatus::Graded, actor, t);
                out.push_back(std::move(bug));
            }
            std::cerr << "graded " << out.size() - ungraded << ", correct predictions dropped " << correct
                      << ", ungraded " << ungraded << "\n";
            write_output(out_path, jsonl(out));
        };
    });

    // attribute
    auto* attr = app.add_subcommand("attribute", "Attribute graded bugs to a root cause");
    attr->add_option("--bugs", bugs_path)->required();
    attr->add_option("--train", train_paths, "Training JSON-lines (repeatable)")->required();
    attr->add_option("--rules", rules_path);
    attr->add_option("--lambda", lambda, "Mislabel confidence threshold")->capture_default_str();
    attr->add_option("--normalization", normalization, "exact or fold_case_and_whitespace");
    attr->add_option("--out", out_path);
    attr->add_option("--at", at);
    attr->add_option("--actor", actor);
    attr->callback([&] {
        run = [&] {
            AttributionConfig config{lambda, normalization_from_string(normalization)};
            check_config(config);
            const auto training = load_training(train_paths, nullptr);
            std::vector<IndexWarning> warnings;
            const TrainingIndex index = build_training_index(training, config, &warnings);
            for (const auto& w : warnings)
                std::cerr << "conflicting annotations for '" << w.key << "' (" << w.distinct_annotations << ")\n";
            const RuleStore rules = rules_path.empty() ? RuleStore(config.normalization) : load_rules(rules_path);
            auto bugs = ingest_bugs(bugs_path).records;
            const Timestamp t = resolve_at(at, latest(bugs));
            for (auto& bug : bugs) {
                bug.attribution = attribute(bug, index, rules, config);
                apply_transition(bug, BugStatus::Attributed, actor, t);
            }
            write_output(out_path, jsonl(bugs));
        };
    });

    // fix
    auto* fix = app.add_subcommand("fix", "Propose fixes for attributed bugs");
    fix->add_option("--bugs", bugs_path)->required();
    fix->add_option("--strategy", fix_strategy, "exact, templated or rule")->required();
    fix->add_option("--gazetteers", gazetteers_path, "Required for templated");
    fix->add_option("--ontology", ontology_path)->required();
    fix->add_option("--train", train_paths, "Existing training data, for dedup");
    fix->add_option("--rules", rules_path, "Existing rules merged into the rule output");
    fix->add_option("--seed", seed);
    fix->add_option("--max-templates", max_templates);
    fix->add_option("--max-expansions", max_expansions);
    fix->add_flag("--auto-accept", auto_accept, "Accept proposals without review");
    fix->add_option("--out", out_path, "Proposals (or rules, for --strategy rule) JSON-lines");
    fix->add_option("--bugs-out", bugs_out, "Updated bugs JSON-lines");
    fix->add_option("--at", at);
    fix->add_option("--actor", actor);
    fix->callback([&] {
        run = [&] {
            if (fix_strategy != "exact" && fix_strategy != "templated" && fix_strategy != "rule")
                throw ConfigError("--strategy must be exact, templated or rule");
            const Ontology ont = load_ontology(ontology_path);
            auto bugs = ingest_bugs(bugs_path).records;
            const Timestamp t = resolve_at(at, latest(bugs));
            std::string output;
            if (fix_strategy == "rule") {
                RuleStore rules = rules_path.empty() ? RuleStore() : load_rules(rules_path);
                for (auto& bug : bugs) {
                    if (!bug.golden) throw ValidationError("MissingGolden", "bug " + bug.id + " has no golden frame");
                    ont.validate(*bug.golden);
                    rules.upsert(generate_rule(bug.utterance, *bug.golden));
                    apply_transition(bug, BugStatus::FixProposed, actor, t);
                    apply_transition(bug, BugStatus::FixApplied, actor, t);
                }
                output = jsonl(rules.rules());
            } else {
                Gazetteers gaz;
                if (fix_strategy == "templated") {
                    if (gazetteers_path.empty()) throw ConfigError("--gazetteers is required for templated");
                    gaz = load_gazetteers(gazetteers_path);
                }
                const auto training = load_training(train_paths, &ont);
                const TrainingIndex index = build_training_index(training, {});
                const TemplatedOptions opts{max_templates, max_expansions, seed};
                std::vector<AugmentationProposal> proposals;
                for (auto& bug : bugs) {
                    AugmentationProposal p = fix_strategy == "exact" ? exact_match_proposal(bug)
                                                                 : templated_proposal(bug, ont, gaz, opts, &index);
                    for (const auto& ex : p.examples) ont.validate(ex.frame);
                    bug.proposals.push_back(p.id);
                    apply_transition(bug, BugStatus::FixProposed, actor, t);
                    if (auto_accept) {
                        p.review_status = ReviewStatus::Accepted;
                        apply_transition(bug, BugStatus::FixApplied, actor, t);
                    }
                    proposals.push_back(std::move(p));
                }
                output = jsonl(proposals);
            }
            write_output(out_path, output);
            if (!bugs_out.empty()) write_output(bugs_out, jsonl(bugs));
        };
    });

    // apply
    auto* apply = app.add_subcommand("apply", "Apply accepted proposals or a label transform to a dataset");
    apply->add_option("--train", train_paths, "Input dataset JSON-lines")->required();
    apply->add_option("--ontology", ontology_path)->required();
    auto* proposals_opt = apply->add_option("--proposals", proposals_path, "Proposals JSON-lines; Accepted ones apply");
    auto* transform_opt = apply->add_option("--transform", transform_path, "Transform spec JSON");
    proposals_opt->excludes(transform_opt);
    apply->add_option("--out", out_path, "Output dataset JSON-lines")->required();
    apply->callback([&] {
        run = [&] {
            if (proposals_path.empty() && transform_path.empty()) throw ConfigError("give --proposals or --transform");
            const Ontology ont = load_ontology(ontology_path);
            auto dataset = load_training(train_paths, &ont);
            std::size_t changes = 0;
            if (!proposals_path.empty()) {
                for (const auto& p : ingest_proposals(proposals_path).records) {
                    if (p.review_status != ReviewStatus::Accepted) continue;
                    for (const auto& ex : p.examples) {
                        ont.validate(ex.frame);
                        dataset.push_back(ex);
                        ++changes;
                    }
                }
            } else {
                const TransformSpec spec = [&] {
                    try {
                        return transform_spec_from_json(Json::parse(read_file(transform_path)));
                    } catch (const Json::exception& e) {
                        throw ValidationError("MalformedRecord", transform_path + ": " + e.what());
                    }
                }();
                auto result = apply_transform(dataset, spec, ont);
                dataset = std::move(result.dataset);
                changes = result.change_count;
            }
            std::cerr << "changes " << changes << "\n";
            write_output(out_path, jsonl(dataset));
        };
    });

    // retrain
    auto* retrain = app.add_subcommand("retrain", "Train the reference parser");
    retrain->add_option("--train", train_paths)->required();
    retrain->add_option("--gazetteers", gazetteers_path);
    retrain->add_option("--ontology", ontology_path)->required();
    retrain->add_option("--out", out_path, "Model JSON")->required();
    retrain->callback([&] {
        run = [&] {
            const Ontology ont = load_ontology(ontology_path);
            const Gazetteers gaz = gazetteers_path.empty() ? Gazetteers{} : load_gazetteers(gazetteers_path);
            const auto model = train(load_training(train_paths, &ont), gaz, ont);
            write_output(out_path, model.dump());
        };
    });

    // predict
    auto* predict = app.add_subcommand("predict", "Parse utterances with a trained model");
    predict->add_option("--model", model_path)->required();
    predict->add_option("--rules", rules_path, "Rules that override the model");
    auto* utt_opt = predict->add_option("--utterance", utterance);
    auto* in_opt = predict->add_option("--in", in_path, "One utterance per line");
    utt_opt->excludes(in_opt);
    predict->add_option("--out", out_path);
    predict->callback([&] {
        run = [&] {
            if (utterance.empty() && in_path.empty()) throw ConfigError("give --utterance or --in");
            const ReferenceModel model = ReferenceModel::load(read_file(model_path));
            const RuleStore rules = rules_path.empty() ? RuleStore() : load_rules(rules_path);
            std::vector<std::string> inputs;
            if (!utterance.empty()) {
                inputs.push_back(utterance);
            } else {
                std::istringstream in(read_file(in_path));
                for (std::string line; std::getline(in, line);)
                    if (!split_whitespace(line).empty()) inputs.push_back(line);
            }
            std::string out;
            for (const auto& u : inputs) {
                Json j;
                j["utterance"] = u;
                if (auto fired = rules.fire(u)) {
                    j["frame"] = serialize_frame(*fired);
                    j["intent_confidence"] = model.tiers().exact;
                    j["source"] = "rule";
                } else {
                    const Prediction p = model.predict(u);
                    j["frame"] = serialize_frame(p.frame);
                    j["intent_confidence"] = p.intent_confidence;
                    j["source"] = to_string(p.source);
                }
                out += j.dump() + "\n";
            }
            write_output(out_path, out);
        };
    });

    // verify
    auto* verify = app.add_subcommand("verify", "Mark fixed bugs Verified when the parse now matches golden");
    verify->add_option("--model", model_path)->required();
    verify->add_option("--bugs", bugs_path)->required();
    verify->add_option("--ontology", ontology_path)->required();
    verify->add_option("--rules", rules_path);
    verify->add_option("--out", out_path);
    verify->add_option("--at", at);
    verify->add_option("--actor", actor);
    verify->callback([&] {
        run = [&] {
            const Ontology ont = load_ontology(ontology_path);
            const ReferenceModel model = ReferenceModel::load(read_file(model_path));
            const RuleStore rules = rules_path.empty() ? RuleStore() : load_rules(rules_path);
            Ledger ledger;
            auto bugs = ingest_bugs(bugs_path).records;
            const Timestamp t = resolve_at(at, latest(bugs));
            for (auto& b : bugs) ledger.insert(std::move(b));
            const VerifyResult r = verify_fixes(ledger, model, rules, ont, actor, t);
            std::cerr << "verified " << r.verified.size() << ", still failing " << r.unverified.size() << "\n";
            write_output(out_path, jsonl(ledger.bugs()));
        };
    });

    // report
    auto* report = app.add_subcommand("report", "Summarize a bug ledger");
    report->add_option("--bugs", bugs_path, "Bugs JSON-lines");
    report->add_option("--root", root, "Store directory (instead of --bugs)");
    report->add_option("--from", from, "Window start, ISO-8601");
    report->add_option("--to", to, "Window end, ISO-8601");
    report->add_option("--out", out_path);
    report->callback([&] {
        run = [&] {
            if (bugs_path.empty() == root.empty()) throw ConfigError("give exactly one of --bugs or --root");
            const auto bugs = root.empty() ? ingest_bugs(bugs_path).records : Store::open(root).ledger().bugs();
            write_output(out_path, to_json(ledger_report(bugs, window_from(from, to))).dump(2) + "\n");
        };
    });

    // experiment-sampling
    auto* exp_s = app.add_subcommand("experiment-sampling", "Least-confidence vs random sampling on synthetic traffic");
    exp_s->add_option("--seed", seed)->required();
    exp_s->add_option("--pool-size", exp_pool_size)->capture_default_str();
    exp_s->add_option("--k", k)->capture_default_str();
    exp_s->add_option("--repeats", repeats)->capture_default_str();
    exp_s->add_option("--bins", bins)->capture_default_str();
    exp_s->add_option("--out", out_path, "JSON report");
    exp_s->add_option("--text", text_path, "Text report (default stdout when --out is absent)");
    exp_s->callback([&] {
        run = [&] {
            SamplingExperimentConfig c;
            c.seed = seed;
            c.pool_size = exp_pool_size;
            c.k = k;
            c.repeats = repeats;
            c.bins = bins;
            const auto r = run_sampling_experiment(c);
            if (!out_path.empty()) write_output(out_path, to_json(r).dump(2) + "\n");
            if (!text_path.empty() || out_path.empty()) write_output(text_path, to_text(r));
        };
    });

    // experiment-augment
    auto* exp_a = app.add_subcommand("experiment-augment", "Baseline vs ExactMatch vs Templated augmentation");
    exp_a->add_option("--seed", seed)->required();
    exp_a->add_option("--seed-bugs", seed_bugs)->capture_default_str();
    exp_a->add_option("--coverage", synth.gazetteer_coverage, "Gazetteer coverage of slot values")->capture_default_str();
    exp_a->add_option("--max-templates", max_templates)->capture_default_str();
    exp_a->add_option("--max-expansions", max_expansions)->capture_default_str();
    exp_a->add_option("--out", out_path, "JSON report");
    exp_a->add_option("--text", text_path, "Text report (default stdout when --out is absent)");
    exp_a->callback([&] {
        run = [&] {
            AugmentExperimentConfig c;
            c.seed = seed;
            c.seed_bugs = seed_bugs;
            c.max_templates = max_templates;
            c.max_expansions = max_expansions;
            c.synth = synth;
            const auto r = run_augment_experiment(c);
            if (!out_path.empty()) write_output(out_path, to_json(r).dump(2) + "\n");
            if (!text_path.empty() || out_path.empty()) write_output(text_path, to_text(r));
        };
    });

    // synth
    auto* syn = app.add_subcommand("synth", "Write a synthetic corpus as a store");
    syn->add_option("--seed", seed)->required();
    syn->add_option("--out", out_path, "Store directory (must not exist)")->required();
    syn->add_option("--train-size", synth.train_size)->capture_default_str();
    syn->add_option("--pool-size", synth.pool_size)->capture_default_str();
    syn->add_option("--validation-size", synth.validation_size)->capture_default_str();
    syn->add_option("--test-size", synth.test_size)->capture_default_str();
    syn->add_option("--coverage", synth.gazetteer_coverage)->capture_default_str();
    syn->add_option("--label-noise", synth.label_noise)->capture_default_str();
    syn->add_option("--prediction-noise", synth.prediction_noise)->capture_default_str();
    syn->add_option("--rules", synth.rule_count)->capture_default_str();
    syn->callback([&] {
        run = [&] {
            if (fs::exists(out_path)) throw ConfigError(out_path + " already exists");
            synth.seed = seed;
            write_corpus_store(out_path, generate_corpus(synth));
        };
    });

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Detect, grade, attribute, fix, retrain and verify over a store");
    pipe->add_option("--root", root, "Store directory")->required();
    pipe->add_option("--goldens", goldens_path, "Oracle goldens (default <root>/oracle/goldens.jsonl)");
    pipe->add_option("--k", k)->capture_default_str();
    pipe->add_option("--seed", seed)->required();
    pipe->add_option("--strategy", pipe_strategy, "exact or templated, for low-training-data bugs")->capture_default_str();
    pipe->add_option("--gazetteers", gazetteers_path);
    pipe->add_option("--out", out_path, "JSON report");
    pipe->add_option("--at", at, "Action time (default: latest pool timestamp)");
    pipe->callback([&] {
        run = [&] {
            Store store = Store::open(root);
            PipelineConfig c;
            c.k = k;
            c.seed = seed;
            c.data_strategy = proposal_strategy_from_string(pipe_strategy);
            c.templated.seed = seed;
            Timestamp t = 0;
            for (const auto& r : store.pool()) t = std::max(t, r.timestamp);
            c.at = resolve_at(at, t);
            const auto goldens = load_goldens(goldens_path.empty() ? fs::path(root) / "oracle" / "goldens.jsonl"
                                                                   : fs::path(goldens_path));
            const auto r = run_pipeline(store, goldens, c);
            write_output(out_path, to_json(r).dump(2) + "\n");
        };
    });

    // serve
    auto* srv = app.add_subcommand("serve", "Serve the review API over a store");
    srv->add_option("--root", root)->required();
    srv->add_option("--port", port)->capture_default_str();
    srv->add_option("--host", host);
    srv->callback([&] {
        run = [&] {
            Service service(Store::open(root));
            std::cerr << "listening on " << host << ":" << port << "\n";
            serve(service, host, port);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        run();
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
