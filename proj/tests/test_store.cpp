#include "doctest.h"

#include "nlufix/codec.hpp"
#include "nlufix/correction.hpp"
#include "nlufix/refmodel.hpp"
#include "nlufix/store.hpp"
#include "support/generators.hpp"
#include "support/tempdir.hpp"

#include <fstream>
#include <set>

using namespace nlufix;
using nlufix::testing::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

LoggedRequest logged(const std::string& id, const std::string& frame, std::optional<double> conf, Timestamp ts = 1000) {
    LoggedRequest r;
    r.id = id;
    r.predicted_frame = parse_frame(frame);
    r.utterance = r.predicted_frame.utterance();
    r.intent_confidence = conf;
    r.timestamp = ts;
    r.final_dialog_act = DialogAct::Error;
    return r;
}

Ontology small_ontology() {
    Ontology o;
    o.add_intent("PLAY_MUSIC", "music");
    o.add_intent("CREATE_CALL", "communication");
    o.add_slot("CONTACT", {"contacts", true});
    o.add_slot("MUSIC_TYPE", {});
    return o;
}

// A bug parked in `status` with everything that status requires.
Bug bug_in(BugStatus status) {
    Bug b;
    b.id = "bug-x";
    b.utterance = "call mom";
    b.predicted = parse_frame("[IN:PLAY_MUSIC call mom ]");
    b.status = status;
    b.golden = parse_frame("[IN:CREATE_CALL call [SL:CONTACT mom ] ]");
    b.attribution = ErrorAttribution{AttributionCategory::LowTrainingData, NearestMatch{"call mom", std::nullopt, 0.0}};
    b.history.push_back({100, status, "seed"});
    return b;
}

} // namespace

TEST_CASE("pool ingest and emit round trip") {
    TempDir dir("pool");
    const Ontology o = nlufix::testing::random_ontology();
    nlufix::testing::FrameGen gen(o, 8);
    std::vector<LoggedRequest> pool;
    for (int i = 0; i < 200; ++i) {
        LoggedRequest r;
        r.id = "r" + std::to_string(i);
        r.predicted_frame = gen.frame();
        r.utterance = r.predicted_frame.utterance();
        if (i % 7) r.intent_confidence = static_cast<double>(gen.rng().below(1000)) / 999.0;
        if (i % 5 == 0) r.nested_intent_confidences = {0.25, 0.5};
        r.frequency = 1 + i % 3;
        r.final_dialog_act = static_cast<DialogAct>(i % 3);
        r.timestamp = 1630454400 + i * 37;
        pool.push_back(r);
    }
    emit_pool(dir / "p.jsonl", pool);
    const auto back = ingest_pool(dir / "p.jsonl");
    CHECK(back.skipped.empty());
    CHECK(back.records == pool);
}

TEST_CASE("dataset, bug and proposal round trips") {
    TempDir dir("rt");
    std::vector<TrainingExample> data = {make_example(parse_frame("[IN:CREATE_CALL call [SL:CONTACT mom ] ]"), 5),
                                         make_example(parse_frame("[IN:PLAY_MUSIC play jazz ]"))};
    emit_dataset(dir / "d.jsonl", data);
    CHECK(ingest_dataset(dir / "d.jsonl").records == data);

    std::vector<Bug> bugs = {bug_in(BugStatus::Detected), bug_in(BugStatus::Attributed)};
    bugs[1].id = "bug-y";
    bugs[1].proposals = {"p1"};
    bugs[1].intent_confidence = 0.4;
    bugs[1].attribution = ErrorAttribution{AttributionCategory::Mislabeled, LabelConflict{{data[1]}, 2, 0.95}};
    emit_bugs(dir / "b.jsonl", bugs);
    CHECK(ingest_bugs(dir / "b.jsonl").records == bugs);

    Bug graded = bug_in(BugStatus::Graded);
    auto p = exact_match_proposal(graded);
    p.review_status = ReviewStatus::Rejected;
    emit_proposals(dir / "pr.jsonl", {p});
    CHECK(ingest_proposals(dir / "pr.jsonl").records == std::vector<AugmentationProposal>{p});

    RuleStore rules;
    rules.add(generate_rule("call mom", *graded.golden));
    emit_rules(dir / "r.jsonl", rules);
    CHECK(load_rules(dir / "r.jsonl").rules() == rules.rules());
}

TEST_CASE("bad lines carry their line number") {
    TempDir dir("bad");
    const std::string good = to_json(logged("a", "[IN:PLAY_MUSIC play jazz ]", 0.5)).dump();
    write_text(dir / "p.jsonl", good + "\n\n" + good + "\n{not json\n" +
                                    R"({"id":"c","utterance":"x","predicted_frame":"[IN:PLAY_MUSIC x ]","intent_confidence":1.7})" +
                                    "\n" + R"({"id":"d","utterance":"y","predicted_frame":"[IN:PLAY_MUSIC x ]"})" + "\n" +
                                    R"({"id":"e","utterance":"x","predicted_frame":"[IN:PLAY_MUSIC x"})" + "\n");
    try {
        ingest_pool(dir / "p.jsonl");
        FAIL("expected a line error");
    } catch (const LineError& e) {
        CHECK(e.line() == 4);
        CHECK(e.code() == "MalformedRecord");
        CHECK(std::string(e.what()).find(":4:") != std::string::npos);
    }
    const auto lenient = ingest_pool(dir / "p.jsonl", {true});
    CHECK(lenient.records.size() == 2);
    REQUIRE(lenient.skipped.size() == 4);
    CHECK(lenient.skipped[0].line() == 4);
    CHECK(lenient.skipped[1].line() == 5);
    CHECK(lenient.skipped[2].line() == 6);
    CHECK(lenient.skipped[3].line() == 7);
    CHECK_THROWS_AS(ingest_pool(dir / "missing.jsonl"), ValidationError);
}

TEST_CASE("every illegal transition raises") {
    const std::set<std::pair<BugStatus, BugStatus>> legal = {
        {BugStatus::Detected, BugStatus::Graded},      {BugStatus::Graded, BugStatus::Attributed},
        {BugStatus::Attributed, BugStatus::FixProposed}, {BugStatus::FixProposed, BugStatus::FixApplied},
        {BugStatus::FixApplied, BugStatus::Verified},  {BugStatus::FixApplied, BugStatus::Recurred},
        {BugStatus::Verified, BugStatus::Recurred},    {BugStatus::Recurred, BugStatus::Attributed},
    };
    int illegal = 0;
    for (auto from : kAllStatuses) {
        for (auto to : kAllStatuses) {
            const std::string edge = std::string(to_string(from)) + " -> " + to_string(to);
            CAPTURE(edge);
            const bool ok = legal.count({from, to}) > 0;
            CHECK(is_legal_transition(from, to) == ok);
            Ledger ledger;
            ledger.insert(bug_in(from));
            if (ok) {
                CHECK_NOTHROW(ledger.transition("bug-x", to, "t", 200));
                CHECK(ledger.get("bug-x").status == to);
                CHECK(ledger.get("bug-x").history.size() == 2);
            } else {
                ++illegal;
                CHECK_THROWS_AS(ledger.transition("bug-x", to, "t", 200), IllegalTransition);
                CHECK(ledger.get("bug-x").status == from);
                CHECK(ledger.get("bug-x").history.size() == 1);
            }
        }
    }
    CHECK(illegal == 49 - 8);
}

TEST_CASE("transitions check their preconditions") {
    Bug b = bug_in(BugStatus::Detected);
    b.golden.reset();
    CHECK_THROWS_AS(apply_transition(b, BugStatus::Graded, "t", 1), IllegalTransition);
    Bug c = bug_in(BugStatus::Graded);
    c.attribution.reset();
    CHECK_THROWS_AS(apply_transition(c, BugStatus::Attributed, "t", 1), IllegalTransition);
    CHECK(c.status == BugStatus::Graded);
}

TEST_CASE("every status is reachable from Detected") {
    std::set<BugStatus> seen = {BugStatus::Detected};
    std::vector<BugStatus> frontier = {BugStatus::Detected};
    while (!frontier.empty()) {
        const auto s = frontier.back();
        frontier.pop_back();
        for (auto t : kAllStatuses) {
            if (is_legal_transition(s, t) && seen.insert(t).second) frontier.push_back(t);
        }
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("ledger lifecycle bookkeeping") {
    Ledger ledger;
    const auto& b = ledger.detect(logged("r1", "[IN:PLAY_MUSIC call mom ]", 0.3), "detector", 100);
    CHECK(b.id == "bug-000001");
    CHECK(b.uncertainty == doctest::Approx(0.7));
    const std::string id = b.id;
    CHECK_THROWS_AS(ledger.transition(id, BugStatus::Attributed, "x", 110), IllegalTransition);
    CHECK_THROWS_AS(ledger.grade(id, parse_frame("[IN:CREATE_CALL call dad ]"), "x", 110), FrameError);
    ledger.grade(id, parse_frame("[IN:CREATE_CALL call [SL:CONTACT mom ] ]"), "linguist", 110);
    CHECK(ledger.get(id).status == BugStatus::Graded);
    ledger.record_attribution(id, {AttributionCategory::LowTrainingData, NearestMatch{}}, "attr", 120);
    ledger.add_proposal(id, "p1", "fixer", 130);
    ledger.add_proposal(id, "p1", "fixer", 131);
    ledger.add_proposal(id, "p2", "fixer", 132);
    CHECK(ledger.get(id).status == BugStatus::FixProposed);
    CHECK(ledger.get(id).proposals == std::vector<std::string>{"p1", "p2"});
    // A clock running backwards never reorders history.
    ledger.transition(id, BugStatus::FixApplied, "x", 50);
    const auto& h = ledger.get(id).history;
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i - 1].at <= h[i].at);
    CHECK(h.size() == 5);
    CHECK_THROWS_AS(ledger.get("bug-999999"), ValidationError);
    CHECK_THROWS_AS(ledger.insert(ledger.get(id)), ValidationError);
    Ledger other;
    Bug far = bug_in(BugStatus::Detected);
    far.id = "bug-000041";
    other.insert(far);
    CHECK(other.detect(logged("r", "[IN:PLAY_MUSIC a ]", 0.5), "d", 1).id == "bug-000042");
}

TEST_CASE("report counts match a naive scan") {
    Rng rng(19);
    std::vector<Bug> bugs;
    for (int i = 0; i < 300; ++i) {
        Bug b = bug_in(BugStatus::Detected);
        b.id = format_bug_id(static_cast<std::uint64_t>(i + 1));
        b.history.clear();
        Timestamp t = 1630454400 + static_cast<Timestamp>(rng.below(86400));
        for (int step = 0; step < 9; ++step) {
            std::vector<BugStatus> next;
            for (auto s : kAllStatuses) {
                if (step == 0 ? s == BugStatus::Detected : is_legal_transition(b.status, s)) next.push_back(s);
            }
            if (next.empty() || (step > 0 && rng.chance(0.15))) break;
            b.status = rng.pick(next);
            t += static_cast<Timestamp>(rng.below(3 * 86400));
            b.history.push_back({t, b.status, "x"});
        }
        bugs.push_back(b);
    }
    const ReportWindow window{1630454400 + 2 * 86400, 1630454400 + 9 * 86400};
    const auto snap = ledger_report(bugs, window);
    CHECK(snap.total_bugs == bugs.size());
    std::size_t fixes = 0, recurrences = 0, total = 0;
    for (auto s : kAllStatuses) {
        std::size_t n = 0;
        for (const auto& b : bugs) n += b.status == s;
        CHECK(snap.status_counts.at(s) == n);
        total += n;
    }
    CHECK(total == bugs.size());
    std::map<std::string, std::size_t> by_day;
    for (const auto& b : bugs) {
        for (const auto& h : b.history) {
            if (h.at < *window.from || h.at >= *window.to) continue;
            if (h.status == BugStatus::Verified) {
                ++fixes;
                ++by_day[format_iso8601(h.at).substr(0, 10)];
            }
            recurrences += h.status == BugStatus::Recurred;
        }
    }
    CHECK(snap.fixes == fixes);
    CHECK(snap.fixes_by_day == by_day);
    CHECK(snap.recurrences.size() == recurrences);
    CHECK(fixes > 0);
    CHECK(recurrences > 0);
    for (std::size_t i = 1; i < snap.recurrences.size(); ++i) CHECK(snap.recurrences[i - 1].at <= snap.recurrences[i].at);
    CHECK(ledger_report(bugs).total_bugs == bugs.size());
}

TEST_CASE("store saves and reloads its state") {
    TempDir dir("store");
    const auto root = dir / "s";
    const Ontology o = small_ontology();
    {
        Store s = Store::create(root, o);
        CHECK_THROWS_AS(Store::create(root, o), ConfigError);
        emit_dataset(root / "train" / "base.jsonl", {make_example(parse_frame("[IN:PLAY_MUSIC call mom ]")),
                                                     make_example(parse_frame("[IN:PLAY_MUSIC play [SL:MUSIC_TYPE jazz ] ]"))});
        write_text(root / "gazetteers" / "g.json", R"({"contacts": ["mom", "dad"]})");
        emit_pool(root / "pool" / "logged.jsonl", {logged("r1", "[IN:PLAY_MUSIC call mom ]", 0.4)});
    }
    Store s = Store::open(root);
    CHECK(s.training_size() == 2);
    CHECK(s.pool().size() == 1);
    CHECK(s.gazetteers().values("contacts").size() == 2);

    const auto& bug = s.ledger().detect(s.pool()[0], "d", 100);
    const std::string id = bug.id;
    const auto golden = parse_frame("[IN:CREATE_CALL call [SL:CONTACT mom ] ]");
    s.ledger().grade(id, golden, "g", 110);
    CHECK(s.relabel("CALL MOM", golden) == 1);
    auto p = exact_match_proposal(s.ledger().get(id));
    s.put_proposal(p);
    s.review_proposal(p.id, true);
    CHECK_THROWS_AS(s.review_proposal(p.id, false), Error);
    CHECK_THROWS_AS(s.review_proposal("nope", true), ValidationError);
    CHECK(s.training_size() == 3);
    s.rules().add(generate_rule("play jazz", parse_frame("[IN:PLAY_MUSIC play [SL:MUSIC_TYPE jazz ] ]")));
    s.add_pool({logged("r2", "[IN:PLAY_MUSIC play jazz ]", 0.9, 2000)});
    CHECK_THROWS_AS(s.add_pool({logged("r3", "[IN:GET_WEATHER x ]", 0.9)}), FrameError);
    const auto model = train(s.training(), s.gazetteers(), s.ontology());
    s.save_model(model);
    s.save();

    const Store r = Store::open(root);
    CHECK(r.ledger().bugs() == s.ledger().bugs());
    CHECK(r.ledger().next_id() == s.ledger().next_id());
    CHECK(r.training() == s.training());
    CHECK(r.training()[0].frame == golden);
    CHECK(r.proposals() == s.proposals());
    CHECK(r.rules().rules() == s.rules().rules());
    CHECK(r.pool() == s.pool());
    REQUIRE(r.load_model());
    CHECK(r.load_model()->dump() == model.dump());
}

TEST_CASE("open rejects non-stores and bad data") {
    TempDir dir("bad-store");
    CHECK_THROWS_AS(Store::open(dir.path()), ValidationError);
    write_text(dir / "manifest.json", R"({"format": "something-else"})");
    CHECK_THROWS_AS(Store::open(dir.path()), ValidationError);
    write_text(dir / "manifest.json", "{oops");
    CHECK_THROWS_AS(Store::open(dir.path()), ValidationError);

    const auto root = dir / "s";
    Store::create(root, small_ontology());
    emit_dataset(root / "train" / "base.jsonl", {make_example(parse_frame("[IN:GET_WEATHER x ]"))});
    CHECK_THROWS_AS(Store::open(root), FrameError);
}

TEST_CASE("accept, retrain, verify, then a recurrence") {
    const Ontology o = small_ontology();
    Ledger ledger;
    RuleStore rules;
    const auto rec = logged("r1", "[IN:PLAY_MUSIC please call mom ]", 0.35);
    const std::string id = ledger.detect(rec, "d", 100).id;
    const auto golden = parse_frame("[IN:CREATE_CALL please call [SL:CONTACT mom ] ]");
    ledger.grade(id, golden, "g", 110);
    ledger.record_attribution(id, {AttributionCategory::LowTrainingData, NearestMatch{}}, "a", 120);
    std::vector<TrainingExample> data = {make_example(parse_frame("[IN:PLAY_MUSIC play [SL:MUSIC_TYPE jazz ] ]"))};
    const auto before = train(data, {}, o);
    auto p = exact_match_proposal(ledger.get(id));
    ledger.add_proposal(id, p.id, "f", 130);
    ledger.transition(id, BugStatus::FixApplied, "reviewer", 140);
    // Not yet retrained: verification leaves it applied.
    CHECK(verify_fixes(ledger, before, rules, o, "v", 150).unverified == std::vector<std::string>{id});
    data.insert(data.end(), p.examples.begin(), p.examples.end());
    const auto after = train(data, {}, o);
    CHECK(verify_fixes(ledger, after, rules, o, "v", 160).verified == std::vector<std::string>{id});
    CHECK(ledger.get(id).status == BugStatus::Verified);

    // Traffic where the parse is right changes nothing; the old wrong parse flips it.
    auto fine = rec;
    fine.predicted_frame = golden;
    fine.timestamp = 2000;
    CHECK(check_recurrences(ledger, {fine}, o, "m", 170).empty());
    auto again = rec;
    again.utterance = "Please CALL mom";
    again.predicted_frame = parse_frame("[IN:PLAY_MUSIC Please CALL mom ]");
    again.timestamp = 3000;
    CHECK(check_recurrences(ledger, {fine, again}, o, "m", 180) == std::vector<std::string>{id});
    CHECK(ledger.get(id).status == BugStatus::Recurred);
    // Recurred re-enters the loop at Attributed.
    CHECK_NOTHROW(ledger.transition(id, BugStatus::Attributed, "a", 190));
}

TEST_CASE("rules win over the model at runtime") {
    const Ontology o = small_ontology();
    const auto model = train({make_example(parse_frame("[IN:PLAY_MUSIC call mom ]"))}, {}, o);
    RuleStore rules;
    CHECK(runtime_parse("call mom", model, rules).intent == "PLAY_MUSIC");
    rules.add(generate_rule("call mom", parse_frame("[IN:CREATE_CALL call [SL:CONTACT mom ] ]")));
    CHECK(serialize_frame(runtime_parse("Call Mom", model, rules)) == "[IN:CREATE_CALL Call [SL:CONTACT Mom ] ]");
}

TEST_CASE("gazetteer ids survive a store reload") {
    TempDir dir("gaz");
    const auto root = dir / "s";
    Ontology o = small_ontology();
    Store::create(root, o);
    write_text(root / "gazetteers" / "g.json", R"({"contacts": ["mom"], "SL:MUSIC_TYPE": ["jazz"]})");
    const Store s = Store::open(root);
    CHECK(s.ontology().template_gazetteer("CONTACT") == std::optional<std::string>("contacts"));
    CHECK(s.gazetteers().contains("contacts"));
    CHECK(s.gazetteers().contains("MUSIC_TYPE"));
}
