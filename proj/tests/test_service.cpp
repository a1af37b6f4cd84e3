#include "doctest.h"

#include "nlufix/service.hpp"
#include "nlufix/text.hpp"
#include "support/tempdir.hpp"

#include <httplib.h>

#include <thread>

using namespace nlufix;
using nlufix::testing::TempDir;

namespace {

constexpr Timestamp kT0 = 1630500000; // 2021-09-01T12:40:00Z

Ontology music_ontology() {
    Ontology o;
    o.add_intent("PLAY_MUSIC", "music");
    o.add_intent("CREATE_CALL", "communication");
    o.add_intent("GET_WEATHER", "weather");
    o.add_slot("PLAYLIST_NAME", {"playlists", true});
    o.add_slot("MUSIC_TYPE", {});
    o.add_slot("CONTACT", {"contacts", true});
    o.add_slot("LOCATION", {});
    return o;
}

LoggedRequest logged(const std::string& id, const std::string& frame, double conf, std::int64_t freq, Timestamp ts) {
    LoggedRequest r;
    r.id = id;
    r.predicted_frame = parse_frame(frame);
    r.utterance = r.predicted_frame.utterance();
    r.intent_confidence = conf;
    r.frequency = freq;
    r.timestamp = ts;
    r.final_dialog_act = DialogAct::Error;
    return r;
}

// Store with a little training data and three Detected bugs:
//   bug-000001 "Play my holiday cooking playlist", frequency 5, uncertainty 0.4
//   bug-000002 "call mom",                         frequency 9, uncertainty 0.2
//   bug-000003 "weather in rome",                  frequency 1, uncertainty 0.9
Store fixture_store(const std::filesystem::path& root) {
    Store s = Store::create(root, music_ontology());
    emit_dataset(root / "train" / "base.jsonl",
                 {make_example(parse_frame("[IN:PLAY_MUSIC play [SL:MUSIC_TYPE jazz ] ]")),
                  make_example(parse_frame("[IN:PLAY_MUSIC call mom ]")),
                  make_example(parse_frame("[IN:GET_WEATHER weather in [SL:LOCATION paris ] ]"))});
    s = Store::open(root);
    s.ledger().detect(logged("r1", "[IN:PLAY_MUSIC Play my holiday cooking [SL:MUSIC_TYPE playlist ] ]", 0.6, 5, kT0), "d", kT0);
    s.ledger().detect(logged("r2", "[IN:PLAY_MUSIC call mom ]", 0.8, 9, kT0 + 10), "d", kT0);
    s.ledger().detect(logged("r3", "[IN:PLAY_MUSIC weather in rome ]", 0.1, 1, kT0 + 20), "d", kT0);
    s.save();
    return Store::open(root);
}

ServiceConfig pinned_config() {
    ServiceConfig c;
    auto tick = std::make_shared<Timestamp>(kT0 + 1000);
    c.clock = [tick] { return *tick += 60; };
    return c;
}

Json post(Service& s, const std::string& path, const Json& body, int expect = 200) {
    const auto r = s.handle("POST", path, {}, body.dump());
    CHECK_MESSAGE(r.status == expect, path << " -> " << r.body.dump());
    return r.body;
}

Json get(Service& s, const std::string& path, const Query& q = {}, int expect = 200) {
    const auto r = s.handle("GET", path, q);
    CHECK_MESSAGE(r.status == expect, path << " -> " << r.body.dump());
    return r.body;
}

std::string joined(const Json& segments) {
    std::vector<std::string> parts;
    for (const auto& s : segments) parts.push_back(s.at("text").get<std::string>());
    return join_tokens(parts);
}

} // namespace

TEST_CASE("bug table sorting, filtering and paging") {
    TempDir dir("svc");
    Service svc(fixture_store(dir / "s"), pinned_config());

    auto ids = [](const Json& body) {
        std::vector<std::string> out;
        for (const auto& b : body.at("bugs")) out.push_back(b.at("id").get<std::string>());
        return out;
    };
    const auto by_freq = get(svc, "/bugs");
    CHECK(by_freq.at("sort") == "frequency");
    CHECK(by_freq.at("total") == 3);
    CHECK(ids(by_freq) == std::vector<std::string>{"bug-000002", "bug-000001", "bug-000003"});
    CHECK(by_freq.at("bugs")[0].at("frequency") == 9);
    CHECK(by_freq.at("bugs")[1].at("frequency") == 5);
    CHECK(ids(get(svc, "/bugs", {{"sort", "uncertainty"}})) == std::vector<std::string>{"bug-000003", "bug-000001", "bug-000002"});
    CHECK(ids(get(svc, "/bugs", {{"sort", "recency"}})) == std::vector<std::string>{"bug-000003", "bug-000002", "bug-000001"});

    const auto bad = get(svc, "/bugs", {{"sort", "loudness"}}, 400);
    CHECK(bad.at("code") == "InvalidSortKey");
    CHECK(get(svc, "/bugs", {{"page_size", "0"}}, 400).at("code") == "InvalidQuery");
    CHECK(get(svc, "/bugs", {{"status", "Nope"}}, 400).at("code") == "InvalidStatus");

    const auto page2 = get(svc, "/bugs", {{"page", "2"}, {"page_size", "2"}});
    CHECK(ids(page2) == std::vector<std::string>{"bug-000003"});
    CHECK(page2.at("total") == 3);
    CHECK(get(svc, "/bugs", {{"status", "Graded"}}).at("total") == 0);
    CHECK(get(svc, "/bugs", {{"status", "Detected"}}).at("total") == 3);

    const auto one = get(svc, "/bugs/bug-000001");
    CHECK(one.at("utterance") == "Play my holiday cooking playlist");
    CHECK(one.at("verdict").is_null());
    CHECK(get(svc, "/bugs/bug-000999", {}, 404).at("code") == "UnknownBug");
}

TEST_CASE("missing-slot diff highlights the expected span") {
    TempDir dir("svc");
    Service svc(fixture_store(dir / "s"), pinned_config());
    CHECK(get(svc, "/bugs/bug-000001/diff", {}, 409).at("code") == "NotGraded");
    post(svc, "/bugs/bug-000001/grade",
         {{"golden", "[IN:PLAY_MUSIC Play my [SL:PLAYLIST_NAME holiday cooking ] [SL:MUSIC_TYPE playlist ] ]"}});
    const auto d = get(svc, "/bugs/bug-000001/diff");
    CHECK(d.at("verdict") == "MissingSlot");
    REQUIRE(d.at("spans").size() == 1);
    const auto& span = d.at("spans")[0];
    CHECK(span.at("kind") == "MissingSlot");
    CHECK(span.at("label") == "PLAYLIST_NAME");
    CHECK(span.at("expected_text") == "holiday cooking");
    CHECK(span.at("expected_span") == Json::array({2, 4}));
    CHECK(span.at("predicted_span").is_null());

    // Segments reassemble both serializations; highlighted tokens are the span.
    CHECK(joined(d.at("expected").at("segments")) == d.at("expected").at("text").get<std::string>());
    CHECK(joined(d.at("predicted").at("segments")) == d.at("predicted").at("text").get<std::string>());
    std::vector<std::string> lit;
    for (const auto& seg : d.at("expected").at("segments"))
        if (seg.at("highlight").get<bool>()) lit.push_back(seg.at("text").get<std::string>());
    CHECK(join_tokens(lit) == "holiday cooking");
    for (const auto& seg : d.at("predicted").at("segments")) CHECK_FALSE(seg.at("highlight").get<bool>());
    CHECK(get(svc, "/bugs/bug-000001").at("verdict") == "MissingSlot");
}

TEST_CASE("segments of a matching frame carry no highlight") {
    const auto f = parse_frame("[IN:CREATE_CALL call [SL:CONTACT mom ] [SL:CONTACT [IN:GET_WEATHER x ] ] ]");
    const auto segs = diff_segments(f, {});
    std::vector<std::string> parts;
    for (const auto& s : segs) {
        CHECK_FALSE(s.highlight);
        parts.push_back(s.text);
        CHECK((s.role == "token") == s.token_index.has_value());
    }
    CHECK(join_tokens(parts) == serialize_frame(f));
}

TEST_CASE("grade, attribute, fix, accept, retrain, verify, recur") {
    TempDir dir("svc");
    Service svc(fixture_store(dir / "s"), pinned_config());
    const std::string bug = "/bugs/bug-000001";

    CHECK(post(svc, bug + "/attribute", Json::object(), 409).at("code") == "NotGraded");
    const auto bad_grade = post(svc, bug + "/grade", {{"golden", "[IN:PLAY_MUSIC Play my ]"}}, 400);
    CHECK(bad_grade.at("code") == "TokenSequenceMismatch");
    post(svc, bug + "/grade", {{"golden", "[IN:PLAY_MUSIC Play my [SL:PLAYLIST_NAME holiday cooking ] [SL:MUSIC_TYPE playlist ] ]"}});
    const auto again = post(svc, bug + "/grade", {{"golden", "[IN:PLAY_MUSIC Play my holiday cooking playlist ]"}}, 409);
    CHECK(again.at("code") == "IllegalTransition");
    CHECK(again.at("detail").at("from") == "Graded");
    CHECK(again.at("detail").at("to") == "Graded");

    const auto attributed = post(svc, bug + "/attribute", Json::object());
    CHECK(attributed.at("attribution").at("category") == "LowTrainingData");
    CHECK(attributed.at("suggested_action") == "GenerateData");

    const auto fixed = post(svc, bug + "/fix", Json::object());
    CHECK(fixed.at("strategy") == "exact");
    CHECK(fixed.at("bug").at("status") == "FixProposed");
    const std::string pid = fixed.at("proposal").at("id").get<std::string>();
    CHECK(get(svc, "/proposals", {{"status", "Pending"}}).at("total") == 1);

    const auto before = get(svc, "/status").at("training_size").get<std::size_t>();
    const auto accepted = post(svc, "/proposals/" + pid + "/review", {{"action", "accept"}});
    CHECK(accepted.at("bug").at("status") == "FixApplied");
    CHECK(accepted.at("training_size") == before + 1);
    CHECK(post(svc, "/proposals/" + pid + "/review", {{"action", "accept"}}, 409).at("code") == "ProposalNotPending");
    CHECK(post(svc, "/proposals/nope/review", {{"action", "accept"}}, 404).at("code") == "UnknownProposal");
    CHECK(post(svc, "/proposals/" + pid + "/review", {{"action", "maybe"}}, 400).at("code") == "InvalidAction");

    // The old model still gets it wrong.
    CHECK(post(svc, "/verify", Json::object()).at("unverified").size() == 1);
    const auto retrained = post(svc, "/retrain", {{"sync", true}});
    CHECK(retrained.at("training_size") == before + 1);
    const auto verified = post(svc, "/verify", Json::object());
    CHECK(verified.at("verified") == Json::array({"bug-000001"}));
    CHECK(get(svc, bug).at("status") == "Verified");

    const auto report = get(svc, "/report", {{"from", "2021-09-01T00:00:00Z"}, {"to", "2021-09-02T00:00:00Z"}});
    CHECK(report.at("fixes") == 1);
    CHECK(report.at("total_bugs") == 3);
    CHECK(report.at("status_counts").at("Verified") == 1);
    CHECK(report.at("status_counts").at("Detected") == 2);
    CHECK(report.at("window").at("from") == "2021-09-01T00:00:00Z");
    CHECK(get(svc, "/report", {{"from", "2021-09-02T00:00:00Z"}}).at("fixes") == 0);

    // The same wrong prediction shows up again in traffic.
    const auto rec = to_json(logged("r9", "[IN:PLAY_MUSIC play my holiday cooking [SL:MUSIC_TYPE playlist ] ]", 0.6, 1, kT0 + 5000));
    const auto checked = post(svc, "/pool/check", {{"records", Json::array({rec})}});
    CHECK(checked.at("recurred") == Json::array({"bug-000001"}));
    CHECK(get(svc, bug).at("status") == "Recurred");
    CHECK(get(svc, "/report").at("recurrences").size() == 1);

    // Everything was persisted: a fresh service over the same root agrees.
    Service reopened(Store::open(dir / "s"), pinned_config());
    CHECK(get(reopened, bug).at("status") == "Recurred");
    CHECK(get(reopened, "/status").at("training_size") == before + 1);
}

TEST_CASE("mislabel and rule fixes apply immediately") {
    TempDir dir("svc");
    Service svc(fixture_store(dir / "s"), pinned_config());
    post(svc, "/bugs/bug-000002/grade", {{"golden", "[IN:CREATE_CALL call [SL:CONTACT mom ] ]"}});
    // Training says PLAY_MUSIC for "call mom"; uncertainty 0.2 puts confidence under lambda.
    CHECK(post(svc, "/bugs/bug-000002/attribute", Json::object()).at("attribution").at("category") == "Unknown");
    const auto ruled = post(svc, "/bugs/bug-000002/fix", Json::object());
    CHECK(ruled.at("strategy") == "rule");
    CHECK(ruled.at("bug").at("status") == "FixApplied");
    CHECK(get(svc, "/status").at("rule_count") == 1);
    CHECK(post(svc, "/verify", Json::object()).at("verified") == Json::array({"bug-000002"}));

    post(svc, "/bugs/bug-000003/grade", {{"golden", "[IN:GET_WEATHER weather in [SL:LOCATION rome ] ]"}});
    post(svc, "/bugs/bug-000003/attribute", Json::object());
    const auto relabeled = post(svc, "/bugs/bug-000003/fix", {{"strategy", "relabel"}});
    CHECK(relabeled.at("relabeled") == 0);
    CHECK(relabeled.at("bug").at("status") == "FixApplied");
    CHECK(post(svc, "/bugs/bug-000001/fix", Json::object(), 409).at("code") == "NoAttribution");
    post(svc, "/bugs/bug-000001/grade", {{"golden", "[IN:PLAY_MUSIC Play my [SL:PLAYLIST_NAME holiday cooking ] [SL:MUSIC_TYPE playlist ] ]"}});
    post(svc, "/bugs/bug-000001/attribute", Json::object());
    CHECK(post(svc, "/bugs/bug-000001/fix", {{"strategy", "magic"}}, 400).at("code") == "InvalidStrategy");
}

TEST_CASE("background retrain") {
    TempDir dir("svc");
    Service svc(fixture_store(dir / "s"), pinned_config());
    const auto v0 = get(svc, "/status").at("model_version").get<int>();
    const auto r = svc.handle("POST", "/retrain", {}, "{}");
    CHECK(r.status == 202);
    CHECK(r.body.at("state") == "running");
    svc.wait_for_retrain();
    const auto st = get(svc, "/status");
    CHECK(st.at("retrain") == "idle");
    CHECK(st.at("model_version") == v0 + 1);
    CHECK(st.at("model_loaded") == true);
}

TEST_CASE("routing and request errors") {
    TempDir dir("svc");
    Service svc(fixture_store(dir / "s"), pinned_config());
    CHECK(svc.handle("GET", "/nowhere").status == 404);
    CHECK(svc.handle("DELETE", "/bugs").status == 405);
    CHECK(svc.handle("GET", "/retrain").status == 405);
    const auto bad = svc.handle("POST", "/bugs/bug-000001/grade", {}, "{not json");
    CHECK(bad.status == 400);
    CHECK(bad.body.at("code") == "MalformedRequest");
    CHECK(svc.handle("POST", "/bugs/bug-000001/grade", {}, "[1]").status == 400);
    CHECK(svc.handle("POST", "/bugs/bug-000001/grade", {}, R"({"golden": 3})").status == 400);
    CHECK(svc.handle("POST", "/bugs/bug-000001/grade", {}, R"({"golden": "[IN:FLY x ]"})").body.at("code") == "UnknownLabel");
    CHECK(svc.handle("POST", "/bugs/bug-000001/grade", {}, R"({"golden": "[XX:FLY x ]"})").body.at("code") == "UnknownPrefix");
    CHECK(svc.handle("GET", "/report", {{"from", "yesterday"}}).status == 400);
    const auto pool = svc.handle("POST", "/pool/check", {}, R"({"records": [{"id": "x"}]})");
    CHECK(pool.status == 400);
    CHECK(pool.body.at("detail").at("index") == 0);
}

TEST_CASE("service over a real socket") {
    TempDir dir("svc");
    Service svc(fixture_store(dir / "s"), pinned_config());
    HttpServer server(svc);
    const int port = server.bind("127.0.0.1", 0);
    std::thread t([&] { server.run(); });
    httplib::Client client("127.0.0.1", port);
    client.set_connection_timeout(5);
    httplib::Result res;
    for (int attempt = 0; attempt < 50 && !res; ++attempt) {
        res = client.Get("/bugs?sort=frequency&page_size=1");
        if (!res) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = Json::parse(res->body);
    CHECK(body.at("bugs")[0].at("id") == "bug-000002");
    const auto graded = client.Post("/bugs/bug-000002/grade", R"({"golden": "[IN:CREATE_CALL call [SL:CONTACT mom ] ]"})",
                                    "application/json");
    REQUIRE(graded);
    CHECK(graded->status == 200);
    const auto missing = client.Get("/bugs/bug-000404");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    server.stop();
    t.join();
}
