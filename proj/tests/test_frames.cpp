#include "doctest.h"

#include "nlufix/frames.hpp"
#include "nlufix/text.hpp"
#include "support/generators.hpp"

#include <string>

using namespace nlufix;
using nlufix::testing::FrameGen;
using nlufix::testing::perturb;

namespace {

const char* kPlayMusic = "[IN:PLAY_MUSIC Play my [SL:PLAYLIST_NAME running ] [SL:MUSIC_TYPE playlist ] ]";

FrameErrorKind parse_error(const std::string& text) {
    try {
        parse_frame(text);
    } catch (const FrameError& e) {
        return e.kind();
    }
    FAIL("expected a FrameError for: " << text);
    return FrameErrorKind::EmptyInput;
}

Ontology music_ontology() {
    Ontology o;
    o.add_intent("PLAY_MUSIC", "music");
    o.add_intent("PAUSE_MUSIC", "music");
    o.add_intent("GET_WEATHER", "weather");
    o.add_intent("CREATE_REMINDER", "reminder");
    o.add_intent("GET_EVENT", "events");
    o.add_slot("PLAYLIST_NAME", {});
    o.add_slot("MUSIC_TYPE", {});
    o.add_slot("TODO", {});
    o.add_slot("LOCATION", {});
    o.add_slot("DATE_TIME", {});
    return o;
}

} // namespace

TEST_CASE("parse the play-music exemplar") {
    const auto f = parse_frame(kPlayMusic);
    CHECK(f.intent == "PLAY_MUSIC");
    REQUIRE(f.children.size() == 4);
    CHECK(f.children[0] == FrameNode::token("Play"));
    CHECK(f.children[1] == FrameNode::token("my"));
    CHECK(f.children[2] == FrameNode::slot("PLAYLIST_NAME", {FrameNode::token("running")}));
    CHECK(f.children[3] == FrameNode::slot("MUSIC_TYPE", {FrameNode::token("playlist")}));
    CHECK(serialize_frame(f) == kPlayMusic);
    CHECK(f.utterance() == "Play my running playlist");
}

TEST_CASE("intent-only frame") {
    const auto f = parse_frame("[IN:UNSUPPORTED ]");
    CHECK(f.intent == "UNSUPPORTED");
    CHECK(f.children.empty());
    CHECK(serialize_frame(f) == "[IN:UNSUPPORTED ]");
    CHECK(serialize_frame(parse_frame("[IN:UNSUPPORTED]")) == "[IN:UNSUPPORTED ]");
}

TEST_CASE("flush and spaced closing brackets parse the same") {
    const auto spaced = parse_frame(kPlayMusic);
    CHECK(parse_frame("[IN:PLAY_MUSIC Play my [SL:PLAYLIST_NAME running] [SL:MUSIC_TYPE playlist]]") == spaced);
    CHECK(parse_frame("  [IN:PLAY_MUSIC\tPlay my\n[SL:PLAYLIST_NAME running ]   [SL:MUSIC_TYPE playlist ] ] ") == spaced);
    CHECK(parse_frame("[ IN:PLAY_MUSIC Play my [ SL:PLAYLIST_NAME running ] [SL:MUSIC_TYPE playlist ] ]") == spaced);
}

TEST_CASE("nested intent inside a slot") {
    const char* text = "[IN:CREATE_REMINDER remind me to [SL:TODO [IN:PLAY_MUSIC play [SL:MUSIC_TYPE jazz ] ] ] ]";
    const auto f = parse_frame(text);
    REQUIRE(f.children.size() == 4);
    const auto& todo = f.children[3];
    CHECK(todo.kind == NodeKind::Slot);
    REQUIRE(todo.children.size() == 1);
    CHECK(todo.children[0].kind == NodeKind::Intent);
    CHECK(todo.children[0].value == "PLAY_MUSIC");
    CHECK(serialize_frame(f) == text);
    CHECK(f.tokens() == std::vector<std::string>{"remind", "me", "to", "play", "jazz"});
}

TEST_CASE("parse errors") {
    CHECK(parse_error("") == FrameErrorKind::EmptyInput);
    CHECK(parse_error("   ") == FrameErrorKind::EmptyInput);
    CHECK(parse_error("[IN:PLAY_MUSIC play") == FrameErrorKind::UnbalancedBrackets);
    CHECK(parse_error("[IN:PLAY_MUSIC play ] ]") == FrameErrorKind::UnbalancedBrackets);
    CHECK(parse_error("[XX:PLAY_MUSIC play ]") == FrameErrorKind::UnknownPrefix);
    CHECK(parse_error("[IN:PLAY_MUSIC [SL:MUSIC_TYPE ] ]") == FrameErrorKind::EmptySlot);
    CHECK(parse_error("[IN:PLAY_MUSIC [SL:TODO [IN:GET_EVENT ] ] ]") == FrameErrorKind::EmptySlot);
    CHECK(parse_error("[SL:MUSIC_TYPE jazz ]") == FrameErrorKind::SlotAtRoot);
    CHECK(parse_error("play [IN:PLAY_MUSIC ]") == FrameErrorKind::MissingRootIntent);
    CHECK(parse_error("[IN:PLAY_MUSIC play ] more") == FrameErrorKind::TrailingTokens);
    CHECK(parse_error("[IN:PLAY_MUSIC play ] [IN:PLAY_MUSIC ]") == FrameErrorKind::TrailingTokens);
    CHECK(parse_error("[IN:PLAY_MUSIC [IN:GET_EVENT x ] ]") == FrameErrorKind::InvalidNesting);
    CHECK(parse_error("[IN:PLAY_MUSIC [SL:TODO [SL:DATE_TIME x ] ] ]") == FrameErrorKind::InvalidNesting);
    CHECK(parse_error("[IN:PLAY_MUSIC pl[ay ]") == FrameErrorKind::LiteralBracket);
    CHECK(parse_error("[IN:9LIVES x ]") == FrameErrorKind::InvalidLabel);
}

TEST_CASE("max depth counts intent nesting") {
    std::string text = "[IN:A x ]";
    for (int d = 2; d <= 4; ++d) text = "[IN:A [SL:S " + text + " ] ]";
    ParseOptions three{3};
    ParseOptions four{4};
    CHECK_NOTHROW(parse_frame(text, four));
    CHECK_THROWS_AS(parse_frame(text, three), FrameError);
}

TEST_CASE("check_frame rejects hand-built invalid trees") {
    SemanticFrame empty_slot{"PLAY_MUSIC", {FrameNode::slot("MUSIC_TYPE", {})}};
    CHECK_THROWS_AS(check_frame(empty_slot), FrameError);
    SemanticFrame bracket{"PLAY_MUSIC", {FrameNode::token("a]")}};
    CHECK_THROWS_AS(check_frame(bracket), FrameError);
    SemanticFrame space{"PLAY_MUSIC", {FrameNode::token("a b")}};
    CHECK_THROWS_AS(check_frame(space), FrameError);
    SemanticFrame lower{"play", {}};
    CHECK_THROWS_AS(check_frame(lower), FrameError);
}

TEST_CASE("round trip over random frames") {
    const Ontology o = nlufix::testing::random_ontology();
    FrameGen gen(o, 101);
    for (int i = 0; i < 1000; ++i) {
        const auto f = gen.frame();
        const auto text = serialize_frame(f);
        CHECK_NOTHROW(check_frame(f));
        const auto back = parse_frame(text);
        REQUIRE_MESSAGE(back == f, text);
        CHECK(serialize_frame(back) == text);
        // Non-canonical spellings collapse to the canonical string.
        CHECK(serialize_frame(parse_frame(perturb(text, gen.rng()))) == text);
    }
}

TEST_CASE("holiday-cooking diff is a missing playlist slot") {
    const Ontology o = music_ontology();
    const auto expected = parse_frame("[IN:PLAY_MUSIC Play my [SL:PLAYLIST_NAME holiday cooking ] [SL:MUSIC_TYPE playlist ] ]");
    const auto predicted = parse_frame("[IN:PLAY_MUSIC Play my holiday cooking [SL:MUSIC_TYPE playlist ] ]");
    const auto d = diff_frames(expected, predicted, o);
    CHECK(d.verdict == DiffVerdict::MissingSlot);
    REQUIRE(d.details.size() == 1);
    CHECK(d.details[0].label == "PLAYLIST_NAME");
    CHECK(d.details[0].expected_span == TokenSpan{2, 4});
    CHECK_FALSE(d.details[0].predicted_span);
    CHECK(d.details[0].path == "IN:PLAY_MUSIC");
    CHECK(is_bug(expected, predicted, o));
    CHECK(diff_frames(predicted, expected, o).verdict == DiffVerdict::ExtraSlot);
}

TEST_CASE("diff verdict kinds and severity") {
    const Ontology o = music_ontology();
    const auto base = parse_frame("[IN:PLAY_MUSIC play [SL:PLAYLIST_NAME road trip ] [SL:MUSIC_TYPE mix ] ]");
    CHECK(diff_frames(base, base, o).verdict == DiffVerdict::Match);
    CHECK(diff_frames(base, base, o).details.empty());
    CHECK_FALSE(is_bug(base, base, o));

    auto same_domain = base;
    same_domain.intent = "PAUSE_MUSIC";
    CHECK(diff_frames(base, same_domain, o).verdict == DiffVerdict::IntentMismatch);
    auto other_domain = base;
    other_domain.intent = "GET_WEATHER";
    CHECK(diff_frames(base, other_domain, o).verdict == DiffVerdict::DomainMismatch);

    const auto shifted = parse_frame("[IN:PLAY_MUSIC play road [SL:PLAYLIST_NAME trip ] [SL:MUSIC_TYPE mix ] ]");
    const auto d = diff_frames(base, shifted, o);
    CHECK(d.verdict == DiffVerdict::SpanMismatch);
    REQUIRE(d.details.size() == 1);
    CHECK(d.details[0].expected_span == TokenSpan{1, 3});
    CHECK(d.details[0].predicted_span == TokenSpan{2, 3});

    // Missing beats extra beats span; domain beats everything.
    const auto mixed = parse_frame("[IN:PLAY_MUSIC [SL:TODO play ] road [SL:PLAYLIST_NAME trip ] mix ]");
    CHECK(diff_frames(base, mixed, o).verdict == DiffVerdict::MissingSlot);
    const auto extra_and_span = parse_frame("[IN:PLAY_MUSIC [SL:TODO play ] road [SL:PLAYLIST_NAME trip ] [SL:MUSIC_TYPE mix ] ]");
    CHECK(diff_frames(base, extra_and_span, o).verdict == DiffVerdict::ExtraSlot);
    auto everything = mixed;
    everything.intent = "GET_WEATHER";
    CHECK(diff_frames(base, everything, o).verdict == DiffVerdict::DomainMismatch);
}

TEST_CASE("nested intent mismatch surfaces as an intent mismatch") {
    const Ontology o = music_ontology();
    const auto a = parse_frame("[IN:CREATE_REMINDER remind me to [SL:TODO [IN:PLAY_MUSIC play [SL:MUSIC_TYPE jazz ] ] ] ]");
    const auto b = parse_frame("[IN:CREATE_REMINDER remind me to [SL:TODO [IN:PAUSE_MUSIC play [SL:MUSIC_TYPE jazz ] ] ] ]");
    const auto c = parse_frame("[IN:CREATE_REMINDER remind me to [SL:TODO [IN:PLAY_MUSIC play jazz ] ] ]");
    const auto d = diff_frames(a, b, o);
    CHECK(d.verdict == DiffVerdict::IntentMismatch);
    CHECK(d.details[0].path == "IN:CREATE_REMINDER/SL:TODO");
    const auto d2 = diff_frames(a, c, o);
    CHECK(d2.verdict == DiffVerdict::MissingSlot);
    CHECK(d2.details[0].path == "IN:CREATE_REMINDER/SL:TODO/IN:PLAY_MUSIC");
}

TEST_CASE("same-level slots compare as a multiset") {
    const Ontology o = music_ontology();
    const auto a = parse_frame("[IN:GET_WEATHER [SL:LOCATION paris ] or [SL:LOCATION rome ] ]");
    CHECK(diff_frames(a, parse_frame(serialize_frame(a)), o).verdict == DiffVerdict::Match);
    const auto b = parse_frame("[IN:GET_WEATHER [SL:LOCATION paris ] or rome ]");
    CHECK(diff_frames(a, b, o).verdict == DiffVerdict::MissingSlot);
}

TEST_CASE("diff errors") {
    const Ontology o = music_ontology();
    const auto a = parse_frame("[IN:PLAY_MUSIC play jazz ]");
    const auto b = parse_frame("[IN:PLAY_MUSIC play rock ]");
    CHECK_THROWS_AS(diff_frames(a, b, o), FrameError);
    const auto unknown = parse_frame("[IN:FLY_PLANE play jazz ]");
    CHECK_THROWS_AS(diff_frames(a, unknown, o), FrameError);
}

TEST_CASE("is_bug agrees with the triple oracle and with string inequality") {
    const Ontology o = nlufix::testing::random_ontology();
    FrameGen gen(o, 202);
    int bugs = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto toks = gen.tokens(1, 9);
        const auto e = gen.over(toks);
        const auto p = gen.partner(e, toks);
        const bool bug = is_bug(e, p, o);
        REQUIRE_MESSAGE(bug == nlufix::testing::triple_oracle_is_bug(e, p),
                        serialize_frame(e) << " vs " << serialize_frame(p));
        CHECK(bug == (serialize_frame(e) != serialize_frame(p)));
        // Reserializing either side never changes the verdict.
        const auto v = diff_frames(e, p, o).verdict;
        CHECK(diff_frames(parse_frame(serialize_frame(e)), parse_frame(serialize_frame(p)), o).verdict == v);
        CHECK(diff_frames(e, e, o).verdict == DiffVerdict::Match);
        bugs += bug;
    }
    // The pair generator must exercise both outcomes.
    CHECK(bugs > 200);
    CHECK(bugs < 1900);
}

TEST_CASE("with_tokens and same_annotation") {
    const auto f = parse_frame(kPlayMusic);
    const auto g = with_tokens(f, {"PLAY", "MY", "RUNNING", "PLAYLIST"});
    CHECK(serialize_frame(g) == "[IN:PLAY_MUSIC PLAY MY [SL:PLAYLIST_NAME RUNNING ] [SL:MUSIC_TYPE PLAYLIST ] ]");
    CHECK(same_annotation(f, g));
    CHECK_THROWS_AS(with_tokens(f, {"too", "few"}), FrameError);
    auto h = g;
    h.intent = "PAUSE_MUSIC";
    CHECK_FALSE(same_annotation(f, h));
}

TEST_CASE("ontology validation and examples") {
    const Ontology o = music_ontology();
    CHECK(o.domain_of("PLAY_MUSIC") == "music");
    CHECK_THROWS_AS(o.domain_of("NOPE"), FrameError);
    CHECK_NOTHROW(o.validate(parse_frame(kPlayMusic)));
    CHECK_THROWS_AS(o.validate(parse_frame("[IN:PLAY_MUSIC [SL:ARTIST x ] ]")), FrameError);

    const auto ex = make_example(parse_frame(kPlayMusic), 3);
    CHECK(ex.utterance == "Play my running playlist");
    CHECK(ex.weight == 3);
    CHECK_NOTHROW(check_example(ex));
    auto bad = ex;
    bad.utterance = "Play my walking playlist";
    CHECK_THROWS_AS(check_example(bad), FrameError);
    bad = ex;
    bad.weight = 0;
    CHECK_THROWS_AS(check_example(bad), ValidationError);
}
