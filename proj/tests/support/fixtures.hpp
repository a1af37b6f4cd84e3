#pragma once

// Constructed attribution fixtures: a small training set, a rule store and
// bugs with a known expected category.

#include "nlufix/attribution.hpp"
#include "nlufix/bug.hpp"
#include "nlufix/frames.hpp"
#include "nlufix/rules.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nlufix::testing {

struct AttributionFixture {
    std::string name;
    Bug bug;
    AttributionCategory expected;
};

struct AttributionWorld {
    Ontology ontology;
    std::vector<TrainingExample> training;
    RuleStore rules;
    std::vector<AttributionFixture> fixtures;
};

inline Bug fixture_bug(const std::string& id, const std::string& golden, const std::string& predicted,
                       std::optional<double> confidence) {
    Bug b;
    b.id = id;
    b.golden = parse_frame(golden);
    b.predicted = parse_frame(predicted);
    b.utterance = b.predicted.utterance();
    b.intent_confidence = confidence;
    b.uncertainty = confidence ? 1.0 - *confidence : 1.0;
    b.status = BugStatus::Graded;
    return b;
}

inline AttributionWorld attribution_world() {
    AttributionWorld w;
    auto& o = w.ontology;
    o.add_intent("PLAY_MUSIC", "music");
    o.add_intent("CREATE_CALL", "communication");
    o.add_intent("GET_WEATHER", "weather");
    o.add_intent("GET_DIRECTIONS", "navigation");
    o.add_intent("CREATE_ALARM", "alarm");
    o.add_slot("MUSIC_TYPE", {});
    o.add_slot("PLAYLIST_NAME", {});
    o.add_slot("CONTACT", {});
    o.add_slot("LOCATION", {});
    o.add_slot("DESTINATION", {});
    o.add_slot("DATE_TIME", {});

    auto train = [&](const std::string& frame, int weight = 1) {
        w.training.push_back(make_example(parse_frame(frame), weight));
    };
    train("[IN:PLAY_MUSIC play [SL:MUSIC_TYPE jazz ] ]");
    train("[IN:CREATE_CALL call [SL:CONTACT mom ] ]");
    train("[IN:PLAY_MUSIC call mom ]", 2); // mislabeled copy of the line above
    train("[IN:GET_WEATHER weather in [SL:LOCATION paris ] ]");
    train("[IN:GET_DIRECTIONS Weather in Rome ]"); // mislabeled
    train("[IN:CREATE_ALARM wake me at [SL:DATE_TIME 7 am ] ]");
    train("[IN:CREATE_ALARM wake me at 8 am ]"); // missing slot
    train("[IN:PLAY_MUSIC play my [SL:PLAYLIST_NAME road trip ] playlist ]");
    train("[IN:CREATE_CALL ring [SL:CONTACT dad ] ]");
    train("[IN:GET_DIRECTIONS ring dad ]"); // conflicting copy with a correct one present

    auto rule = [&](const std::string& utterance, const std::string& frame) {
        w.rules.add({"rule-" + std::to_string(w.rules.size()), utterance, parse_frame(frame)});
    };
    rule("what about paris", "[IN:GET_DIRECTIONS what about [SL:DESTINATION paris ] ]");
    rule("what about london", "[IN:GET_DIRECTIONS what about [SL:DESTINATION london ] ]");
    rule("call mom", "[IN:PLAY_MUSIC call mom ]");
    rule("play some rock", "[IN:PLAY_MUSIC play some [SL:MUSIC_TYPE rock ] ]"); // agrees with golden below

    using C = AttributionCategory;
    auto add = [&](const std::string& name, Bug b, C c) { w.fixtures.push_back({name, std::move(b), c}); };

    add("rule conflicts with golden",
        fixture_bug("b-r1", "[IN:GET_WEATHER what about [SL:LOCATION paris ] ]",
                    "[IN:GET_DIRECTIONS what about [SL:DESTINATION paris ] ]", 0.99),
        C::RuleMismatch);
    add("rule conflicts at low confidence",
        fixture_bug("b-r2", "[IN:GET_WEATHER what about [SL:LOCATION london ] ]",
                    "[IN:GET_DIRECTIONS what about [SL:DESTINATION london ] ]", 0.3),
        C::RuleMismatch);
    add("rule conflicts with a differently cased utterance",
        fixture_bug("b-r3", "[IN:GET_WEATHER What about [SL:LOCATION Paris ] ]",
                    "[IN:GET_DIRECTIONS What about [SL:DESTINATION Paris ] ]", std::nullopt),
        C::RuleMismatch);
    add("rule conflict outranks a training mislabel",
        fixture_bug("b-r4", "[IN:CREATE_CALL call [SL:CONTACT mom ] ]", "[IN:PLAY_MUSIC call mom ]", 0.95),
        C::RuleMismatch);

    add("training conflict at exactly lambda",
        fixture_bug("b-m1", "[IN:GET_WEATHER Weather in [SL:LOCATION Rome ] ]", "[IN:GET_DIRECTIONS Weather in Rome ]", 0.9),
        C::Mislabeled);
    add("training conflict above lambda",
        fixture_bug("b-m2", "[IN:CREATE_ALARM wake me at [SL:DATE_TIME 8 am ] ]", "[IN:CREATE_ALARM wake me at 8 am ]", 0.97),
        C::Mislabeled);
    add("one conflicting copy among agreeing ones",
        fixture_bug("b-m3", "[IN:CREATE_CALL ring [SL:CONTACT dad ] ]", "[IN:GET_DIRECTIONS ring dad ]", 0.99),
        C::Mislabeled);

    add("no training match",
        fixture_bug("b-l1", "[IN:PLAY_MUSIC play my [SL:PLAYLIST_NAME holiday cooking ] playlist ]",
                    "[IN:PLAY_MUSIC play my holiday cooking playlist ]", 0.95),
        C::LowTrainingData);
    add("no training match at low confidence",
        fixture_bug("b-l2", "[IN:CREATE_CALL phone [SL:CONTACT grandma ] ]", "[IN:PLAY_MUSIC phone grandma ]", 0.2),
        C::LowTrainingData);
    add("no training match and no confidence",
        fixture_bug("b-l3", "[IN:GET_WEATHER forecast for [SL:LOCATION oslo ] ]", "[IN:GET_WEATHER forecast for oslo ]",
                    std::nullopt),
        C::LowTrainingData);
    add("agreeing rule does not block data attribution",
        fixture_bug("b-l4", "[IN:PLAY_MUSIC play some [SL:MUSIC_TYPE rock ] ]", "[IN:PLAY_MUSIC play some rock ]", 0.5),
        C::LowTrainingData);

    add("training conflict just below lambda",
        fixture_bug("b-u1", "[IN:GET_WEATHER Weather in [SL:LOCATION Rome ] ]", "[IN:GET_DIRECTIONS Weather in Rome ]", 0.89),
        C::Unknown);
    add("training agrees with golden",
        fixture_bug("b-u2", "[IN:PLAY_MUSIC play [SL:MUSIC_TYPE jazz ] ]", "[IN:PLAY_MUSIC play jazz ]", 0.95),
        C::Unknown);
    add("training conflict with missing confidence",
        fixture_bug("b-u3", "[IN:CREATE_ALARM wake me at [SL:DATE_TIME 8 am ] ]", "[IN:CREATE_ALARM wake me at 8 am ]",
                    std::nullopt),
        C::Unknown);
    return w;
}

} // namespace nlufix::testing
