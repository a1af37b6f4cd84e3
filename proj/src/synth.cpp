#include "nlufix/synth.hpp"

#include "nlufix/correction.hpp"
#include "nlufix/refmodel.hpp"
#include "nlufix/text.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace nlufix {

namespace {

struct IntentDef {
    const char* intent;
    const char* domain;
};

constexpr IntentDef kIntents[] = {
    {"PLAY_MUSIC", "music"},         {"ADD_TO_PLAYLIST", "music"},
    {"CREATE_CALL", "communication"}, {"SEND_MESSAGE", "communication"},
    {"GET_WEATHER", "weather"},       {"GET_DIRECTIONS", "navigation"},
    {"GET_ESTIMATED_DURATION", "navigation"}, {"CREATE_ALARM", "alarm"},
    {"DELETE_ALARM", "alarm"},        {"CREATE_REMINDER", "reminder"},
};

// Patterns per intent; the last two of each intent are unseen.
constexpr const char* kCarriers[][2] = {
    {"PLAY_MUSIC", "[IN:PLAY_MUSIC play my [SL:PLAYLIST_NAME $ ] [SL:MUSIC_TYPE $ ] ]"},
    {"PLAY_MUSIC", "[IN:PLAY_MUSIC play [SL:PLAYLIST_NAME $ ] ]"},
    {"PLAY_MUSIC", "[IN:PLAY_MUSIC put on some [SL:ARTIST_NAME $ ] ]"},
    {"PLAY_MUSIC", "[IN:PLAY_MUSIC i want to hear [SL:ARTIST_NAME $ ] ]"},
    {"PLAY_MUSIC", "[IN:PLAY_MUSIC play songs by [SL:ARTIST_NAME $ ] ]"},
    {"PLAY_MUSIC", "[IN:PLAY_MUSIC can you start the [SL:PLAYLIST_NAME $ ] [SL:MUSIC_TYPE $ ] ]"},
    {"PLAY_MUSIC", "[IN:PLAY_MUSIC i am in the mood for [SL:ARTIST_NAME $ ] ]"},

    {"ADD_TO_PLAYLIST", "[IN:ADD_TO_PLAYLIST add this song to my [SL:PLAYLIST_NAME $ ] [SL:MUSIC_TYPE playlist ] ]"},
    {"ADD_TO_PLAYLIST", "[IN:ADD_TO_PLAYLIST save this to [SL:PLAYLIST_NAME $ ] ]"},
    {"ADD_TO_PLAYLIST", "[IN:ADD_TO_PLAYLIST put this track in [SL:PLAYLIST_NAME $ ] ]"},
    {"ADD_TO_PLAYLIST", "[IN:ADD_TO_PLAYLIST throw this on my [SL:PLAYLIST_NAME $ ] list ]"},
    {"ADD_TO_PLAYLIST", "[IN:ADD_TO_PLAYLIST keep this one in [SL:PLAYLIST_NAME $ ] ]"},

    {"CREATE_CALL", "[IN:CREATE_CALL call [SL:CONTACT $ ] ]"},
    {"CREATE_CALL", "[IN:CREATE_CALL please call [SL:CONTACT $ ] ]"},
    {"CREATE_CALL", "[IN:CREATE_CALL phone [SL:CONTACT $ ] now ]"},
    {"CREATE_CALL", "[IN:CREATE_CALL start a video call with [SL:CONTACT $ ] ]"},
    {"CREATE_CALL", "[IN:CREATE_CALL get [SL:CONTACT $ ] on the line ]"},
    {"CREATE_CALL", "[IN:CREATE_CALL ring [SL:CONTACT $ ] for me ]"},

    {"SEND_MESSAGE", "[IN:SEND_MESSAGE text [SL:CONTACT $ ] saying [SL:CONTENT_EXACT $ ] ]"},
    {"SEND_MESSAGE", "[IN:SEND_MESSAGE send a message to [SL:CONTACT $ ] ]"},
    {"SEND_MESSAGE", "[IN:SEND_MESSAGE tell [SL:CONTACT $ ] [SL:CONTENT_EXACT $ ] ]"},
    {"SEND_MESSAGE", "[IN:SEND_MESSAGE shoot [SL:CONTACT $ ] a quick note ]"},
    {"SEND_MESSAGE", "[IN:SEND_MESSAGE let [SL:CONTACT $ ] know [SL:CONTENT_EXACT $ ] ]"},

    {"GET_WEATHER", "[IN:GET_WEATHER what is the weather in [SL:LOCATION $ ] ]"},
    {"GET_WEATHER", "[IN:GET_WEATHER will it [SL:WEATHER_ATTRIBUTE $ ] in [SL:LOCATION $ ] [SL:DATE_TIME $ ] ]"},
    {"GET_WEATHER", "[IN:GET_WEATHER weather [SL:DATE_TIME $ ] ]"},
    {"GET_WEATHER", "[IN:GET_WEATHER what about [SL:LOCATION $ ] ]"},
    {"GET_WEATHER", "[IN:GET_WEATHER do i need an umbrella in [SL:LOCATION $ ] ]"},
    {"GET_WEATHER", "[IN:GET_WEATHER how cold is it in [SL:LOCATION $ ] ]"},

    {"GET_DIRECTIONS", "[IN:GET_DIRECTIONS directions to [SL:DESTINATION $ ] ]"},
    {"GET_DIRECTIONS", "[IN:GET_DIRECTIONS how do i get to [SL:DESTINATION $ ] [SL:METHOD_TRAVEL $ ] ]"},
    {"GET_DIRECTIONS", "[IN:GET_DIRECTIONS navigate to [SL:DESTINATION $ ] ]"},
    {"GET_DIRECTIONS", "[IN:GET_DIRECTIONS what about [SL:DESTINATION $ ] ]"},
    {"GET_DIRECTIONS", "[IN:GET_DIRECTIONS show me the way to [SL:DESTINATION $ ] ]"},
    {"GET_DIRECTIONS", "[IN:GET_DIRECTIONS take me to [SL:DESTINATION $ ] ]"},

    {"GET_ESTIMATED_DURATION", "[IN:GET_ESTIMATED_DURATION how long to drive to [SL:DESTINATION $ ] ]"},
    {"GET_ESTIMATED_DURATION", "[IN:GET_ESTIMATED_DURATION how far is [SL:DESTINATION $ ] ]"},
    {"GET_ESTIMATED_DURATION", "[IN:GET_ESTIMATED_DURATION travel time to [SL:DESTINATION $ ] [SL:DATE_TIME $ ] ]"},
    {"GET_ESTIMATED_DURATION", "[IN:GET_ESTIMATED_DURATION when would i reach [SL:DESTINATION $ ] ]"},
    {"GET_ESTIMATED_DURATION", "[IN:GET_ESTIMATED_DURATION is [SL:DESTINATION $ ] a long drive ]"},

    {"CREATE_ALARM", "[IN:CREATE_ALARM set an alarm [SL:DATE_TIME $ ] ]"},
    {"CREATE_ALARM", "[IN:CREATE_ALARM wake me up [SL:DATE_TIME $ ] ]"},
    {"CREATE_ALARM", "[IN:CREATE_ALARM alarm for [SL:DATE_TIME $ ] ]"},
    {"CREATE_ALARM", "[IN:CREATE_ALARM i need to be up [SL:DATE_TIME $ ] ]"},
    {"CREATE_ALARM", "[IN:CREATE_ALARM buzz me [SL:DATE_TIME $ ] ]"},

    {"DELETE_ALARM", "[IN:DELETE_ALARM cancel my alarm [SL:DATE_TIME $ ] ]"},
    {"DELETE_ALARM", "[IN:DELETE_ALARM delete my alarm [SL:DATE_TIME $ ] ]"},
    {"DELETE_ALARM", "[IN:DELETE_ALARM turn off the alarm for [SL:DATE_TIME $ ] ]"},
    {"DELETE_ALARM", "[IN:DELETE_ALARM i do not need the alarm [SL:DATE_TIME $ ] anymore ]"},
    {"DELETE_ALARM", "[IN:DELETE_ALARM drop the alarm set for [SL:DATE_TIME $ ] ]"},

    {"CREATE_REMINDER",
     "[IN:CREATE_REMINDER remind me [SL:DATE_TIME $ ] to [SL:TODO [IN:CREATE_CALL call [SL:CONTACT $ ] ] ] ]"},
    {"CREATE_REMINDER", "[IN:CREATE_REMINDER remind me to [SL:TODO [IN:SEND_MESSAGE text [SL:CONTACT $ ] ] ] ]"},
    {"CREATE_REMINDER", "[IN:CREATE_REMINDER set a reminder [SL:DATE_TIME $ ] ]"},
    {"CREATE_REMINDER",
     "[IN:CREATE_REMINDER do not let me forget to [SL:TODO [IN:CREATE_CALL call [SL:CONTACT $ ] ] ] ]"},
    {"CREATE_REMINDER", "[IN:CREATE_REMINDER ping me [SL:DATE_TIME $ ] about [SL:TODO groceries ] ]"},
};

std::vector<std::string> cross(const std::vector<std::string>& a, const std::vector<std::string>& b,
                               const std::string& prefix = "") {
    std::vector<std::string> out;
    for (const auto& x : a)
        for (const auto& y : b) out.push_back(prefix + x + " " + y);
    return out;
}

std::map<std::string, std::vector<std::string>> build_universe() {
    std::map<std::string, std::vector<std::string>> u;

    auto playlist = cross({"chill", "happy", "late night", "sunday", "summer", "winter", "morning", "lazy", "upbeat",
                           "acoustic", "rainy day", "dance", "retro", "mellow", "indie", "road"},
                          {"vibes", "mix", "jams", "hits", "grooves", "beats", "classics", "favorites", "anthems",
                           "tunes"});
    for (const char* s : {"running", "baking", "road trip", "holiday cooking", "workout", "study", "focus", "sleep",
                          "party", "dinner"})
        playlist.push_back(s);
    u["PLAYLIST_NAME"] = playlist;

    u["ARTIST_NAME"] = cross({"silver", "black", "velvet", "electric", "lonely", "midnight", "golden", "crystal",
                              "paper", "wild", "neon", "quiet"},
                             {"foxes", "keys", "owls", "tides", "lights", "rivers", "hearts", "echoes", "wolves",
                              "arrows"},
                             "the ");

    std::vector<std::string> contacts = {
        "mom",   "dad",    "grandma", "my sister", "my brother", "my boss", "alice",  "bob",    "carol", "dave",
        "erin",  "frank",  "grace",   "heidi",     "ivan",       "judy",    "mallory", "niaj",  "olivia", "peggy",
        "rupert", "sybil", "trent",   "victor",    "walter",     "yusuf",   "zoe",    "amara",  "bruno", "chen",
        "dmitri", "elena", "farah",   "gustavo",   "hana",       "igor",    "jia",    "kofi",   "lena",  "mateo",
        "nadia", "omar",   "priya",   "quinn",     "rosa",       "sven",    "tomas",  "uma",    "vera",  "wei",
        "anna marie", "john paul", "mary kate", "jean luc", "li wei", "ana sofia", "carlos", "diana", "emil", "fiona",
        "gemma", "hassan", "ines", "jonas", "kira", "liam", "maya", "noah", "oscar", "paula",
        "rafael", "sara", "theo", "ursula", "vikram", "wanda", "xavier", "yara", "zane", "my aunt",
        "my uncle", "my wife", "my husband", "the dentist", "aiko", "bianca", "cyrus", "dalia", "eitan", "freya"};
    u["contact"] = contacts;

    u["city"] = {"paris",       "london",    "berlin",     "madrid",       "rome",        "lisbon",     "vienna",
                 "prague",      "dublin",    "oslo",       "stockholm",    "helsinki",    "warsaw",     "athens",
                 "cairo",       "nairobi",   "lagos",      "tokyo",        "osaka",       "seoul",      "beijing",
                 "shanghai",    "mumbai",    "delhi",      "bangkok",      "hanoi",       "manila",     "jakarta",
                 "sydney",      "melbourne", "auckland",   "toronto",      "montreal",    "vancouver",  "chicago",
                 "boston",      "seattle",   "denver",     "austin",       "miami",       "new york",   "los angeles",
                 "san francisco", "san diego", "las vegas", "mexico city", "buenos aires", "sao paulo", "rio de janeiro",
                 "cape town",   "hong kong", "kuala lumpur", "tel aviv",   "abu dhabi",   "salt lake city", "st louis",
                 "new orleans", "the airport", "downtown",  "the office", "porto",  "seville",   "munich",
                 "zurich",      "geneva",    "brussels",   "amsterdam",    "copenhagen",  "budapest",   "krakow",
                 "istanbul",    "dubai",     "doha",       "singapore",    "perth",       "brisbane",   "lima",
                 "bogota",      "santiago",  "havana",     "quebec city",  "portland",    "phoenix",    "dallas",
                 "houston",     "atlanta",   "nashville",  "detroit",      "minneapolis", "philadelphia", "baltimore",
                 "the station", "the mall",  "the beach",  "my office",    "home"};

    std::vector<std::string> times;
    for (int h = 1; h <= 12; ++h) {
        for (const char* half : {"am", "pm"}) {
            const std::string hour = std::to_string(h);
            times.push_back("at " + hour + " " + half);
            times.push_back("at " + hour + " 30 " + half);
            times.push_back("tomorrow at " + hour + " " + half);
        }
    }
    for (const char* s : {"tomorrow", "tonight", "this evening", "tomorrow morning", "next week", "on monday",
                          "on tuesday", "on wednesday", "on thursday", "on friday", "on saturday", "on sunday",
                          "in an hour", "in ten minutes", "at noon", "at midnight"})
        times.push_back(s);
    u["datetime"] = times;

    u["MUSIC_TYPE"] = {"playlist", "album", "station"};
    u["WEATHER_ATTRIBUTE"] = {"rain", "snow", "be sunny", "be windy"};
    u["METHOD_TRAVEL"] = {"by car", "on foot", "by bike", "by train"};
    u["CONTENT_EXACT"] = {"i am running late", "call me back", "on my way", "see you soon", "happy birthday",
                          "dinner is ready", "where are you"};
    return u;
}

Ontology build_ontology() {
    Ontology o;
    for (const auto& d : kIntents) o.add_intent(d.intent, d.domain);
    o.add_slot("PLAYLIST_NAME", {"PLAYLIST_NAME", true});
    o.add_slot("ARTIST_NAME", {"ARTIST_NAME", true});
    o.add_slot("CONTACT", {"contact", true});
    o.add_slot("LOCATION", {"city", true});
    o.add_slot("DESTINATION", {"city", true});
    o.add_slot("DATE_TIME", {"datetime", true});
    o.add_slot("MUSIC_TYPE", {});
    o.add_slot("WEATHER_ATTRIBUTE", {});
    o.add_slot("METHOD_TRAVEL", {});
    o.add_slot("CONTENT_EXACT", {});
    o.add_slot("TODO", {});
    return o;
}

} // namespace

void check_config(const SynthConfig& c) {
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
    };
    unit(c.gazetteer_coverage, "gazetteer_coverage");
    unit(c.pool_covered_share, "pool_covered_share");
    unit(c.pool_unseen_share, "pool_unseen_share");
    unit(c.pool_train_overlap, "pool_train_overlap");
    unit(c.eval_unseen_share, "eval_unseen_share");
    unit(c.label_noise, "label_noise");
    unit(c.prediction_noise, "prediction_noise");
    unit(c.rule_conflict_share, "rule_conflict_share");
    unit(c.fail_if_bug, "fail_if_bug");
    unit(c.fail_if_correct, "fail_if_correct");
    unit(c.other_act_rate, "other_act_rate");
    if (c.pool_unseen_share + c.pool_train_overlap > 1.0) throw ConfigError("pool shares exceed 1");
    if (c.train_size == 0) throw ConfigError("train_size must be positive");
    if (c.window_length <= 0) throw ConfigError("window_length must be positive");
}

CorpusGenerator::CorpusGenerator(const SynthConfig& config) : ontology_(build_ontology()), universe_(build_universe()) {
    check_config(config);
    std::map<std::string, int> per_intent;
    std::map<std::string, int> totals;
    for (const auto& c : kCarriers) ++totals[c[0]];
    for (const auto& c : kCarriers) {
        const int i = per_intent[c[0]]++;
        Carrier carrier{c[0], c[1], i >= totals[c[0]] - 2};
        (carrier.unseen ? unseen_ : seen_).push_back(carriers_.size());
        carriers_.push_back(std::move(carrier));
    }

    // Catalog: a seeded share of each templatable universe.
    Rng rng(derive_seed(config.seed, fnv1a64("catalog")));
    std::set<std::string> gaz_ids;
    for (const auto& [slot, spec] : ontology_.slots())
        if (spec.templatable && spec.gazetteer) gaz_ids.insert(*spec.gazetteer);
    for (const auto& id : gaz_ids) {
        std::vector<std::string> values = universe_.at(id);
        rng.shuffle(values);
        auto keep = static_cast<std::size_t>(std::llround(config.gazetteer_coverage * static_cast<double>(values.size())));
        keep = std::clamp<std::size_t>(keep, 1, values.size() - 1);
        covered_[id].assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(keep));
        uncovered_[id].assign(values.begin() + static_cast<std::ptrdiff_t>(keep), values.end());
        std::sort(covered_[id].begin(), covered_[id].end());
        std::sort(uncovered_[id].begin(), uncovered_[id].end());
        catalog_.set(id, covered_[id]);
    }
}

std::string CorpusGenerator::value_for(const std::string& slot, Rng& rng, ValueDraw values) const {
    const auto gaz = ontology_.template_gazetteer(slot);
    if (!gaz) return rng.pick(universe_.at(slot));
    switch (values) {
    case ValueDraw::Covered: return rng.pick(covered_.at(*gaz));
    case ValueDraw::Uncovered: return rng.pick(uncovered_.at(*gaz));
    case ValueDraw::Uniform: break;
    }
    return rng.pick(universe_.at(*gaz));
}

TrainingExample CorpusGenerator::fill(const Carrier& carrier, Rng& rng, ValueDraw values) const {
    std::vector<std::string> out;
    std::vector<std::string> stack;
    for (const auto& tok : split_whitespace(carrier.pattern)) {
        if (tok.rfind("[SL:", 0) == 0) {
            stack.push_back(tok.substr(4));
        } else if (tok.rfind("[IN:", 0) == 0) {
            stack.emplace_back();
        } else if (tok == "]") {
            stack.pop_back();
        } else if (tok == "$") {
            out.push_back(value_for(stack.back(), rng, values));
            continue;
        }
        out.push_back(tok);
    }
    return make_example(parse_frame(join_tokens(out)));
}

TrainingExample CorpusGenerator::draw(Rng& rng, CarrierSet set, ValueDraw values) const {
    const auto& ids = set == CarrierSet::Seen ? seen_ : unseen_;
    return fill(carriers_[rng.pick(ids)], rng, values);
}

namespace {

// Replaces the slot at document-order `target` with its own children.
bool unwrap_slot(std::vector<FrameNode>& nodes, std::size_t target, std::size_t& index) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        FrameNode& n = nodes[i];
        if (n.is_token()) continue;
        if (n.kind == NodeKind::Slot && index++ == target) {
            // Nested intents are flattened to their tokens.
            std::vector<FrameNode> flat;
            auto collect = [&](auto& self, const std::vector<FrameNode>& list) -> void {
                for (const auto& c : list) {
                    if (c.is_token()) flat.push_back(c);
                    else self(self, c.children);
                }
            };
            collect(collect, n.children);
            nodes.erase(nodes.begin() + static_cast<std::ptrdiff_t>(i));
            nodes.insert(nodes.begin() + static_cast<std::ptrdiff_t>(i), flat.begin(), flat.end());
            return true;
        }
        if (unwrap_slot(n.children, target, index)) return true;
    }
    return false;
}

} // namespace

SemanticFrame corrupt_frame(const SemanticFrame& frame, const Ontology& ontology, Rng& rng) {
    std::size_t slots = 0;
    visit_slots(frame.children, [&](const FrameNode&, std::size_t) { ++slots; });
    SemanticFrame out = frame;
    if (slots > 0 && rng.chance(0.5)) {
        std::size_t index = 0;
        unwrap_slot(out.children, rng.below(slots), index);
        return out;
    }
    std::vector<std::string> others;
    for (const auto& [intent, domain] : ontology.domains())
        if (intent != frame.intent) others.push_back(intent);
    out.intent = rng.pick(others);
    return out;
}

SynthCorpus generate_corpus(const SynthConfig& config) {
    CorpusGenerator gen(config);
    SynthCorpus corpus;
    corpus.ontology = gen.ontology();
    corpus.gazetteers = gen.gazetteers();

    auto key = [](const std::string& s) { return normalize_text(s, Normalization::FoldCaseAndWhitespace); };
    std::unordered_set<std::string> taken;
    auto draw_unique = [&](Rng& rng, CarrierSet set, ValueDraw values) {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            TrainingExample ex = gen.draw(rng, set, values);
            if (taken.insert(key(ex.utterance)).second) return ex;
        }
        throw ConfigError("value universe too small for the requested corpus size");
    };

    // Training: seen carriers, uniform values.
    Rng train_rng(derive_seed(config.seed, fnv1a64("train")));
    for (std::size_t i = 0; i < config.train_size; ++i)
        corpus.train.push_back(draw_unique(train_rng, CarrierSet::Seen, ValueDraw::Uniform));
    corpus.clean_train_size = corpus.train.size();

    // Planted label noise: a second, heavier copy with a wrong frame.
    Rng noise_rng(derive_seed(config.seed, fnv1a64("label-noise")));
    std::vector<TrainingExample> noisy;
    for (std::size_t i = 0; i < corpus.clean_train_size; ++i) {
        if (!noise_rng.chance(config.label_noise)) continue;
        TrainingExample bad = corpus.train[i];
        bad.frame = corrupt_frame(bad.frame, corpus.ontology, noise_rng);
        bad.weight = 2;
        noisy.push_back(std::move(bad));
    }
    corpus.train.insert(corpus.train.end(), noisy.begin(), noisy.end());

    Rng eval_rng(derive_seed(config.seed, fnv1a64("eval")));
    auto eval_draw = [&] {
        const bool unseen = eval_rng.chance(config.eval_unseen_share);
        return draw_unique(eval_rng, unseen ? CarrierSet::Unseen : CarrierSet::Seen, ValueDraw::Uniform);
    };
    for (std::size_t i = 0; i < config.validation_size; ++i) corpus.validation.push_back(eval_draw());
    for (std::size_t i = 0; i < config.test_size; ++i) corpus.test.push_back(eval_draw());

    // Pool texts with ground truth.
    Rng pool_rng(derive_seed(config.seed, fnv1a64("pool")));
    std::vector<TrainingExample> golden;
    std::unordered_set<std::string> in_pool;
    std::vector<std::size_t> train_order(corpus.clean_train_size);
    for (std::size_t i = 0; i < train_order.size(); ++i) train_order[i] = i;
    pool_rng.shuffle(train_order);
    std::size_t next_train = 0;
    while (golden.size() < config.pool_size) {
        const double r = pool_rng.unit();
        if (r < config.pool_unseen_share) {
            golden.push_back(draw_unique(pool_rng, CarrierSet::Unseen, ValueDraw::Uniform));
            corpus.pool_unseen.push_back(true);
        } else if (r < config.pool_unseen_share + config.pool_train_overlap && next_train < train_order.size()) {
            golden.push_back(corpus.train[train_order[next_train++]]);
            corpus.pool_unseen.push_back(false);
        } else {
            const auto values = pool_rng.chance(config.pool_covered_share) ? ValueDraw::Covered : ValueDraw::Uncovered;
            golden.push_back(draw_unique(pool_rng, CarrierSet::Seen, values));
            corpus.pool_unseen.push_back(false);
        }
    }

    // Rules over a sample of pool texts; some are stale and conflict.
    Rng rule_rng(derive_seed(config.seed, fnv1a64("rules")));
    for (std::size_t i : rule_rng.sample_indices(golden.size(), std::min(config.rule_count, golden.size()))) {
        SemanticFrame frame = golden[i].frame;
        if (rule_rng.chance(config.rule_conflict_share)) frame = corrupt_frame(frame, corpus.ontology, rule_rng);
        corpus.rules.upsert(generate_rule(golden[i].utterance, frame));
    }

    // Simulated production parser: rules, then the reference model, then a
    // corruption channel with uncalibrated confidence.
    const ReferenceModel model = train(corpus.train, corpus.gazetteers, corpus.ontology);
    Rng log_rng(derive_seed(config.seed, fnv1a64("log")));
    for (std::size_t i = 0; i < golden.size(); ++i) {
        LoggedRequest r;
        r.id = "req-" + std::to_string(i + 1);
        r.utterance = golden[i].utterance;
        if (auto fired = corpus.rules.fire(r.utterance)) {
            r.predicted_frame = *fired;
            r.intent_confidence = model.tiers().exact;
        } else {
            const Prediction p = model.predict(r.utterance);
            r.predicted_frame = p.frame;
            r.intent_confidence = p.intent_confidence;
        }
        if (log_rng.chance(config.prediction_noise)) {
            r.predicted_frame = corrupt_frame(golden[i].frame, corpus.ontology, log_rng);
            r.intent_confidence = 0.05 + 0.9 * log_rng.unit();
        }
        // Heavy-tailed frequency: most texts are seen once.
        r.frequency = 1 + static_cast<std::int64_t>(std::floor(std::pow(log_rng.unit(), 4.0) * 50.0));
        r.timestamp = config.window_start + static_cast<Timestamp>(log_rng.below(static_cast<std::uint64_t>(config.window_length)));
        const bool wrong = is_bug(golden[i].frame, r.predicted_frame, corpus.ontology);
        if (log_rng.chance(wrong ? config.fail_if_bug : config.fail_if_correct)) {
            r.final_dialog_act = DialogAct::Error;
        } else if (!wrong && log_rng.chance(config.other_act_rate)) {
            r.final_dialog_act = DialogAct::Other;
        } else {
            r.final_dialog_act = DialogAct::Inform;
        }
        corpus.pool.push_back(std::move(r));
        corpus.pool_golden.push_back(golden[i].frame);
    }
    return corpus;
}

} // namespace nlufix
