#include "iqascore/synthetic.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "iqascore/errors.hpp"
#include "iqascore/rng.hpp"
#include "iqascore/rubric.hpp"

namespace iqascore {

using nlohmann::json;

namespace {

const std::vector<std::string>& word_bank() {
    static const std::vector<std::string> words = {
        "the",     "story",    "character", "because",  "evidence", "think",   "page",
        "author",  "chapter",  "question",  "idea",     "reason",   "text",    "part",
        "feeling", "problem",  "beginning", "ending",   "different", "important", "maybe",
        "actually", "happened", "believe",  "explain",  "notice",   "wonder",  "change",
        "first",   "agree",    "describe",  "detail",   "sentence", "paragraph", "word",
        "point",   "example",  "connection", "meaning", "lesson",   "remember", "together",
        "answer",  "passage",  "section",   "moment",   "theme",    "setting",  "plot",
    };
    return words;
}

std::string synth_text(Rng& rng, int min_words, int max_words) {
    const auto& bank = word_bank();
    const int n = min_words + rng.below(max_words - min_words + 1);
    std::string text;
    for (int i = 0; i < n; ++i) {
        if (i > 0) text += ' ';
        std::string word = bank[rng.index(bank.size())];
        if (i == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
        text += word;
    }
    text += rng.bernoulli(0.2) ? '?' : '.';
    return text;
}

void validate_rate(double value, const std::string& what) {
    if (value < 0.0 || value > 1.0) {
        throw UsageError(what + " must be in [0, 1], got " + std::to_string(value));
    }
}

void validate(const GeneratorSpec& spec) {
    if (spec.transcript_count < 1) throw UsageError("transcript_count must be >= 1");
    if (spec.min_turns < 1 || spec.max_turns < spec.min_turns) {
        throw UsageError("invalid turn-count range");
    }
    if (spec.min_words_per_turn < 1 || spec.max_words_per_turn < spec.min_words_per_turn) {
        throw UsageError("invalid words-per-turn range");
    }
    for (const DimensionPlan& plan : spec.plans) {
        if (plan.dimension_id.empty()) throw UsageError("dimension plan without an id");
        if (plan.positive_code.empty()) {
            throw UsageError("dimension plan '" + plan.dimension_id + "' has no positive code");
        }
        double total = 0.0;
        for (double w : plan.score_weights) {
            validate_rate(w, "score weight for '" + plan.dimension_id + "'");
            total += w;
        }
        if (total <= 0.0) {
            throw UsageError("score weights for '" + plan.dimension_id + "' are all zero");
        }
        validate_rate(plan.hard_negative_rate, "hard-negative rate for '" + plan.dimension_id + "'");
        if (plan.max_extra_over_three < 0) {
            throw UsageError("max_extra_over_three must be >= 0");
        }
    }
}

} // namespace

GeneratorSpec GeneratorSpec::default_spec() {
    GeneratorSpec spec;
    // score mixes shaped like a real classroom corpus: teacher linking
    // and student linking are rare, pressing is routine, evidence mixed
    spec.plans = {
        {"S1", "Recap or Synthesize S Ideas", "", Speaker::Teacher, {0.62, 0.20, 0.08, 0.10}, 4, 0.0},
        {"S2", "Press", "", Speaker::Teacher, {0.07, 0.12, 0.10, 0.71}, 5, 0.0},
        {"S3", "Strong Link", "Weak Link", Speaker::Student, {0.64, 0.12, 0.12, 0.12}, 4, 0.06},
        {"S4a", "Strong Text-based Evidence", "Weak Text-based Evidence", Speaker::Student,
         {0.34, 0.15, 0.11, 0.40}, 4, 0.06},
        {"S4b", "Strong Explanation", "Weak Explanation", Speaker::Student,
         {0.38, 0.18, 0.12, 0.32}, 4, 0.06},
    };
    return spec;
}

GeneratorSpec GeneratorSpec::empty_spec() {
    GeneratorSpec spec = default_spec();
    for (DimensionPlan& plan : spec.plans) {
        plan.score_weights = {1.0, 0.0, 0.0, 0.0};
        plan.hard_negative_rate = 0.0;
    }
    return spec;
}

GeneratedCorpus generate_synthetic_corpus(const GeneratorSpec& spec, std::uint64_t seed) {
    validate(spec);
    GeneratedCorpus out;
    Rng rng(mix64(seed));

    for (int i = 0; i < spec.transcript_count; ++i) {
        Transcript t;
        char id[32];
        std::snprintf(id, sizeof(id), "synthetic-%04d", i);
        t.id = id;

        const int turn_count = spec.min_turns + rng.below(spec.max_turns - spec.min_turns + 1);
        Speaker speaker = Speaker::Teacher;
        for (int k = 0; k < turn_count; ++k) {
            Turn turn;
            turn.index = k;
            turn.speaker = speaker;
            turn.text = synth_text(rng, spec.min_words_per_turn, spec.max_words_per_turn);
            t.turns.push_back(std::move(turn));
            if (rng.bernoulli(0.65)) {
                speaker = speaker == Speaker::Teacher ? Speaker::Student : Speaker::Teacher;
            }
        }

        for (const DimensionPlan& plan : spec.plans) {
            std::vector<int> eligible;
            for (const Turn& turn : t.turns) {
                if (turn.speaker == plan.positive_speaker) eligible.push_back(turn.index);
            }

            const int score = 1 + static_cast<int>(rng.weighted(plan.score_weights));
            int count = score < 4 ? score - 1 : 3 + rng.below(plan.max_extra_over_three + 1);
            count = std::min<int>(count, static_cast<int>(eligible.size()));

            rng.shuffle(eligible);
            for (int c = 0; c < count; ++c) {
                t.turns[eligible[c]].atm_codes.insert(plan.positive_code);
            }
            if (!plan.hard_negative_code.empty() && plan.hard_negative_rate > 0.0) {
                for (std::size_t e = count; e < eligible.size(); ++e) {
                    if (rng.bernoulli(plan.hard_negative_rate)) {
                        t.turns[eligible[e]].atm_codes.insert(plan.hard_negative_code);
                    }
                }
            }

            out.report.gold_counts[plan.dimension_id][t.id] = count;
            auto& histogram = out.report.score_histogram[plan.dimension_id];
            histogram[count_to_score(count).value() - 1] += 1;
        }

        out.transcripts.push_back(std::move(t));
    }
    return out;
}

GeneratorSpec read_generator_spec(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed generator spec: ") + e.what());
    }
    GeneratorSpec spec = GeneratorSpec::default_spec();
    try {
        spec.transcript_count = j.value("transcript_count", spec.transcript_count);
        spec.min_turns = j.value("min_turns", spec.min_turns);
        spec.max_turns = j.value("max_turns", spec.max_turns);
        spec.min_words_per_turn = j.value("min_words_per_turn", spec.min_words_per_turn);
        spec.max_words_per_turn = j.value("max_words_per_turn", spec.max_words_per_turn);
        if (j.contains("plans")) {
            spec.plans.clear();
            for (const auto& p : j.at("plans")) {
                DimensionPlan plan;
                plan.dimension_id = p.at("dimension_id").get<std::string>();
                plan.positive_code = p.at("positive_code").get<std::string>();
                plan.hard_negative_code = p.value("hard_negative_code", std::string{});
                plan.positive_speaker = speaker_from_string(p.value("positive_speaker", "student"));
                const auto weights = p.at("score_weights");
                for (std::size_t i = 0; i < 4; ++i) plan.score_weights[i] = weights.at(i).get<double>();
                plan.max_extra_over_three = p.value("max_extra_over_three", plan.max_extra_over_three);
                plan.hard_negative_rate = p.value("hard_negative_rate", plan.hard_negative_rate);
                spec.plans.push_back(std::move(plan));
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed generator spec: ") + e.what());
    }
    validate(spec);
    return spec;
}

GeneratorSpec load_generator_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open generator spec: " + path.string());
    return read_generator_spec(in);
}

void write_gold_report(std::ostream& out, const GoldReport& report, std::uint64_t seed) {
    json counts = json::object();
    for (const auto& [dim, per_transcript] : report.gold_counts) {
        counts[dim] = per_transcript;
    }
    json histogram = json::object();
    for (const auto& [dim, hist] : report.score_histogram) {
        histogram[dim] = hist;
    }
    out << json{{"seed", seed}, {"gold_counts", counts}, {"score_histogram", histogram}}.dump(2)
        << '\n';
}

} // namespace iqascore
