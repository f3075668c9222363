#include "iqascore/rubric.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "iqascore/errors.hpp"

namespace iqascore {

using nlohmann::json;

Score::Score(int value) : value_(value) {
    if (value < 1 || value > 4) {
        throw UsageError("score must be in 1..4, got " + std::to_string(value));
    }
}

Score count_to_score(long count) {
    if (count < 0) throw UsageError("observation count must be non-negative");
    return Score(static_cast<int>(std::min<long>(count, 3)) + 1);
}

Score combine_s4(Score text_evidence, Score explanation) {
    return std::max(text_evidence, explanation);
}

int gold_turn_count(std::span<const Turn> turns, const Dimension& dimension) {
    int count = 0;
    for (const Turn& turn : turns) {
        const bool positive = std::any_of(turn.atm_codes.begin(), turn.atm_codes.end(),
                                          [&](const std::string& code) {
                                              return dimension.positive_codes.count(code) > 0;
                                          });
        if (positive) ++count;
    }
    return count;
}

int gold_turn_count(const Transcript& transcript, const Dimension& dimension) {
    return gold_turn_count(std::span<const Turn>(transcript.turns), dimension);
}

int gold_turn_count(const Excerpt& excerpt, const Dimension& dimension) {
    return gold_turn_count(std::span<const Turn>(excerpt.turns), dimension);
}

Score gold_score(const Transcript& transcript, const Dimension& dimension) {
    return count_to_score(gold_turn_count(transcript, dimension));
}

namespace {

Dimension make_s1() {
    return Dimension{
        "S1",
        "Teacher links Students' contributions",
        "Did the Teacher support Students in connecting ideas and positions to build "
        "coherence in the discussion about a text?",
        "4: 3 or more times during the lesson, the Teacher connects Students' contributions "
        "to each other and shows how ideas and positions shared during the discussion relate "
        "to each other.\n"
        "3: Twice during the lesson, the Teacher connects Students' contributions to each "
        "other and shows how the shared ideas and positions relate to each other.\n"
        "2: Once during the lesson, the Teacher connects Students' contributions to each "
        "other and shows how they relate, OR the Teacher links contributions to each other "
        "but does not show how ideas and positions relate to each other (re-stating).\n"
        "1: The Teacher does not make any effort to link or revoice contributions.",
        {"Recap or Synthesize S Ideas"},
        {},
    };
}

Dimension make_s2() {
    return Dimension{
        "S2",
        "Teacher presses Students",
        "Did the Teacher press Students to support their contributions with evidence "
        "and/or reasoning?",
        "4: 3 or more times during the lesson, the Teacher asks Students academically "
        "relevant questions, which may include asking Students to provide evidence for "
        "their contributions, pressing Students for accuracy, or asking Students to explain "
        "their reasoning.\n"
        "3: Twice during the lesson, the Teacher asks Students academically relevant "
        "questions that press for evidence, accuracy, or reasoning.\n"
        "2: Once during the lesson, the Teacher asks such a question, OR there are "
        "superficial, trivial, or formulaic efforts to ask Students to provide evidence for "
        "their contributions or to explain their reasoning.\n"
        "1: There are no efforts to ask Students to provide evidence for their contributions "
        "or to explain their reasoning.",
        {"Press"},
        {},
    };
}

Dimension make_s3() {
    return Dimension{
        "S3",
        "Student links other's contributions",
        "Did Students' contributions link to and build on each other during the discussion "
        "about a text?",
        "4: 3 or more times during the lesson, Students connect their contributions to each "
        "other and show how ideas and positions shared during the discussion relate to each "
        "other.\n"
        "3: Twice during the lesson, Students connect their contributions to each other and "
        "show how the shared ideas and positions relate to each other.\n"
        "2: Once during the lesson, Students connect their contributions and show how they "
        "relate, OR the Students link contributions to each other but do not show how ideas "
        "and positions relate to each other (re-stating).\n"
        "1: The Students do not make any effort to link or revoice contributions.",
        {"Strong Link"},
        {"Weak Link"},
    };
}

Dimension make_s4a() {
    return Dimension{
        "S4a",
        "Student provides text-based evidence",
        "Did Students support their contributions with text-based evidence?",
        "4: 3 or more times during the lesson, Students provide specific, accurate, and "
        "appropriate evidence for their claims in the form of references to the text.\n"
        "3: Twice during the lesson, Students provide specific, accurate, and appropriate "
        "text-based evidence for their claims.\n"
        "2: Once during the lesson, Students provide such evidence, OR there are superficial "
        "or trivial efforts to provide evidence.\n"
        "1: Students do not back up their claims.",
        {"Strong Text-based Evidence"},
        {"Weak Text-based Evidence"},
    };
}

Dimension make_s4b() {
    return Dimension{
        "S4b",
        "Student provides explanation",
        "Did Students support their contributions with reasoning?",
        "4: 3 or more times during the lesson, Students offer extended and clear "
        "explanations of their thinking.\n"
        "3: Twice during the lesson, Students offer extended and clear explanations of "
        "their thinking.\n"
        "2: Once during the lesson, Students offer such an explanation, OR there are "
        "superficial or trivial efforts to provide explanation.\n"
        "1: Students do not explain their thinking or reasoning.",
        {"Strong Explanation"},
        {"Weak Explanation"},
    };
}

} // namespace

const std::vector<Dimension>& builtin_dimensions() {
    static const std::vector<Dimension> dimensions = {
        make_s1(), make_s2(), make_s3(), make_s4a(), make_s4b(),
    };
    return dimensions;
}

const Dimension& find_dimension(std::span<const Dimension> dimensions, std::string_view id) {
    for (const Dimension& d : dimensions) {
        if (d.id == id) return d;
    }
    throw UsageError("unknown dimension id '" + std::string(id) + "'");
}

std::vector<std::string> reported_dimension_ids(std::span<const Dimension> dimensions) {
    std::vector<std::string> ids;
    bool has_s4a = false;
    bool has_s4b = false;
    for (const Dimension& d : dimensions) {
        if (d.id == kS4aId) {
            has_s4a = true;
        } else if (d.id == kS4bId) {
            has_s4b = true;
        } else {
            ids.push_back(d.id);
        }
    }
    if (has_s4a && has_s4b) {
        ids.push_back(std::string(kS4Id));
    } else if (has_s4a || has_s4b) {
        // an unpaired component is reported as itself
        ids.push_back(has_s4a ? std::string(kS4aId) : std::string(kS4bId));
    }
    return ids;
}

void validate_dimension(const Dimension& dimension) {
    if (dimension.id.empty()) throw StructuralError("dimension id is empty");
    if (dimension.positive_codes.empty()) {
        throw StructuralError("dimension '" + dimension.id + "' has no positive codes");
    }
    for (const std::string& code : dimension.hard_negative_codes) {
        if (dimension.positive_codes.count(code) > 0) {
            throw StructuralError("dimension '" + dimension.id + "': code '" + code +
                                  "' is both positive and hard-negative");
        }
    }
    // the instruction must describe scores 4 down to 1
    std::size_t at = 0;
    for (const char* label : {"4:", "3:", "2:", "1:"}) {
        const std::size_t pos = dimension.scoring_instruction.find(label, at);
        if (pos == std::string::npos) {
            throw StructuralError("dimension '" + dimension.id +
                                  "': scoring_instruction must describe scores 4 down to 1");
        }
        at = pos + 2;
    }
}

std::vector<Dimension> read_rubric(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed rubric file: ") + e.what());
    }
    if (!j.is_array()) throw ParseError("rubric file must be a JSON array of dimensions");
    std::vector<Dimension> dimensions;
    for (const auto& entry : j) {
        Dimension d;
        try {
            d.id = entry.at("id").get<std::string>();
            d.name = entry.at("name").get<std::string>();
            d.iqa_description = entry.at("iqa_description").get<std::string>();
            d.scoring_instruction = entry.at("scoring_instruction").get<std::string>();
            for (const auto& code : entry.at("positive_codes")) {
                d.positive_codes.insert(code.get<std::string>());
            }
            if (entry.contains("hard_negative_codes")) {
                for (const auto& code : entry.at("hard_negative_codes")) {
                    d.hard_negative_codes.insert(code.get<std::string>());
                }
            }
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed rubric entry: ") + e.what());
        }
        validate_dimension(d);
        dimensions.push_back(std::move(d));
    }
    if (dimensions.empty()) throw StructuralError("rubric file defines no dimensions");
    return dimensions;
}

std::vector<Dimension> load_rubric(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open rubric file: " + path.string());
    return read_rubric(in);
}

void write_rubric(std::ostream& out, std::span<const Dimension> dimensions) {
    json j = json::array();
    for (const Dimension& d : dimensions) {
        j.push_back(json{
            {"id", d.id},
            {"name", d.name},
            {"iqa_description", d.iqa_description},
            {"scoring_instruction", d.scoring_instruction},
            {"positive_codes", d.positive_codes},
            {"hard_negative_codes", d.hard_negative_codes},
        });
    }
    out << j.dump(2) << '\n';
}

} // namespace iqascore
