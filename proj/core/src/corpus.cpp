#include "iqascore/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iqascore/errors.hpp"
#include "iqascore/rng.hpp"

namespace iqascore {

using nlohmann::json;

std::string_view to_string(Speaker s) {
    return s == Speaker::Teacher ? "teacher" : "student";
}

Speaker speaker_from_string(std::string_view s) {
    if (s == "teacher") return Speaker::Teacher;
    if (s == "student") return Speaker::Student;
    throw ParseError("unknown speaker '" + std::string(s) + "' (expected \"teacher\" or \"student\")");
}

std::string_view to_string(Segment s) {
    switch (s) {
    case Segment::A: return "A";
    case Segment::B: return "B";
    default: return "unassigned";
    }
}

Segment segment_from_string(std::string_view s) {
    if (s == "A") return Segment::A;
    if (s == "B") return Segment::B;
    if (s == "unassigned") return Segment::Unassigned;
    throw ParseError("unknown segment '" + std::string(s) + "' (expected \"A\" or \"B\")");
}

Segment other_segment(Segment s) {
    if (s == Segment::A) return Segment::B;
    if (s == Segment::B) return Segment::A;
    throw UsageError("segment is unassigned; run the segment split first");
}

std::string render_turn(const Turn& turn) {
    std::string line = turn.speaker == Speaker::Teacher ? "Teacher: " : "Student: ";
    line += turn.text;
    return line;
}

std::string render_dialogue(std::span<const Turn> turns) {
    std::string out;
    for (const Turn& turn : turns) {
        if (!out.empty()) out += '\n';
        out += render_turn(turn);
    }
    return out;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t begin = 0;
    while (begin < s.size() && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    std::size_t end = s.size();
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
}

struct CorpusLine {
    std::string transcript_id;
    Turn turn;
};

CorpusLine parse_line(const std::string& line, long line_number) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError("line " + std::to_string(line_number) + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw ParseError("line " + std::to_string(line_number) + ": expected a JSON object");
    }
    try {
        CorpusLine out;
        out.transcript_id = j.at("transcript_id").get<std::string>();
        out.turn.index = j.at("turn_index").get<int>();
        out.turn.speaker = speaker_from_string(j.at("speaker").get<std::string>());
        out.turn.text = trim(j.at("text").get<std::string>());
        if (j.contains("atm_codes")) {
            for (const auto& code : j.at("atm_codes")) {
                out.turn.atm_codes.insert(code.get<std::string>());
            }
        }
        if (out.transcript_id.empty()) {
            throw ParseError("line " + std::to_string(line_number) + ": empty transcript_id");
        }
        if (out.turn.text.empty()) {
            throw StructuralError("line " + std::to_string(line_number) + ": turn text is empty after trimming");
        }
        if (out.turn.index < 0) {
            throw StructuralError("line " + std::to_string(line_number) + ": negative turn_index");
        }
        return out;
    } catch (const json::exception& e) {
        throw ParseError("line " + std::to_string(line_number) + ": " + e.what());
    }
}

} // namespace

std::vector<Transcript> read_corpus(std::istream& in) {
    std::vector<Transcript> corpus;
    std::set<std::string> finished_ids;
    std::string line;
    long line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        CorpusLine parsed = parse_line(line, line_number);
        if (corpus.empty() || corpus.back().id != parsed.transcript_id) {
            if (finished_ids.count(parsed.transcript_id) > 0) {
                throw StructuralError("line " + std::to_string(line_number) + ": turns for transcript '" +
                                      parsed.transcript_id + "' are not contiguous in the document");
            }
            if (!corpus.empty()) finished_ids.insert(corpus.back().id);
            corpus.push_back(Transcript{parsed.transcript_id, {}, Segment::Unassigned});
        }
        Transcript& current = corpus.back();
        const int expected = static_cast<int>(current.turns.size());
        if (parsed.turn.index != expected) {
            throw StructuralError("line " + std::to_string(line_number) + ": transcript '" + parsed.transcript_id +
                                  "' has non-contiguous turn indices (expected " + std::to_string(expected) +
                                  ", got " + std::to_string(parsed.turn.index) + ")");
        }
        current.turns.push_back(std::move(parsed.turn));
    }
    return corpus;
}

Transcript parse_transcript(std::istream& in) {
    std::vector<Transcript> corpus = read_corpus(in);
    if (corpus.empty()) {
        throw StructuralError("transcript document has no turns");
    }
    if (corpus.size() > 1) {
        throw StructuralError("expected a single transcript, found " + std::to_string(corpus.size()));
    }
    return std::move(corpus.front());
}

Transcript parse_transcript(std::string_view document) {
    std::istringstream in{std::string(document)};
    return parse_transcript(in);
}

std::vector<Transcript> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open corpus file: " + path.string());
    std::vector<Transcript> corpus = read_corpus(in);
    if (corpus.empty()) throw StructuralError("corpus file has no turns: " + path.string());
    return corpus;
}

void write_corpus(std::ostream& out, std::span<const Transcript> corpus) {
    for (const Transcript& t : corpus) {
        for (const Turn& turn : t.turns) {
            json j{
                {"transcript_id", t.id},
                {"turn_index", turn.index},
                {"speaker", std::string(to_string(turn.speaker))},
                {"text", turn.text},
                {"atm_codes", turn.atm_codes},
            };
            out << j.dump() << '\n';
        }
    }
}

void save_corpus(const std::filesystem::path& path, std::span<const Transcript> corpus) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write corpus file: " + path.string());
    write_corpus(out, corpus);
}

std::vector<Excerpt> chunk_by_token_budget(const Transcript& transcript, long budget,
                                           const Tokenizer& tokenizer) {
    if (budget < 1) throw UsageError("token budget must be >= 1");

    std::vector<Excerpt> excerpts;
    Excerpt current{transcript.id, {}, 0};
    long current_tokens = 0;

    auto flush = [&] {
        if (current.turns.empty()) return;
        current.token_count = tokenizer.count(render_dialogue(current.turns));
        excerpts.push_back(std::move(current));
        current = Excerpt{transcript.id, {}, 0};
        current_tokens = 0;
    };

    for (const Turn& turn : transcript.turns) {
        const long turn_tokens = tokenizer.count(render_turn(turn));
        if (!current.turns.empty() && current_tokens + turn_tokens > budget) {
            flush();
        }
        // an oversize turn becomes a singleton excerpt rather than being split
        current.turns.push_back(turn);
        current_tokens += turn_tokens;
        if (current_tokens > budget) {
            flush();
        }
    }
    flush();
    return excerpts;
}

std::vector<TurnWindow> sliding_turn_windows(const Transcript& transcript) {
    std::vector<TurnWindow> windows;
    windows.reserve(transcript.turns.size());
    for (std::size_t i = 0; i < transcript.turns.size(); ++i) {
        TurnWindow window;
        window.target = transcript.turns[i];
        const std::size_t begin = i >= kWindowHistoryTurns ? i - kWindowHistoryTurns : 0;
        window.history.assign(transcript.turns.begin() + begin, transcript.turns.begin() + i);
        windows.push_back(std::move(window));
    }
    return windows;
}

std::vector<Transcript> split_segments(std::vector<Transcript> corpus, std::uint64_t seed) {
    if (corpus.empty()) throw UsageError("cannot split an empty corpus");
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix64(seed));
    rng.shuffle(order);
    const std::size_t a_size = (corpus.size() + 1) / 2;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        corpus[order[rank]].segment = rank < a_size ? Segment::A : Segment::B;
    }
    return corpus;
}

void write_segments(std::ostream& out, std::span<const Transcript> corpus) {
    json assignments = json::object();
    for (const Transcript& t : corpus) {
        if (t.segment == Segment::Unassigned) {
            throw UsageError("transcript '" + t.id + "' has no segment assignment");
        }
        assignments[t.id] = std::string(to_string(t.segment));
    }
    out << json{{"assignments", assignments}}.dump(2) << '\n';
}

std::map<std::string, Segment> read_segments(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed segments file: ") + e.what());
    }
    std::map<std::string, Segment> out;
    try {
        for (const auto& [id, seg] : j.at("assignments").items()) {
            out[id] = segment_from_string(seg.get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed segments file: ") + e.what());
    }
    return out;
}

std::map<std::string, Segment> load_segments(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open segments file: " + path.string());
    return read_segments(in);
}

void apply_segments(std::vector<Transcript>& corpus, const std::map<std::string, Segment>& assignments) {
    for (Transcript& t : corpus) {
        auto it = assignments.find(t.id);
        if (it == assignments.end()) {
            throw UsageError("segments file has no assignment for transcript '" + t.id + "'");
        }
        t.segment = it->second;
    }
}

} // namespace iqascore
