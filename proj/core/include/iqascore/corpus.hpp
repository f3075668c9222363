#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iqascore/tokenizer.hpp"

namespace iqascore {

enum class Speaker { Teacher, Student };

std::string_view to_string(Speaker s);
Speaker speaker_from_string(std::string_view s);

/// One speaker's contiguous utterance, optionally annotated with
/// discourse-code labels used as gold truth.
struct Turn {
    int index = 0; // 0-based, contiguous within a transcript
    Speaker speaker = Speaker::Teacher;
    std::string text; // non-empty after trimming
    std::set<std::string> atm_codes;
};

enum class Segment { A, B, Unassigned };

std::string_view to_string(Segment s);
Segment segment_from_string(std::string_view s);
Segment other_segment(Segment s);

struct Transcript {
    std::string id;
    std::vector<Turn> turns; // at least 1, indices contiguous from 0
    Segment segment = Segment::Unassigned;
};

/// Contiguous run of turns fitting a token budget.
struct Excerpt {
    std::string transcript_id;
    std::vector<Turn> turns;
    long token_count = 0;
};

/// A target turn plus up to 4 immediately preceding turns.
struct TurnWindow {
    Turn target;
    std::vector<Turn> history;
};

inline constexpr int kWindowHistoryTurns = 4;

/// "Teacher: <text>" line used in prompts and for token accounting.
std::string render_turn(const Turn& turn);

/// Newline-joined rendering of a run of turns.
std::string render_dialogue(std::span<const Turn> turns);

// --- corpus document I/O -------------------------------------------------
//
// Corpus files are JSONL, one turn per line:
//   {"transcript_id": str, "turn_index": int, "speaker": "teacher"|"student",
//    "text": str, "atm_codes": [str]}
// Turns of a transcript must appear contiguously and in index order.

/// Parses a single-transcript document. Throws ParseError (naming the
/// line) on malformed lines and StructuralError on invariant violations
/// ("no turns", duplicated or non-contiguous indices).
Transcript parse_transcript(std::istream& in);
Transcript parse_transcript(std::string_view document);

std::vector<Transcript> read_corpus(std::istream& in);
std::vector<Transcript> load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, std::span<const Transcript> corpus);
void save_corpus(const std::filesystem::path& path, std::span<const Transcript> corpus);

// --- chunking and windows ------------------------------------------------

/// Greedy left-to-right packing at turn boundaries. Every excerpt stays
/// within `budget` tokens unless it consists of exactly one oversize
/// turn; concatenating the excerpts reproduces the transcript.
std::vector<Excerpt> chunk_by_token_budget(const Transcript& transcript, long budget,
                                           const Tokenizer& tokenizer = default_tokenizer());

/// One window per turn; window i targets turn i with history
/// turns max(0, i-4)..i-1.
std::vector<TurnWindow> sliding_turn_windows(const Transcript& transcript);

// --- segmentation ----------------------------------------------------------

/// Seeded unstratified half-split into segments A and B. |A| and |B|
/// differ by at most one; deterministic for a fixed seed.
std::vector<Transcript> split_segments(std::vector<Transcript> corpus, std::uint64_t seed);

/// Segment assignments as a standalone artifact: {"assignments": {id: "A"|"B"}}.
void write_segments(std::ostream& out, std::span<const Transcript> corpus);
std::map<std::string, Segment> read_segments(std::istream& in);
std::map<std::string, Segment> load_segments(const std::filesystem::path& path);
void apply_segments(std::vector<Transcript>& corpus, const std::map<std::string, Segment>& assignments);

} // namespace iqascore
