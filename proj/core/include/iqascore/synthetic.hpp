#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "iqascore/corpus.hpp"

namespace iqascore {

/// Planting plan for one dimension. Per transcript, a gold score
/// category is drawn from `score_weights` and the matching number of
/// positive codes is planted on distinct eligible turns (score 4 plants
/// 3 plus up to `max_extra_over_three` more, so uncapped counts exceed
/// the rubric ceiling). Weak codes are planted independently per turn.
struct DimensionPlan {
    std::string dimension_id;
    std::string positive_code;
    std::string hard_negative_code; // empty for dimensions without one
    Speaker positive_speaker = Speaker::Student;
    std::array<double, 4> score_weights{1.0, 0.0, 0.0, 0.0}; // scores 1..4, each in [0,1]
    int max_extra_over_three = 4;
    double hard_negative_rate = 0.0; // per eligible turn, in [0,1]
};

struct GeneratorSpec {
    int transcript_count = 112;
    int min_turns = 40;
    int max_turns = 200;
    int min_words_per_turn = 8;
    int max_words_per_turn = 45;
    std::vector<DimensionPlan> plans;

    /// Plans for the five built-in dimensions with a skewed score mix
    /// (mostly-low teacher linking, mostly-high pressing) so evaluation
    /// metrics see all four score categories.
    static GeneratorSpec default_spec();

    /// Same dimensions with every rate zeroed: nothing is planted.
    static GeneratorSpec empty_spec();
};

/// What the generator planted, reported next to the corpus.
struct GoldReport {
    // dimension id -> transcript id -> planted positive-turn count
    std::map<std::string, std::map<std::string, int>> gold_counts;
    // dimension id -> histogram of gold scores 1..4
    std::map<std::string, std::array<int, 4>> score_histogram;
};

struct GeneratedCorpus {
    std::vector<Transcript> transcripts;
    GoldReport report;
};

/// Deterministic per (spec, seed). Throws UsageError on rates or
/// weights outside [0,1] and on empty/invalid ranges.
GeneratedCorpus generate_synthetic_corpus(const GeneratorSpec& spec, std::uint64_t seed);

// Generator spec I/O (JSON), so experiments can pin their corpus shape.
GeneratorSpec read_generator_spec(std::istream& in);
GeneratorSpec load_generator_spec(const std::filesystem::path& path);
void write_gold_report(std::ostream& out, const GoldReport& report, std::uint64_t seed);

} // namespace iqascore
