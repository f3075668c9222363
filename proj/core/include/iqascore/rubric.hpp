#pragma once

#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iqascore/corpus.hpp"

namespace iqascore {

/// Holistic 1-4 rubric score.
class Score {
public:
    explicit Score(int value);
    int value() const { return value_; }

    friend bool operator==(Score, Score) = default;
    friend auto operator<=>(Score, Score) = default;

private:
    int value_;
};

/// One rubric dimension: prompt text plus the discourse codes whose
/// turn-level presence defines the gold observation count.
///
/// The five built-in dimensions use ids "S1", "S2", "S3", "S4a", "S4b";
/// additional dimensions can be supplied through a rubric file without
/// code changes, so ids are open strings rather than an enum.
struct Dimension {
    std::string id;
    std::string name;
    std::string iqa_description;     // the question the dimension asks
    std::string scoring_instruction; // criteria for scores 4 down to 1
    std::set<std::string> positive_codes;
    std::set<std::string> hard_negative_codes; // possibly empty
};

inline constexpr std::string_view kS4aId = "S4a";
inline constexpr std::string_view kS4bId = "S4b";
inline constexpr std::string_view kS4Id = "S4";

/// Maps an observation count onto the rubric scale:
/// 0 -> 1, 1 -> 2, 2 -> 3, 3 or more -> 4.
Score count_to_score(long count);

/// The claims-with-evidence score is the better of its two components.
Score combine_s4(Score text_evidence, Score explanation);

/// Number of turns whose codes intersect the dimension's positive
/// codes. A turn counts at most once per dimension.
int gold_turn_count(std::span<const Turn> turns, const Dimension& dimension);
int gold_turn_count(const Transcript& transcript, const Dimension& dimension);
int gold_turn_count(const Excerpt& excerpt, const Dimension& dimension);

/// Gold score for a dimension, straight from the planted codes.
Score gold_score(const Transcript& transcript, const Dimension& dimension);

/// The five built-in dimensions with their code mappings.
const std::vector<Dimension>& builtin_dimensions();

const Dimension& find_dimension(std::span<const Dimension> dimensions, std::string_view id);

/// Ids used in reports: scoring dimensions as-is, except that an
/// S4a/S4b pair is reported as the single combined "S4".
std::vector<std::string> reported_dimension_ids(std::span<const Dimension> dimensions);

// Rubric definition file: JSON array of
//   {id, name, iqa_description, scoring_instruction, positive_codes,
//    hard_negative_codes}
std::vector<Dimension> read_rubric(std::istream& in);
std::vector<Dimension> load_rubric(const std::filesystem::path& path);
void write_rubric(std::ostream& out, std::span<const Dimension> dimensions);

/// Validates one dimension's invariants; throws StructuralError.
void validate_dimension(const Dimension& dimension);

} // namespace iqascore
