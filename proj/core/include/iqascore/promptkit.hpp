#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iqascore/corpus.hpp"
#include "iqascore/rubric.hpp"
#include "iqascore/tokenizer.hpp"

namespace iqascore {

/// The four ways the scoring goal is posed to the model.
enum class TaskFormulation {
    DirectScore,        // DS: one 1-4 score for the whole transcript
    DirectCounting,     // DC: count observation occurrences in a dialogue
    ExtractiveCounting, // EC: quote up to 3 qualifying turns
    BinaryCounting,     // BC: yes/no for a single turn with history
};

std::string_view to_string(TaskFormulation f); // "DS", "DC", "EC", "BC"
TaskFormulation formulation_from_string(std::string_view s);

/// Dialogue context handed to a prompt. Window contexts carry the
/// history turns followed by the target turn (always last).
struct PromptContext {
    enum class Kind { Full, Excerpt, Window };

    Kind kind = Kind::Full;
    std::string transcript_id;
    std::vector<Turn> turns;
    int excerpt_index = -1; // position within the chunking, when kind == Excerpt

    const Turn& target() const; // Window only
    std::span<const Turn> history() const;
};

PromptContext full_context(const Transcript& transcript);
PromptContext excerpt_context(const Excerpt& excerpt, int excerpt_index);
PromptContext window_context(const TurnWindow& window, std::string transcript_id);

/// One labeled dialogue with its gold answer in the shape the
/// formulation expects.
struct FewShotExample {
    enum class AnswerKind { Count, ExtractedTurns, YesNo };

    std::string dialogue_text;
    AnswerKind answer_kind = AnswerKind::Count;
    int count_answer = 0;
    std::vector<std::string> extracted_answer; // "Speaker: text" lines
    bool yes_answer = false;

    // provenance, for audits and leakage checks
    std::string source_transcript_id;
    std::pair<int, int> source_turn_span{0, 0}; // [begin, end)
};

/// A fixed set of exactly 10 examples sampled from one segment.
struct FewShotSet {
    std::string dimension_id;
    TaskFormulation formulation = TaskFormulation::DirectCounting;
    Segment source_segment = Segment::Unassigned;
    std::vector<FewShotExample> examples;
};

inline constexpr int kFewShotExampleCount = 10;
inline constexpr long kFewShotExampleTokenCap = 700;
inline constexpr int kExtractionCap = 3;

struct SamplerOptions {
    int max_attempts = 10000;
    long example_token_budget = kFewShotExampleTokenCap;
    const Tokenizer* tokenizer = nullptr; // default_tokenizer() when null
};

/// Rejection sampler over one segment's transcripts. Indexes the pool
/// once (token prefix sums, per-dimension turn classes) so repeated
/// sampling stays cheap. The pool span must outlive the sampler.
/// Sampling is pure per (dimension, formulation, seed) and safe to call
/// concurrently.
class FewShotSampler {
public:
    explicit FewShotSampler(std::span<const Transcript> pool, const SamplerOptions& options = {});
    ~FewShotSampler();
    FewShotSampler(FewShotSampler&&) noexcept;
    FewShotSampler& operator=(FewShotSampler&&) noexcept;

    Segment segment() const;

    /// Binary-counting example sets: 5 positive / 5 negative windows
    /// for dimensions without hard negatives, otherwise 4 positive /
    /// 3 hard-negative / 3 easy-negative (hard negatives carry a weak
    /// code on the target turn). Throws SamplingError naming the class
    /// that cannot be filled.
    FewShotSet sample_bc(const Dimension& dimension, std::uint64_t seed) const;

    /// Counting example sets for DC or EC: two excerpts per observation
    /// count k in 0..3 plus two unrestricted ones, each within the
    /// example token budget. EC answers list the qualifying turns (at
    /// most 3).
    FewShotSet sample_counting(const Dimension& dimension, TaskFormulation formulation,
                               std::uint64_t seed) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot conveniences over FewShotSampler.
FewShotSet sample_fewshot_bc(std::span<const Transcript> pool, const Dimension& dimension,
                             std::uint64_t seed, const SamplerOptions& options = {});
FewShotSet sample_fewshot_counting(std::span<const Transcript> pool, const Dimension& dimension,
                                   TaskFormulation formulation, std::uint64_t seed,
                                   const SamplerOptions& options = {});

/// Renders the complete prompt: instructions with the dimension's
/// description (and, for DS, its scoring criteria), any few-shot
/// examples in sampled order, then the query dialogue, ending on an
/// incomplete answer line for the model to finish. Throws UsageError
/// when the context shape does not fit the formulation.
std::string render_prompt(TaskFormulation formulation, const Dimension& dimension,
                          const PromptContext& context, const FewShotSet* shots = nullptr);

/// Renders just the dialogue of an example (used when sampling).
std::string render_example_dialogue(std::span<const Turn> turns);

// Few-shot set serialization, so sampled sets are fixed artifacts.
void write_fewshot_set(std::ostream& out, const FewShotSet& set);
FewShotSet read_fewshot_set(std::istream& in);
FewShotSet load_fewshot_set(const std::filesystem::path& path);
void save_fewshot_set(const std::filesystem::path& path, const FewShotSet& set);

} // namespace iqascore
