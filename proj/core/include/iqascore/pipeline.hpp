#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iqascore/corpus.hpp"
#include "iqascore/llm.hpp"
#include "iqascore/promptkit.hpp"
#include "iqascore/rubric.hpp"

namespace iqascore {

enum class ContextRegime { Full, TokenBudget, Window };

/// One scoring strategy: task formulation x context regime x few-shot
/// setting, named canonically as "tf-cl-fs" (e.g. "EC-1k-10s").
struct ApproachSpec {
    TaskFormulation formulation = TaskFormulation::DirectScore;
    ContextRegime regime = ContextRegime::Full;
    long token_budget = 0; // when regime == TokenBudget
    int shots = 0;         // 0 or 10

    std::string name() const;

    /// Parses a canonical name and validates the combination:
    /// BC pairs with the turn window, DS with the full transcript (and
    /// never takes examples), DC/EC with full or a token budget, and
    /// 10-shot requires a budgeted DC/EC or BC. Throws UsageError
    /// listing the canonical approaches otherwise.
    static ApproachSpec parse(std::string_view name);

    /// The nine studied approach names.
    static const std::vector<std::string>& canonical_names();
};

/// Per-dimension observations from one run.
struct DimensionRun {
    std::optional<long> raw_count; // absent for DS
    int score = 1;
    int parse_failures = 0;
    int calls = 0;
    std::vector<std::string> raw_outputs; // every raw completion, for audit
};

struct RunResult {
    int run_index = 0;
    std::map<std::string, DimensionRun> per_dimension; // keyed by scoring dimension id
};

inline constexpr int kRunsPerTranscript = 3;

struct PredictionRecord {
    std::string transcript_id;
    std::string approach;
    std::vector<RunResult> runs;            // exactly 3
    std::map<std::string, int> final_scores; // reported dimensions (S4 combined)
    std::optional<int> final_s4a;
    std::optional<int> final_s4b;
    double inference_seconds = 0.0; // mean per-run wall time for this transcript
};

/// Majority vote across three runs: a value held by at least two runs
/// wins; with three distinct values the mean is rounded to the nearest
/// integer (the mean of three integers is never a half-way case).
Score majority_vote(const std::array<Score, 3>& scores);

/// Few-shot sets keyed by (dimension id, source segment).
class FewShotLibrary {
public:
    void add(FewShotSet set);
    const FewShotSet* find(std::string_view dimension_id, Segment source_segment) const;
    bool empty() const { return sets_.empty(); }

private:
    std::map<std::pair<std::string, int>, FewShotSet> sets_;
};

struct RunOptions {
    int parallelism = 1; // dimension-level fan-out within a run
    int max_new_tokens = 256;
    double temperature = -1.0;
    const Tokenizer* tokenizer = nullptr; // default_tokenizer() when null
};

/// Scores one transcript with one approach: builds contexts per the
/// regime, issues completions per dimension per run (re-querying once
/// on parse failure), sums counting answers, maps counts to scores,
/// majority-votes each dimension and combines S4a/S4b into S4.
PredictionRecord score_transcript(const ApproachSpec& approach, const Transcript& transcript,
                                  std::span<const Dimension> dimensions, CompletionBackend& backend,
                                  const FewShotLibrary* shots = nullptr,
                                  const RunOptions& options = {});

struct ExperimentResult {
    std::vector<PredictionRecord> records;
    std::vector<std::pair<std::string, std::string>> failures; // (transcript id, error)
    long total_backend_calls = 0;
    double avg_inference_seconds = 0.0;
};

/// Runs an approach over a whole corpus, aggregating per-transcript
/// failures instead of aborting the batch.
ExperimentResult run_experiment(const ApproachSpec& approach, std::span<const Transcript> corpus,
                                std::span<const Dimension> dimensions, CompletionBackend& backend,
                                const FewShotLibrary* shots = nullptr,
                                const RunOptions& options = {});

// Prediction records as JSONL, one line per (transcript, approach).
void write_records(std::ostream& out, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_records(std::istream& in);
std::vector<PredictionRecord> load_records(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, std::span<const PredictionRecord> records);

} // namespace iqascore
