#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "iqascore/promptkit.hpp"

namespace iqascore {

/// Metadata keys attached to completion requests. Real backends ignore
/// them; the mock backend uses them to locate gold answers, and they
/// make request logs auditable.
namespace meta {
inline constexpr char kTranscriptId[] = "transcript_id";
inline constexpr char kDimension[] = "dimension";
inline constexpr char kFormulation[] = "formulation";
inline constexpr char kRun[] = "run";
inline constexpr char kTurnBegin[] = "turn_begin"; // context turn range [begin, end)
inline constexpr char kTurnEnd[] = "turn_end";
inline constexpr char kTargetTurn[] = "target_turn"; // BC window target
} // namespace meta

struct CompletionRequest {
    std::string prompt; // non-empty
    int max_new_tokens = 256;
    double temperature = -1.0; // negative: use the backend's own default
    std::map<std::string, std::string> metadata;
};

struct CompletionResponse {
    std::string raw_text;
    double latency_seconds = 0.0;
    std::string backend_id;
};

/// Text-completion backend. Implementations must be safe for
/// concurrent complete() calls up to their configured parallelism.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;

    /// Returns the raw completion. Throws BackendError on transport
    /// failures (after retries), ConfigError on rejected requests,
    /// UsageError on malformed requests.
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;

    virtual std::string id() const = 0;
};

/// A model answer reduced to the shape its formulation expects. On
/// parse failure the conservative default is kept: score 1, count 0,
/// "no", empty extraction — biased toward "observation absent".
struct ParsedAnswer {
    TaskFormulation formulation = TaskFormulation::DirectScore;
    bool parse_failed = false;

    int score = 1;                    // DS
    long count = 0;                   // DC
    bool yes = false;                 // BC
    std::vector<int> extracted_turns; // EC: turn indices within the context's transcript
};

/// Total function from raw completion text to a structured answer:
///   DS: first integer in 1..4 anywhere in the text;
///   DC: first non-negative integer;
///   BC: first standalone "yes"/"no" token, case-insensitive;
///   EC: lines matched back to context turns by normalized substring
///       containment (>= 20 characters, or exact equality for shorter
///       turns), deduplicated, capped at 3.
/// Unparseable text sets parse_failed and the conservative default;
/// nothing throws, so batch runs never abort on one bad completion.
ParsedAnswer parse_response(TaskFormulation formulation, std::string_view raw,
                            const PromptContext& context);

/// Lowercases, strips punctuation, collapses whitespace. Exposed for
/// tests of the EC match-back rule.
std::string normalize_for_match(std::string_view text);

} // namespace iqascore
