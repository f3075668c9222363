#include "iqascore/promptkit.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "iqascore/errors.hpp"
#include "iqascore/rng.hpp"

namespace iqascore {

using nlohmann::json;

std::string_view to_string(TaskFormulation f) {
    switch (f) {
    case TaskFormulation::DirectScore: return "DS";
    case TaskFormulation::DirectCounting: return "DC";
    case TaskFormulation::ExtractiveCounting: return "EC";
    case TaskFormulation::BinaryCounting: return "BC";
    }
    throw UsageError("invalid task formulation");
}

TaskFormulation formulation_from_string(std::string_view s) {
    if (s == "DS") return TaskFormulation::DirectScore;
    if (s == "DC") return TaskFormulation::DirectCounting;
    if (s == "EC") return TaskFormulation::ExtractiveCounting;
    if (s == "BC") return TaskFormulation::BinaryCounting;
    throw UsageError("unknown task formulation '" + std::string(s) + "' (expected DS, DC, EC or BC)");
}

const Turn& PromptContext::target() const {
    if (kind != Kind::Window || turns.empty()) {
        throw UsageError("target() is only meaningful for a non-empty window context");
    }
    return turns.back();
}

std::span<const Turn> PromptContext::history() const {
    if (kind != Kind::Window || turns.empty()) {
        throw UsageError("history() is only meaningful for a non-empty window context");
    }
    return std::span<const Turn>(turns.data(), turns.size() - 1);
}

PromptContext full_context(const Transcript& transcript) {
    return PromptContext{PromptContext::Kind::Full, transcript.id, transcript.turns, -1};
}

PromptContext excerpt_context(const Excerpt& excerpt, int excerpt_index) {
    return PromptContext{PromptContext::Kind::Excerpt, excerpt.transcript_id, excerpt.turns,
                         excerpt_index};
}

PromptContext window_context(const TurnWindow& window, std::string transcript_id) {
    PromptContext ctx;
    ctx.kind = PromptContext::Kind::Window;
    ctx.transcript_id = std::move(transcript_id);
    ctx.turns = window.history;
    ctx.turns.push_back(window.target);
    return ctx;
}

std::string render_example_dialogue(std::span<const Turn> turns) {
    return render_dialogue(turns);
}

namespace {

FewShotExample::AnswerKind answer_kind_for(TaskFormulation f) {
    switch (f) {
    case TaskFormulation::DirectCounting: return FewShotExample::AnswerKind::Count;
    case TaskFormulation::ExtractiveCounting: return FewShotExample::AnswerKind::ExtractedTurns;
    case TaskFormulation::BinaryCounting: return FewShotExample::AnswerKind::YesNo;
    default:
        throw UsageError("the DS formulation has no few-shot examples");
    }
}

void check_context_shape(TaskFormulation f, const PromptContext& context) {
    switch (f) {
    case TaskFormulation::DirectScore:
        if (context.kind != PromptContext::Kind::Full) {
            throw UsageError("DS prompts require the full transcript as context");
        }
        break;
    case TaskFormulation::BinaryCounting:
        if (context.kind != PromptContext::Kind::Window) {
            throw UsageError("BC prompts require a turn-window context");
        }
        break;
    default:
        if (context.kind == PromptContext::Kind::Window) {
            throw UsageError(std::string(to_string(f)) + " prompts take a full transcript or an excerpt");
        }
        break;
    }
    if (context.turns.empty()) throw UsageError("prompt context has no turns");
}

void append_example(std::string& out, const FewShotExample& example, int number) {
    out += "Example " + std::to_string(number) + ":\n";
    out += "Dialogue:\n";
    out += example.dialogue_text;
    out += '\n';
    switch (example.answer_kind) {
    case FewShotExample::AnswerKind::Count:
        out += "Count: " + std::to_string(example.count_answer);
        break;
    case FewShotExample::AnswerKind::ExtractedTurns:
        out += "Extracted turns:";
        if (example.extracted_answer.empty()) {
            out += "\nNone";
        } else {
            for (const std::string& line : example.extracted_answer) {
                out += '\n';
                out += line;
            }
        }
        break;
    case FewShotExample::AnswerKind::YesNo:
        out += "Answer: ";
        out += example.yes_answer ? "yes" : "no";
        break;
    }
    out += "\n\n";
}

} // namespace

std::string render_prompt(TaskFormulation formulation, const Dimension& dimension,
                          const PromptContext& context, const FewShotSet* shots) {
    check_context_shape(formulation, context);
    if (shots != nullptr) {
        if (formulation == TaskFormulation::DirectScore) {
            throw UsageError("the DS formulation has no few-shot variant");
        }
        if (shots->formulation != formulation) {
            throw UsageError("few-shot set was sampled for " + std::string(to_string(shots->formulation)) +
                             ", not " + std::string(to_string(formulation)));
        }
        if (shots->dimension_id != dimension.id) {
            throw UsageError("few-shot set belongs to dimension '" + shots->dimension_id +
                             "', not '" + dimension.id + "'");
        }
    }

    std::string prompt;
    prompt.reserve(2048);

    switch (formulation) {
    case TaskFormulation::DirectScore:
        prompt += "You are rating the quality of a classroom discussion about a text.\n";
        prompt += "Focus: " + dimension.iqa_description + "\n";
        prompt += "Rate the discussion on a scale from 1 to 4 using these criteria:\n";
        prompt += dimension.scoring_instruction + "\n\n";
        prompt += "Transcript:\n";
        prompt += render_dialogue(context.turns);
        prompt += "\n\nAnswer with a single number from 1 to 4.\nScore:";
        return prompt;

    case TaskFormulation::DirectCounting:
        prompt += "You are analyzing a classroom discussion about a text.\n";
        prompt += "Observation: " + dimension.iqa_description + "\n";
        prompt += "Count how many turns in the dialogue contain this observation. "
                  "Answer with a single number.\n\n";
        break;

    case TaskFormulation::ExtractiveCounting:
        prompt += "You are analyzing a classroom discussion about a text.\n";
        prompt += "Observation: " + dimension.iqa_description + "\n";
        prompt += "Extract up to " + std::to_string(kExtractionCap) +
                  " turns from the dialogue that contain this observation. "
                  "Quote each turn on its own line, prefixed with its speaker. "
                  "If no turn qualifies, answer None.\n\n";
        break;

    case TaskFormulation::BinaryCounting:
        prompt += "You are analyzing one turn of a classroom discussion about a text.\n";
        prompt += "Observation: " + dimension.iqa_description + "\n";
        prompt += "Does the last turn of the dialogue contain this observation? "
                  "Answer yes or no.\n\n";
        break;
    }

    if (shots != nullptr) {
        int number = 1;
        for (const FewShotExample& example : shots->examples) {
            if (example.answer_kind != answer_kind_for(formulation)) {
                throw UsageError("few-shot example answer does not match the formulation");
            }
            append_example(prompt, example, number++);
        }
    }

    prompt += "Dialogue:\n";
    prompt += render_dialogue(context.turns);
    prompt += "\n\n";
    switch (formulation) {
    case TaskFormulation::DirectCounting: prompt += "Count:"; break;
    case TaskFormulation::ExtractiveCounting: prompt += "Extracted turns:"; break;
    case TaskFormulation::BinaryCounting: prompt += "Answer:"; break;
    default: break;
    }
    return prompt;
}

// --- sampling ----------------------------------------------------------------

namespace {

enum class ExampleClass { Positive, Negative, HardNegative, EasyNegative };

std::string_view class_name(ExampleClass c) {
    switch (c) {
    case ExampleClass::Positive: return "positive";
    case ExampleClass::Negative: return "negative";
    case ExampleClass::HardNegative: return "hard-negative";
    case ExampleClass::EasyNegative: return "easy-negative";
    }
    return "?";
}

bool has_any(const std::set<std::string>& codes, const std::set<std::string>& wanted) {
    if (wanted.empty()) return false;
    for (const std::string& code : codes) {
        if (wanted.count(code) > 0) return true;
    }
    return false;
}

ExampleClass classify_turn(const Turn& turn, const Dimension& dimension) {
    if (has_any(turn.atm_codes, dimension.positive_codes)) return ExampleClass::Positive;
    if (has_any(turn.atm_codes, dimension.hard_negative_codes)) return ExampleClass::HardNegative;
    return ExampleClass::EasyNegative;
}

bool matches_class(ExampleClass turn_class, ExampleClass wanted) {
    if (wanted == ExampleClass::Negative) return turn_class != ExampleClass::Positive;
    return turn_class == wanted;
}

/// Per-pool index: token prefix sums and per-dimension positive turn
/// positions, shared across repeated sampler invocations.
class PoolIndex {
public:
    PoolIndex(std::span<const Transcript> pool, const Tokenizer& tokenizer) : pool_(pool) {
        if (pool.empty()) throw UsageError("few-shot pool is empty");
        segment_ = pool.front().segment;
        if (segment_ == Segment::Unassigned) {
            throw UsageError("few-shot pool transcripts have no segment assignment");
        }
        token_prefix_.reserve(pool.size());
        for (const Transcript& t : pool) {
            if (t.segment != segment_) {
                throw UsageError("few-shot pool mixes segments A and B");
            }
            std::vector<long> prefix(t.turns.size() + 1, 0);
            for (std::size_t i = 0; i < t.turns.size(); ++i) {
                prefix[i + 1] = prefix[i] + tokenizer.count(render_turn(t.turns[i]));
            }
            token_prefix_.push_back(std::move(prefix));
        }
    }

    std::span<const Transcript> pool() const { return pool_; }
    Segment segment() const { return segment_; }

    long span_tokens(std::size_t t, int begin, int end) const {
        return token_prefix_[t][end] - token_prefix_[t][begin];
    }

    /// Longest run starting at `begin` that stays within `budget`
    /// tokens. Zero when the first turn alone exceeds the budget.
    int max_len_within(std::size_t t, int begin, long budget) const {
        const auto& prefix = token_prefix_[t];
        const long limit = prefix[begin] + budget;
        const auto it = std::upper_bound(prefix.begin() + begin, prefix.end(), limit);
        return static_cast<int>(it - prefix.begin() - 1) - begin;
    }

    struct DimensionIndex {
        // sorted turn positions per transcript
        std::vector<std::vector<int>> positive;
        // flattened (transcript, turn) candidates per class
        std::vector<std::pair<std::size_t, int>> positive_turns;
        std::vector<std::pair<std::size_t, int>> hard_negative_turns;
        std::vector<std::pair<std::size_t, int>> easy_negative_turns;
    };

    const DimensionIndex& dimension_index(const Dimension& dimension) const {
        std::string key = dimension.id;
        for (const auto& code : dimension.positive_codes) key += '\x1f' + code;
        key += '\x1e';
        for (const auto& code : dimension.hard_negative_codes) key += '\x1f' + code;

        std::lock_guard<std::mutex> lock(mutex_);
        auto it = dimension_cache_.find(key);
        if (it != dimension_cache_.end()) return it->second;

        DimensionIndex index;
        index.positive.resize(pool_.size());
        for (std::size_t t = 0; t < pool_.size(); ++t) {
            for (const Turn& turn : pool_[t].turns) {
                switch (classify_turn(turn, dimension)) {
                case ExampleClass::Positive:
                    index.positive[t].push_back(turn.index);
                    index.positive_turns.emplace_back(t, turn.index);
                    break;
                case ExampleClass::HardNegative:
                    index.hard_negative_turns.emplace_back(t, turn.index);
                    break;
                default:
                    index.easy_negative_turns.emplace_back(t, turn.index);
                    break;
                }
            }
        }
        return dimension_cache_.emplace(std::move(key), std::move(index)).first->second;
    }

    int positives_in(const DimensionIndex& index, std::size_t t, int begin, int end) const {
        const auto& positions = index.positive[t];
        const auto lo = std::lower_bound(positions.begin(), positions.end(), begin);
        const auto hi = std::lower_bound(positions.begin(), positions.end(), end);
        return static_cast<int>(hi - lo);
    }

private:
    std::span<const Transcript> pool_;
    Segment segment_ = Segment::Unassigned;
    std::vector<std::vector<long>> token_prefix_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, DimensionIndex> dimension_cache_;
};

struct SpanKey {
    std::size_t transcript;
    int begin;
    int end;
    bool operator==(const SpanKey&) const = default;
};

struct SpanKeyHash {
    std::size_t operator()(const SpanKey& k) const {
        return static_cast<std::size_t>(
            mix64(k.transcript * 0x100000001b3ULL ^ (static_cast<std::uint64_t>(k.begin) << 32) ^
                  static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.end))));
    }
};

const Tokenizer& pick_tokenizer(const SamplerOptions& options) {
    return options.tokenizer != nullptr ? *options.tokenizer : default_tokenizer();
}

} // namespace

struct FewShotSampler::Impl {
    Impl(std::span<const Transcript> pool, const SamplerOptions& options)
        : options(options), index(pool, pick_tokenizer(options)) {}

    SamplerOptions options;
    PoolIndex index;
};

FewShotSampler::FewShotSampler(std::span<const Transcript> pool, const SamplerOptions& options)
    : impl_(std::make_unique<Impl>(pool, options)) {}

FewShotSampler::~FewShotSampler() = default;
FewShotSampler::FewShotSampler(FewShotSampler&&) noexcept = default;
FewShotSampler& FewShotSampler::operator=(FewShotSampler&&) noexcept = default;

Segment FewShotSampler::segment() const { return impl_->index.segment(); }

FewShotSet FewShotSampler::sample_bc(const Dimension& dimension, std::uint64_t seed) const {
    const SamplerOptions& options = impl_->options;
    const PoolIndex& index = impl_->index;
    const std::span<const Transcript> pool = index.pool();
    const auto& dim_index = index.dimension_index(dimension);

    const bool with_hard = !dimension.hard_negative_codes.empty();
    std::vector<std::pair<ExampleClass, int>> plan;
    if (with_hard) {
        plan = {{ExampleClass::Positive, 4}, {ExampleClass::HardNegative, 3}, {ExampleClass::EasyNegative, 3}};
    } else {
        plan = {{ExampleClass::Positive, 5}, {ExampleClass::Negative, 5}};
    }

    auto candidates_of = [&](ExampleClass c) -> std::size_t {
        switch (c) {
        case ExampleClass::Positive: return dim_index.positive_turns.size();
        case ExampleClass::HardNegative: return dim_index.hard_negative_turns.size();
        case ExampleClass::EasyNegative: return dim_index.easy_negative_turns.size();
        case ExampleClass::Negative:
            return dim_index.hard_negative_turns.size() + dim_index.easy_negative_turns.size();
        }
        return 0;
    };
    for (const auto& [cls, needed] : plan) {
        if (candidates_of(cls) < static_cast<std::size_t>(needed)) {
            throw SamplingError("pool for dimension '" + dimension.id + "' has only " +
                                std::to_string(candidates_of(cls)) + " " + std::string(class_name(cls)) +
                                " turns, need " + std::to_string(needed));
        }
    }

    Rng rng(hash_combine(hash_combine(mix64(seed), dimension.id), "BC"));
    std::unordered_set<std::uint64_t> used;

    FewShotSet set;
    set.dimension_id = dimension.id;
    set.formulation = TaskFormulation::BinaryCounting;
    set.source_segment = index.segment();

    for (const auto& [cls, needed] : plan) {
        for (int produced = 0; produced < needed;) {
            int attempts = 0;
            bool found = false;
            while (attempts++ < options.max_attempts) {
                const std::size_t t = rng.index(pool.size());
                const Transcript& transcript = pool[t];
                const int turn = rng.below(static_cast<int>(transcript.turns.size()));
                const std::uint64_t key = t * 1000003ULL + static_cast<std::uint64_t>(turn);
                if (used.count(key) > 0) continue;
                if (!matches_class(classify_turn(transcript.turns[turn], dimension), cls)) continue;

                used.insert(key);
                const int begin = std::max(0, turn - kWindowHistoryTurns);
                FewShotExample example;
                example.dialogue_text = render_dialogue(
                    std::span<const Turn>(transcript.turns.data() + begin, turn - begin + 1));
                example.answer_kind = FewShotExample::AnswerKind::YesNo;
                example.yes_answer = cls == ExampleClass::Positive;
                example.source_transcript_id = transcript.id;
                example.source_turn_span = {begin, turn + 1};
                set.examples.push_back(std::move(example));
                ++produced;
                found = true;
                break;
            }
            if (!found) {
                throw SamplingError("exhausted " + std::to_string(options.max_attempts) +
                                    " attempts sampling a " + std::string(class_name(cls)) +
                                    " example for dimension '" + dimension.id + "'");
            }
        }
    }
    return set;
}

FewShotSet FewShotSampler::sample_counting(const Dimension& dimension, TaskFormulation formulation,
                                           std::uint64_t seed) const {
    if (formulation != TaskFormulation::DirectCounting &&
        formulation != TaskFormulation::ExtractiveCounting) {
        throw UsageError("counting few-shot sets are for DC or EC only");
    }
    const SamplerOptions& options = impl_->options;
    const PoolIndex& index = impl_->index;
    const std::span<const Transcript> pool = index.pool();
    const bool extractive = formulation == TaskFormulation::ExtractiveCounting;
    const auto& dim_index = index.dimension_index(dimension);

    Rng rng(hash_combine(hash_combine(mix64(seed), dimension.id), to_string(formulation)));
    std::unordered_set<SpanKey, SpanKeyHash> used;

    FewShotSet set;
    set.dimension_id = dimension.id;
    set.formulation = formulation;
    set.source_segment = index.segment();

    auto sample_one = [&](int wanted_k) { // wanted_k < 0 means unrestricted
        int attempts = 0;
        while (attempts++ < options.max_attempts) {
            const std::size_t t = rng.index(pool.size());
            const Transcript& transcript = pool[t];
            const int n = static_cast<int>(transcript.turns.size());
            const int begin = rng.below(n);
            const int max_len = index.max_len_within(t, begin, options.example_token_budget);
            if (max_len < 1) continue; // first turn alone busts the budget
            const int len = 1 + rng.below(max_len);
            const int end = begin + len;

            const int count = index.positives_in(dim_index, t, begin, end);
            const int label = extractive ? std::min(count, kExtractionCap) : count;
            if (wanted_k >= 0 && label != wanted_k) continue;
            if (!used.insert(SpanKey{t, begin, end}).second) continue;

            FewShotExample example;
            example.dialogue_text = render_dialogue(
                std::span<const Turn>(transcript.turns.data() + begin, static_cast<std::size_t>(len)));
            example.source_transcript_id = transcript.id;
            example.source_turn_span = {begin, end};
            if (extractive) {
                example.answer_kind = FewShotExample::AnswerKind::ExtractedTurns;
                const auto& positions = dim_index.positive[t];
                for (int pos : positions) {
                    if (pos < begin || pos >= end) continue;
                    if (static_cast<int>(example.extracted_answer.size()) >= kExtractionCap) break;
                    example.extracted_answer.push_back(render_turn(transcript.turns[pos]));
                }
            } else {
                example.answer_kind = FewShotExample::AnswerKind::Count;
                example.count_answer = count;
            }
            set.examples.push_back(std::move(example));
            return;
        }
        throw SamplingError("exhausted " + std::to_string(options.max_attempts) +
                            " attempts sampling a " +
                            (wanted_k >= 0 ? "count-" + std::to_string(wanted_k) : std::string("free")) +
                            " excerpt for dimension '" + dimension.id + "' (" +
                            std::string(to_string(formulation)) + ")");
    };

    for (int k = 0; k <= 3; ++k) {
        sample_one(k);
        sample_one(k);
    }
    sample_one(-1);
    sample_one(-1);
    return set;
}

FewShotSet sample_fewshot_bc(std::span<const Transcript> pool, const Dimension& dimension,
                             std::uint64_t seed, const SamplerOptions& options) {
    return FewShotSampler(pool, options).sample_bc(dimension, seed);
}

FewShotSet sample_fewshot_counting(std::span<const Transcript> pool, const Dimension& dimension,
                                   TaskFormulation formulation, std::uint64_t seed,
                                   const SamplerOptions& options) {
    return FewShotSampler(pool, options).sample_counting(dimension, formulation, seed);
}

// --- serialization -----------------------------------------------------------

namespace {

std::string_view answer_kind_name(FewShotExample::AnswerKind kind) {
    switch (kind) {
    case FewShotExample::AnswerKind::Count: return "count";
    case FewShotExample::AnswerKind::ExtractedTurns: return "extracted_turns";
    case FewShotExample::AnswerKind::YesNo: return "yes_no";
    }
    return "?";
}

FewShotExample::AnswerKind answer_kind_from_name(std::string_view name) {
    if (name == "count") return FewShotExample::AnswerKind::Count;
    if (name == "extracted_turns") return FewShotExample::AnswerKind::ExtractedTurns;
    if (name == "yes_no") return FewShotExample::AnswerKind::YesNo;
    throw ParseError("unknown few-shot answer kind '" + std::string(name) + "'");
}

} // namespace

void write_fewshot_set(std::ostream& out, const FewShotSet& set) {
    json examples = json::array();
    for (const FewShotExample& e : set.examples) {
        json entry{
            {"dialogue", e.dialogue_text},
            {"answer_kind", std::string(answer_kind_name(e.answer_kind))},
            {"source_transcript_id", e.source_transcript_id},
            {"source_turn_span", {e.source_turn_span.first, e.source_turn_span.second}},
        };
        switch (e.answer_kind) {
        case FewShotExample::AnswerKind::Count: entry["answer"] = e.count_answer; break;
        case FewShotExample::AnswerKind::ExtractedTurns: entry["answer"] = e.extracted_answer; break;
        case FewShotExample::AnswerKind::YesNo: entry["answer"] = e.yes_answer; break;
        }
        examples.push_back(std::move(entry));
    }
    json j{
        {"dimension", set.dimension_id},
        {"formulation", std::string(to_string(set.formulation))},
        {"source_segment", std::string(to_string(set.source_segment))},
        {"examples", examples},
    };
    out << j.dump(2) << '\n';
}

FewShotSet read_fewshot_set(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed few-shot set: ") + e.what());
    }
    FewShotSet set;
    try {
        set.dimension_id = j.at("dimension").get<std::string>();
        set.formulation = formulation_from_string(j.at("formulation").get<std::string>());
        set.source_segment = segment_from_string(j.at("source_segment").get<std::string>());
        for (const auto& entry : j.at("examples")) {
            FewShotExample e;
            e.dialogue_text = entry.at("dialogue").get<std::string>();
            e.answer_kind = answer_kind_from_name(entry.at("answer_kind").get<std::string>());
            switch (e.answer_kind) {
            case FewShotExample::AnswerKind::Count:
                e.count_answer = entry.at("answer").get<int>();
                break;
            case FewShotExample::AnswerKind::ExtractedTurns:
                e.extracted_answer = entry.at("answer").get<std::vector<std::string>>();
                break;
            case FewShotExample::AnswerKind::YesNo:
                e.yes_answer = entry.at("answer").get<bool>();
                break;
            }
            e.source_transcript_id = entry.value("source_transcript_id", std::string{});
            if (entry.contains("source_turn_span")) {
                e.source_turn_span = {entry.at("source_turn_span").at(0).get<int>(),
                                      entry.at("source_turn_span").at(1).get<int>()};
            }
            set.examples.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed few-shot set: ") + e.what());
    }
    if (set.examples.size() != kFewShotExampleCount) {
        throw StructuralError("few-shot set must hold exactly " +
                              std::to_string(kFewShotExampleCount) + " examples, found " +
                              std::to_string(set.examples.size()));
    }
    return set;
}

FewShotSet load_fewshot_set(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open few-shot set: " + path.string());
    return read_fewshot_set(in);
}

void save_fewshot_set(const std::filesystem::path& path, const FewShotSet& set) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write few-shot set: " + path.string());
    write_fewshot_set(out, set);
}

} // namespace iqascore
