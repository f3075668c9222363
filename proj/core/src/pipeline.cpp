#include "iqascore/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iqascore/errors.hpp"

namespace iqascore {

using nlohmann::json;

namespace {

std::string context_label(ContextRegime regime, long budget) {
    switch (regime) {
    case ContextRegime::Full: return "full";
    case ContextRegime::Window: return "5turn";
    case ContextRegime::TokenBudget:
        if (budget % 1000 == 0) return std::to_string(budget / 1000) + "k";
        return std::to_string(budget);
    }
    return "?";
}

[[noreturn]] void bad_approach(std::string_view name, const std::string& why) {
    std::string message = "invalid approach '" + std::string(name) + "': " + why + "; canonical approaches are";
    for (const std::string& canonical : ApproachSpec::canonical_names()) {
        message += ' ' + canonical;
    }
    throw UsageError(message);
}

} // namespace

std::string ApproachSpec::name() const {
    return std::string(to_string(formulation)) + "-" + context_label(regime, token_budget) + "-" +
           std::to_string(shots) + "s";
}

const std::vector<std::string>& ApproachSpec::canonical_names() {
    static const std::vector<std::string> names = {
        "DS-full-0s", "DC-full-0s", "DC-1k-0s",    "DC-1k-10s",    "EC-full-0s",
        "EC-1k-0s",   "EC-1k-10s",  "BC-5turn-0s", "BC-5turn-10s",
    };
    return names;
}

ApproachSpec ApproachSpec::parse(std::string_view name) {
    const std::size_t first = name.find('-');
    const std::size_t second = first == std::string_view::npos ? std::string_view::npos
                                                               : name.find('-', first + 1);
    if (first == std::string_view::npos || second == std::string_view::npos) {
        bad_approach(name, "expected the tf-cl-fs form");
    }

    ApproachSpec spec;
    try {
        spec.formulation = formulation_from_string(name.substr(0, first));
    } catch (const UsageError&) {
        bad_approach(name, "unknown task formulation");
    }

    const std::string_view cl = name.substr(first + 1, second - first - 1);
    if (cl == "full") {
        spec.regime = ContextRegime::Full;
    } else if (cl == "5turn") {
        spec.regime = ContextRegime::Window;
    } else {
        std::string digits(cl);
        long scale = 1;
        if (!digits.empty() && (digits.back() == 'k' || digits.back() == 'K')) {
            scale = 1000;
            digits.pop_back();
        }
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
            bad_approach(name, "context must be 'full', '5turn' or a token budget like '1k'");
        }
        spec.regime = ContextRegime::TokenBudget;
        spec.token_budget = std::stol(digits) * scale;
        if (spec.token_budget < 1) bad_approach(name, "token budget must be >= 1");
    }

    const std::string_view fs = name.substr(second + 1);
    if (fs == "0s") {
        spec.shots = 0;
    } else if (fs == "10s") {
        spec.shots = 10;
    } else {
        bad_approach(name, "few-shot setting must be '0s' or '10s'");
    }

    switch (spec.formulation) {
    case TaskFormulation::DirectScore:
        if (spec.regime != ContextRegime::Full) bad_approach(name, "DS requires the full transcript");
        if (spec.shots != 0) bad_approach(name, "DS has no few-shot variant");
        break;
    case TaskFormulation::BinaryCounting:
        if (spec.regime != ContextRegime::Window) bad_approach(name, "BC requires the 5turn window");
        break;
    default:
        if (spec.regime == ContextRegime::Window) {
            bad_approach(name, "DC/EC take the full transcript or a token budget");
        }
        if (spec.shots != 0 && spec.regime != ContextRegime::TokenBudget) {
            bad_approach(name, "few-shot DC/EC requires a token-budget context");
        }
        break;
    }
    return spec;
}

Score majority_vote(const std::array<Score, 3>& scores) {
    const int a = scores[0].value();
    const int b = scores[1].value();
    const int c = scores[2].value();
    if (a == b || a == c) return scores[0];
    if (b == c) return scores[1];
    // all three distinct: the mean of three integers has fractional
    // part 0, 1/3 or 2/3, so nearest-integer rounding is never a tie
    const double mean = static_cast<double>(a + b + c) / 3.0;
    return Score(static_cast<int>(std::lround(mean)));
}

void FewShotLibrary::add(FewShotSet set) {
    if (set.source_segment == Segment::Unassigned) {
        throw UsageError("few-shot set for '" + set.dimension_id + "' has no source segment");
    }
    const auto key = std::make_pair(set.dimension_id, static_cast<int>(set.source_segment));
    sets_[key] = std::move(set);
}

const FewShotSet* FewShotLibrary::find(std::string_view dimension_id, Segment source_segment) const {
    const auto it =
        sets_.find(std::make_pair(std::string(dimension_id), static_cast<int>(source_segment)));
    return it == sets_.end() ? nullptr : &it->second;
}

namespace {

struct AskOutcome {
    ParsedAnswer answer;
    std::vector<std::string> raw_outputs;
    int calls = 0;
    bool failed = false;
};

AskOutcome ask(CompletionBackend& backend, TaskFormulation formulation, const Dimension& dimension,
               const PromptContext& context, const FewShotSet* shots, const RunOptions& options,
               const std::string& transcript_id, int run_index) {
    CompletionRequest request;
    request.prompt = render_prompt(formulation, dimension, context, shots);
    request.max_new_tokens = options.max_new_tokens;
    request.temperature = options.temperature;
    request.metadata[meta::kTranscriptId] = transcript_id;
    request.metadata[meta::kDimension] = dimension.id;
    request.metadata[meta::kFormulation] = std::string(to_string(formulation));
    request.metadata[meta::kRun] = std::to_string(run_index);
    if (context.kind == PromptContext::Kind::Window) {
        request.metadata[meta::kTargetTurn] = std::to_string(context.target().index);
    } else {
        request.metadata[meta::kTurnBegin] = std::to_string(context.turns.front().index);
        request.metadata[meta::kTurnEnd] = std::to_string(context.turns.back().index + 1);
    }

    AskOutcome outcome;
    // one automatic re-query before accepting the conservative default
    for (int attempt = 0; attempt < 2; ++attempt) {
        const CompletionResponse response = backend.complete(request);
        ++outcome.calls;
        outcome.raw_outputs.push_back(response.raw_text);
        outcome.answer = parse_response(formulation, response.raw_text, context);
        if (!outcome.answer.parse_failed) break;
    }
    outcome.failed = outcome.answer.parse_failed;
    return outcome;
}

DimensionRun score_dimension_run(const ApproachSpec& approach, const Transcript& transcript,
                                 const Dimension& dimension,
                                 const std::vector<PromptContext>& contexts,
                                 CompletionBackend& backend, const FewShotSet* shots,
                                 const RunOptions& options, int run_index) {
    DimensionRun result;
    if (approach.formulation == TaskFormulation::DirectScore) {
        AskOutcome outcome = ask(backend, approach.formulation, dimension, contexts.front(), shots,
                                 options, transcript.id, run_index);
        result.calls = outcome.calls;
        result.parse_failures = outcome.failed ? 1 : 0;
        result.raw_outputs = std::move(outcome.raw_outputs);
        result.score = outcome.answer.score;
        return result;
    }

    long total = 0;
    for (const PromptContext& context : contexts) {
        AskOutcome outcome = ask(backend, approach.formulation, dimension, context, shots, options,
                                 transcript.id, run_index);
        result.calls += outcome.calls;
        if (outcome.failed) ++result.parse_failures;
        std::move(outcome.raw_outputs.begin(), outcome.raw_outputs.end(),
                  std::back_inserter(result.raw_outputs));
        switch (approach.formulation) {
        case TaskFormulation::DirectCounting:
            total += outcome.answer.count;
            break;
        case TaskFormulation::ExtractiveCounting:
            total += static_cast<long>(outcome.answer.extracted_turns.size());
            break;
        case TaskFormulation::BinaryCounting:
            total += outcome.answer.yes ? 1 : 0;
            break;
        default:
            break;
        }
    }
    result.raw_count = total;
    result.score = count_to_score(total).value();
    return result;
}

std::vector<PromptContext> build_contexts(const ApproachSpec& approach, const Transcript& transcript,
                                          const Tokenizer& tokenizer) {
    std::vector<PromptContext> contexts;
    switch (approach.regime) {
    case ContextRegime::Full:
        contexts.push_back(full_context(transcript));
        break;
    case ContextRegime::TokenBudget: {
        const std::vector<Excerpt> excerpts =
            chunk_by_token_budget(transcript, approach.token_budget, tokenizer);
        int index = 0;
        for (const Excerpt& excerpt : excerpts) {
            contexts.push_back(excerpt_context(excerpt, index++));
        }
        break;
    }
    case ContextRegime::Window:
        for (const TurnWindow& window : sliding_turn_windows(transcript)) {
            contexts.push_back(window_context(window, transcript.id));
        }
        break;
    }
    return contexts;
}

} // namespace

PredictionRecord score_transcript(const ApproachSpec& approach, const Transcript& transcript,
                                  std::span<const Dimension> dimensions, CompletionBackend& backend,
                                  const FewShotLibrary* shots, const RunOptions& options) {
    if (dimensions.empty()) throw UsageError("no dimensions to score");

    std::vector<const FewShotSet*> per_dimension_shots(dimensions.size(), nullptr);
    if (approach.shots > 0) {
        if (shots == nullptr) {
            throw UsageError("approach " + approach.name() + " needs few-shot sets");
        }
        if (transcript.segment == Segment::Unassigned) {
            throw UsageError("few-shot scoring requires segment labels; run the segment split first");
        }
        const Segment wanted = other_segment(transcript.segment);
        for (std::size_t i = 0; i < dimensions.size(); ++i) {
            const FewShotSet* set = shots->find(dimensions[i].id, wanted);
            if (set == nullptr) {
                throw UsageError("no few-shot set for dimension '" + dimensions[i].id +
                                 "' from segment " + std::string(to_string(wanted)));
            }
            if (set->source_segment == transcript.segment) {
                throw UsageError("few-shot set for '" + dimensions[i].id +
                                 "' leaks the evaluated transcript's segment");
            }
            if (set->formulation != approach.formulation) {
                throw UsageError("few-shot set for '" + dimensions[i].id + "' was sampled for " +
                                 std::string(to_string(set->formulation)));
            }
            per_dimension_shots[i] = set;
        }
    }

    const Tokenizer& tokenizer = options.tokenizer != nullptr ? *options.tokenizer : default_tokenizer();
    const std::vector<PromptContext> contexts = build_contexts(approach, transcript, tokenizer);

    PredictionRecord record;
    record.transcript_id = transcript.id;
    record.approach = approach.name();

    double total_run_seconds = 0.0;
    for (int run = 0; run < options.runs; ++run) {
        const auto run_started = std::chrono::steady_clock::now();
        RunResult run_result;
        run_result.run_index = run;

        if (options.parallelism > 1 && dimensions.size() > 1) {
            // dimension-level fan-out; run boundaries stay sequential
            std::vector<std::future<DimensionRun>> futures;
            futures.reserve(dimensions.size());
            for (std::size_t i = 0; i < dimensions.size(); ++i) {
                futures.push_back(std::async(std::launch::async, [&, i] {
                    return score_dimension_run(approach, transcript, dimensions[i], contexts, backend,
                                               per_dimension_shots[i], options, run);
                }));
            }
            for (std::size_t i = 0; i < dimensions.size(); ++i) {
                run_result.per_dimension[dimensions[i].id] = futures[i].get();
            }
        } else {
            for (std::size_t i = 0; i < dimensions.size(); ++i) {
                run_result.per_dimension[dimensions[i].id] = score_dimension_run(
                    approach, transcript, dimensions[i], contexts, backend, per_dimension_shots[i],
                    options, run);
            }
        }

        total_run_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - run_started).count();
        record.runs.push_back(std::move(run_result));
    }
    record.inference_seconds = total_run_seconds / static_cast<double>(options.runs);

    // majority vote per scoring dimension, then combine the S4 pair
    std::map<std::string, int> voted;
    for (const Dimension& dimension : dimensions) {
        std::array<Score, 3> scores = {Score(1), Score(1), Score(1)};
        for (int run = 0; run < options.runs && run < 3; ++run) {
            scores[static_cast<std::size_t>(run)] = Score(record.runs[run].per_dimension.at(dimension.id).score);
        }
        if (options.runs < 3) {
            // fewer runs than the standard three: repeat the last one
            for (int run = options.runs; run < 3; ++run) {
                scores[static_cast<std::size_t>(run)] = scores[static_cast<std::size_t>(options.runs - 1)];
            }
        }
        voted[dimension.id] = majority_vote(scores).value();
    }

    const bool has_s4a = voted.count(std::string(kS4aId)) > 0;
    const bool has_s4b = voted.count(std::string(kS4bId)) > 0;
    for (const auto& [id, score] : voted) {
        if (has_s4a && has_s4b && (id == kS4aId || id == kS4bId)) continue;
        record.final_scores[id] = score;
    }
    if (has_s4a && has_s4b) {
        record.final_s4a = voted.at(std::string(kS4aId));
        record.final_s4b = voted.at(std::string(kS4bId));
        record.final_scores[std::string(kS4Id)] =
            combine_s4(Score(*record.final_s4a), Score(*record.final_s4b)).value();
    }
    return record;
}

ExperimentResult run_experiment(const ApproachSpec& approach, std::span<const Transcript> corpus,
                                std::span<const Dimension> dimensions, CompletionBackend& backend,
                                const FewShotLibrary* shots, const RunOptions& options) {
    ExperimentResult result;
    double total_seconds = 0.0;
    for (const Transcript& transcript : corpus) {
        try {
            PredictionRecord record =
                score_transcript(approach, transcript, dimensions, backend, shots, options);
            total_seconds += record.inference_seconds;
            for (const RunResult& run : record.runs) {
                for (const auto& [id, dim_run] : run.per_dimension) {
                    result.total_backend_calls += dim_run.calls;
                }
            }
            result.records.push_back(std::move(record));
        } catch (const Error& e) {
            result.failures.emplace_back(transcript.id, e.what());
        }
    }
    if (!result.records.empty()) {
        result.avg_inference_seconds = total_seconds / static_cast<double>(result.records.size());
    }
    return result;
}

// --- record serialization ------------------------------------------------

void write_records(std::ostream& out, std::span<const PredictionRecord> records) {
    for (const PredictionRecord& record : records) {
        json runs = json::array();
        for (const RunResult& run : record.runs) {
            json dims = json::object();
            for (const auto& [id, dim_run] : run.per_dimension) {
                json entry{
                    {"score", dim_run.score},
                    {"parse_failures", dim_run.parse_failures},
                    {"calls", dim_run.calls},
                    {"raw_outputs", dim_run.raw_outputs},
                };
                if (dim_run.raw_count.has_value()) entry["raw_count"] = *dim_run.raw_count;
                dims[id] = std::move(entry);
            }
            runs.push_back(json{{"run", run.run_index}, {"dimensions", std::move(dims)}});
        }
        json j{
            {"transcript_id", record.transcript_id},
            {"approach", record.approach},
            {"inference_seconds", record.inference_seconds},
            {"final", record.final_scores},
            {"runs", std::move(runs)},
        };
        if (record.final_s4a.has_value()) j["s4a"] = *record.final_s4a;
        if (record.final_s4b.has_value()) j["s4b"] = *record.final_s4b;
        out << j.dump() << '\n';
    }
}

std::vector<PredictionRecord> read_records(std::istream& in) {
    std::vector<PredictionRecord> records;
    std::string line;
    long line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("records line " + std::to_string(line_number) + ": " + e.what());
        }
        try {
            PredictionRecord record;
            record.transcript_id = j.at("transcript_id").get<std::string>();
            record.approach = j.at("approach").get<std::string>();
            record.inference_seconds = j.at("inference_seconds").get<double>();
            record.final_scores = j.at("final").get<std::map<std::string, int>>();
            if (j.contains("s4a")) record.final_s4a = j.at("s4a").get<int>();
            if (j.contains("s4b")) record.final_s4b = j.at("s4b").get<int>();
            for (const auto& run_json : j.at("runs")) {
                RunResult run;
                run.run_index = run_json.at("run").get<int>();
                for (const auto& [id, entry] : run_json.at("dimensions").items()) {
                    DimensionRun dim_run;
                    dim_run.score = entry.at("score").get<int>();
                    dim_run.parse_failures = entry.at("parse_failures").get<int>();
                    dim_run.calls = entry.at("calls").get<int>();
                    dim_run.raw_outputs = entry.at("raw_outputs").get<std::vector<std::string>>();
                    if (entry.contains("raw_count")) dim_run.raw_count = entry.at("raw_count").get<long>();
                    run.per_dimension[id] = std::move(dim_run);
                }
                record.runs.push_back(std::move(run));
            }
            records.push_back(std::move(record));
        } catch (const json::exception& e) {
            throw ParseError("records line " + std::to_string(line_number) + ": " + e.what());
        }
    }
    return records;
}

std::vector<PredictionRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open records file: " + path.string());
    return read_records(in);
}

void save_records(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write records file: " + path.string());
    write_records(out, records);
}

} // namespace iqascore
