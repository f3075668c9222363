#include "iqascore/llm.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

namespace iqascore {

namespace {

constexpr std::size_t kMinContainmentChars = 20;

std::optional<long> first_integer(std::string_view text, long min_value, long max_value) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
        std::size_t end = i;
        while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
        // cap digit runs so absurd numbers cannot overflow
        if (end - i <= 9) {
            const long value = std::stol(std::string(text.substr(i, end - i)));
            if (value >= min_value && value <= max_value) return value;
        }
        i = end;
    }
    return std::nullopt;
}

std::optional<bool> first_yes_no(std::string_view text) {
    std::string lowered(text);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto is_word = [](unsigned char c) { return std::isalnum(c) != 0; };
    std::size_t i = 0;
    while (i < lowered.size()) {
        if (!is_word(lowered[i])) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < lowered.size() && is_word(lowered[end])) ++end;
        const std::string_view word(lowered.data() + i, end - i);
        if (word == "yes") return true;
        if (word == "no") return false;
        i = end;
    }
    return std::nullopt;
}

} // namespace

std::string normalize_for_match(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += static_cast<char>(std::tolower(c));
        } else {
            pending_space = true;
        }
    }
    return out;
}

namespace {

bool lines_match(const std::string& normalized_line, const std::string& normalized_turn) {
    if (normalized_line.empty() || normalized_turn.empty()) return false;
    if (normalized_line == normalized_turn) return true;
    const std::string& contained =
        normalized_line.size() <= normalized_turn.size() ? normalized_line : normalized_turn;
    const std::string& container =
        normalized_line.size() <= normalized_turn.size() ? normalized_turn : normalized_line;
    if (contained.size() < kMinContainmentChars) return false;
    return container.find(contained) != std::string::npos;
}

ParsedAnswer parse_extraction(std::string_view raw, const PromptContext& context) {
    ParsedAnswer answer;
    answer.formulation = TaskFormulation::ExtractiveCounting;

    std::vector<std::pair<int, std::string>> turn_keys; // (index, normalized "Speaker: text")
    turn_keys.reserve(context.turns.size());
    for (const Turn& turn : context.turns) {
        turn_keys.emplace_back(turn.index, normalize_for_match(render_turn(turn)));
    }

    bool none_marker = false;
    std::size_t start = 0;
    while (start <= raw.size()) {
        const std::size_t newline = raw.find('\n', start);
        const std::string_view line =
            raw.substr(start, newline == std::string_view::npos ? raw.size() - start : newline - start);
        start = newline == std::string_view::npos ? raw.size() + 1 : newline + 1;

        const std::string normalized = normalize_for_match(line);
        if (normalized.empty()) continue;
        if (normalized == "none" || normalized.rfind("no turns", 0) == 0 ||
            normalized.rfind("no turn", 0) == 0) {
            none_marker = true;
            continue;
        }
        for (const auto& [index, key] : turn_keys) {
            if (!lines_match(normalized, key)) continue;
            if (std::find(answer.extracted_turns.begin(), answer.extracted_turns.end(), index) ==
                answer.extracted_turns.end()) {
                answer.extracted_turns.push_back(index);
            }
            break;
        }
        if (answer.extracted_turns.size() >= static_cast<std::size_t>(kExtractionCap)) break;
    }

    // nothing matched and the model did not clearly say "none"
    if (answer.extracted_turns.empty() && !none_marker) {
        answer.parse_failed = true;
    }
    return answer;
}

} // namespace

ParsedAnswer parse_response(TaskFormulation formulation, std::string_view raw,
                            const PromptContext& context) {
    switch (formulation) {
    case TaskFormulation::DirectScore: {
        ParsedAnswer answer;
        answer.formulation = formulation;
        if (auto value = first_integer(raw, 1, 4)) {
            answer.score = static_cast<int>(*value);
        } else {
            answer.parse_failed = true;
            answer.score = 1;
        }
        return answer;
    }
    case TaskFormulation::DirectCounting: {
        ParsedAnswer answer;
        answer.formulation = formulation;
        if (auto value = first_integer(raw, 0, 1000000)) {
            answer.count = *value;
        } else {
            answer.parse_failed = true;
            answer.count = 0;
        }
        return answer;
    }
    case TaskFormulation::BinaryCounting: {
        ParsedAnswer answer;
        answer.formulation = formulation;
        if (auto value = first_yes_no(raw)) {
            answer.yes = *value;
        } else {
            answer.parse_failed = true;
            answer.yes = false;
        }
        return answer;
    }
    case TaskFormulation::ExtractiveCounting:
        return parse_extraction(raw, context);
    }
    ParsedAnswer answer;
    answer.parse_failed = true;
    return answer;
}

} // namespace iqascore
