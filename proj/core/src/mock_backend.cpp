#include "iqascore/mock_backend.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_map>

#include "iqascore/errors.hpp"
#include "iqascore/rng.hpp"

namespace iqascore {

namespace {

void validate_p(double p) {
    if (p < 0.0 || p > 1.0) {
        throw UsageError("mock behavior probability must be in [0, 1], got " + std::to_string(p));
    }
}

} // namespace

MockBehavior MockBehavior::perfect() { return MockBehavior{Kind::Perfect, 0.0, 0}; }

MockBehavior MockBehavior::noisy(double p, std::uint64_t seed) {
    validate_p(p);
    return MockBehavior{Kind::Noisy, p, seed};
}

MockBehavior MockBehavior::undercount(double p, std::uint64_t seed) {
    validate_p(p);
    return MockBehavior{Kind::Undercount, p, seed};
}

MockBehavior MockBehavior::inconsistent(double p, std::uint64_t seed) {
    validate_p(p);
    return MockBehavior{Kind::Inconsistent, p, seed};
}

std::string to_string(const MockBehavior& behavior) {
    switch (behavior.kind) {
    case MockBehavior::Kind::Perfect: return "mock:perfect";
    case MockBehavior::Kind::Noisy: return "mock:noisy:" + std::to_string(behavior.p);
    case MockBehavior::Kind::Undercount: return "mock:undercount:" + std::to_string(behavior.p);
    case MockBehavior::Kind::Inconsistent: return "mock:inconsistent:" + std::to_string(behavior.p);
    }
    return "mock:?";
}

struct MockBackend::Impl {
    MockBehavior behavior;
    std::vector<Transcript> corpus;
    std::unordered_map<std::string, std::size_t> by_id;
    // dimension id -> per-transcript sorted positive turn positions
    std::unordered_map<std::string, std::vector<std::vector<int>>> positives;

    const std::string& require(const CompletionRequest& request, const char* key) const {
        auto it = request.metadata.find(key);
        if (it == request.metadata.end()) {
            throw UsageError(std::string("mock backend requires request metadata '") + key + "'");
        }
        return it->second;
    }

    int require_int(const CompletionRequest& request, const char* key) const {
        const std::string& value = require(request, key);
        try {
            return std::stoi(value);
        } catch (const std::exception&) {
            throw UsageError(std::string("mock backend metadata '") + key + "' is not an integer: " + value);
        }
    }
};

MockBackend::MockBackend(std::span<const Transcript> corpus, std::span<const Dimension> dimensions,
                         MockBehavior behavior)
    : impl_(std::make_unique<Impl>()) {
    validate_p(behavior.p);
    impl_->behavior = behavior;
    impl_->corpus.assign(corpus.begin(), corpus.end());
    for (std::size_t i = 0; i < impl_->corpus.size(); ++i) {
        impl_->by_id[impl_->corpus[i].id] = i;
    }
    for (const Dimension& dim : dimensions) {
        auto& per_transcript = impl_->positives[dim.id];
        per_transcript.resize(impl_->corpus.size());
        for (std::size_t i = 0; i < impl_->corpus.size(); ++i) {
            for (const Turn& turn : impl_->corpus[i].turns) {
                const bool positive =
                    std::any_of(turn.atm_codes.begin(), turn.atm_codes.end(),
                                [&](const std::string& code) { return dim.positive_codes.count(code) > 0; });
                if (positive) per_transcript[i].push_back(turn.index);
            }
        }
    }
}

MockBackend::~MockBackend() = default;

std::string MockBackend::id() const { return to_string(impl_->behavior); }

CompletionResponse MockBackend::complete(const CompletionRequest& request) {
    const auto started = std::chrono::steady_clock::now();
    if (request.prompt.empty()) throw UsageError("completion request has an empty prompt");

    const Impl& impl = *impl_;
    const std::string& transcript_id = impl.require(request, meta::kTranscriptId);
    const std::string& dimension_id = impl.require(request, meta::kDimension);
    const TaskFormulation formulation =
        formulation_from_string(impl.require(request, meta::kFormulation));

    const auto t_it = impl.by_id.find(transcript_id);
    if (t_it == impl.by_id.end()) {
        throw UsageError("mock backend does not know transcript '" + transcript_id + "'");
    }
    const std::size_t t = t_it->second;
    const Transcript& transcript = impl.corpus[t];

    const auto d_it = impl.positives.find(dimension_id);
    if (d_it == impl.positives.end()) {
        throw UsageError("mock backend does not know dimension '" + dimension_id + "'");
    }
    const std::vector<int>& positions = d_it->second[t];

    // randomness is a pure function of (seed, request identity); the
    // run index participates only for the Inconsistent behavior
    std::uint64_t key = mix64(impl.behavior.seed);
    key = hash_combine(key, transcript_id);
    key = hash_combine(key, dimension_id);
    key = hash_combine(key, to_string(formulation));
    if (impl.behavior.kind == MockBehavior::Kind::Inconsistent) {
        key = hash_combine(key, impl.require(request, meta::kRun));
    }

    int begin = 0;
    int end = static_cast<int>(transcript.turns.size());
    int target = -1;
    switch (formulation) {
    case TaskFormulation::DirectScore:
        break;
    case TaskFormulation::DirectCounting:
    case TaskFormulation::ExtractiveCounting:
        begin = impl.require_int(request, meta::kTurnBegin);
        end = impl.require_int(request, meta::kTurnEnd);
        break;
    case TaskFormulation::BinaryCounting:
        target = impl.require_int(request, meta::kTargetTurn);
        begin = target;
        end = target + 1;
        break;
    }
    if (begin < 0 || end > static_cast<int>(transcript.turns.size()) || begin >= end) {
        throw UsageError("mock backend got an invalid context turn range");
    }
    key = hash_combine(key, static_cast<std::uint64_t>(begin));
    key = hash_combine(key, static_cast<std::uint64_t>(end));
    Rng rng(key);

    const auto lo = std::lower_bound(positions.begin(), positions.end(), begin);
    const auto hi = std::lower_bound(positions.begin(), positions.end(), end);
    std::vector<int> in_range(lo, hi);

    const MockBehavior::Kind kind = impl.behavior.kind;
    const double p = impl.behavior.p;
    const bool perturbing =
        (kind == MockBehavior::Kind::Noisy || kind == MockBehavior::Kind::Inconsistent);

    if (kind == MockBehavior::Kind::Undercount && p > 0.0) {
        std::vector<int> kept;
        for (int pos : in_range) {
            if (!rng.bernoulli(p)) kept.push_back(pos);
        }
        in_range = std::move(kept);
    }

    std::string raw;
    switch (formulation) {
    case TaskFormulation::DirectScore: {
        int score = count_to_score(static_cast<long>(in_range.size())).value();
        if (perturbing && rng.bernoulli(p)) {
            const int direction = rng.bernoulli(0.5) ? 1 : -1;
            score = std::clamp(score + direction, 1, 4);
        }
        raw = std::to_string(score);
        break;
    }
    case TaskFormulation::DirectCounting: {
        long count = static_cast<long>(in_range.size());
        if (perturbing && rng.bernoulli(p)) {
            count += (count == 0 || rng.bernoulli(0.5)) ? 1 : -1;
        }
        raw = std::to_string(count);
        break;
    }
    case TaskFormulation::BinaryCounting: {
        bool yes = !in_range.empty();
        if (kind == MockBehavior::Kind::Undercount) {
            // the drop already happened above; nothing to add
        } else if (perturbing && rng.bernoulli(p)) {
            yes = !yes;
        }
        raw = yes ? "yes" : "no";
        break;
    }
    case TaskFormulation::ExtractiveCounting: {
        std::vector<int> extracted = in_range;
        if (perturbing && rng.bernoulli(p)) {
            if (!extracted.empty() && rng.bernoulli(0.5)) {
                extracted.erase(extracted.begin() + rng.below(static_cast<int>(extracted.size())));
            } else {
                // fabricate: quote a non-positive turn from the context
                std::vector<int> candidates;
                for (int i = begin; i < end; ++i) {
                    if (std::find(in_range.begin(), in_range.end(), i) == in_range.end()) {
                        candidates.push_back(i);
                    }
                }
                if (!candidates.empty()) {
                    extracted.push_back(candidates[rng.index(candidates.size())]);
                    std::sort(extracted.begin(), extracted.end());
                }
            }
        }
        if (extracted.size() > static_cast<std::size_t>(kExtractionCap)) {
            extracted.resize(kExtractionCap);
        }
        if (extracted.empty()) {
            raw = "None";
        } else {
            for (std::size_t i = 0; i < extracted.size(); ++i) {
                if (i > 0) raw += '\n';
                raw += render_turn(transcript.turns[extracted[i]]);
            }
        }
        break;
    }
    }

    const auto finished = std::chrono::steady_clock::now();
    CompletionResponse response;
    response.raw_text = std::move(raw);
    response.latency_seconds = std::chrono::duration<double>(finished - started).count();
    response.backend_id = id();
    return response;
}

std::unique_ptr<CompletionBackend> make_mock_backend(std::span<const Transcript> corpus,
                                                     std::span<const Dimension> dimensions,
                                                     MockBehavior behavior) {
    return std::make_unique<MockBackend>(corpus, dimensions, behavior);
}

} // namespace iqascore
