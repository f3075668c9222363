#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "iqascore/corpus.hpp"
#include "iqascore/llm.hpp"
#include "iqascore/rubric.hpp"

namespace iqascore {

/// How the mock oracle answers relative to gold:
///   Perfect      — gold exactly;
///   Noisy        — each answer perturbed with probability p, the same
///                  way on every run (consistently wrong);
///   Undercount   — each positive observation dropped with probability
///                  p (misses, never fabricates);
///   Inconsistent — like Noisy but redrawn per run, creating
///                  run-to-run disagreement for consistency testing.
/// All behaviors are deterministic given the seed: randomness is
/// derived from the request key alone, never from call order, so
/// parallel execution replays identically.
struct MockBehavior {
    enum class Kind { Perfect, Noisy, Undercount, Inconsistent };

    Kind kind = Kind::Perfect;
    double p = 0.0;
    std::uint64_t seed = 0;

    static MockBehavior perfect();
    static MockBehavior noisy(double p, std::uint64_t seed);
    static MockBehavior undercount(double p, std::uint64_t seed);
    static MockBehavior inconsistent(double p, std::uint64_t seed);
};

std::string to_string(const MockBehavior& behavior);

/// Deterministic oracle backed by the gold annotations of a corpus.
/// Requires request metadata (transcript id, dimension, formulation,
/// context turn range) and throws UsageError when it is missing.
class MockBackend final : public CompletionBackend {
public:
    MockBackend(std::span<const Transcript> corpus, std::span<const Dimension> dimensions,
                MockBehavior behavior);
    ~MockBackend() override;

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string id() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Factory used by the CLI and tests.
std::unique_ptr<CompletionBackend> make_mock_backend(std::span<const Transcript> corpus,
                                                     std::span<const Dimension> dimensions,
                                                     MockBehavior behavior);

} // namespace iqascore
