#pragma once

#include <string_view>

namespace iqascore {

/// Pluggable token counter. Chunking only needs approximate budgets, so
/// the default implementation counts whitespace-separated pieces instead
/// of binding the library to one model's tokenizer.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    /// Number of tokens in `text`. Must return 0 for empty or
    /// all-whitespace input.
    virtual long count(std::string_view text) const = 0;

    virtual std::string_view name() const = 0;
};

/// Counts maximal runs of non-whitespace characters. Additive under
/// whitespace concatenation: count(a + " " + b) == count(a) + count(b).
class WhitespaceTokenizer final : public Tokenizer {
public:
    long count(std::string_view text) const override;
    std::string_view name() const override { return "whitespace"; }
};

/// Process-wide default tokenizer instance.
const Tokenizer& default_tokenizer();

/// Convenience wrapper over default_tokenizer().count().
long count_tokens(std::string_view text);

} // namespace iqascore
