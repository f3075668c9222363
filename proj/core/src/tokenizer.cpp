#include "iqascore/tokenizer.hpp"

#include <cctype>

namespace iqascore {

long WhitespaceTokenizer::count(std::string_view text) const {
    long tokens = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++tokens;
        }
    }
    return tokens;
}

const Tokenizer& default_tokenizer() {
    static const WhitespaceTokenizer instance;
    return instance;
}

long count_tokens(std::string_view text) {
    return default_tokenizer().count(text);
}

} // namespace iqascore
