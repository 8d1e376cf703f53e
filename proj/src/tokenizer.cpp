#include "tgrag/tokenizer.hpp"

namespace tgrag {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
           c >= 0x80;
}

}  // namespace

std::vector<TokenSpan> WordPunctTokenizer::tokenize(std::string_view text) const {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space(c)) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        if (is_word(c)) {
            while (j < n && is_word(static_cast<unsigned char>(text[j]))) ++j;
        }
        out.push_back({i, j});
        i = j;
    }
    return out;
}

const Tokenizer& default_tokenizer() {
    static const WordPunctTokenizer tok;
    return tok;
}

std::size_t count_tokens(std::string_view text) { return default_tokenizer().count(text); }

}  // namespace tgrag
