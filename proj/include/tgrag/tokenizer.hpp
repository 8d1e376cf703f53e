#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace tgrag {

/// Byte range [begin, end) of one token inside the tokenized text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Pluggable tokenizer. Counts only steer chunk boundaries and context budgets,
/// so any deterministic segmentation works.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;
    std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

/// Maximal runs of word bytes (ASCII alphanumerics, '_' and every non-ASCII
/// byte) form one token; every other non-space byte is a token by itself.
class WordPunctTokenizer final : public Tokenizer {
public:
    std::vector<TokenSpan> tokenize(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

/// Token count under the default tokenizer.
std::size_t count_tokens(std::string_view text);

}  // namespace tgrag
