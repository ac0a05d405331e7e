#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cqabench {

enum class Language { Sql, JavaScript, Python, Ruby, Java, Other };

std::string to_string(Language lang);
// Case-insensitive; accepts "sql", "javascript"/"js", "python", "ruby",
// "java", "other". Throws TextError otherwise.
Language parse_language(std::string_view name);
// The five languages kept by the snippet filter.
const std::vector<Language>& studied_languages();
bool is_studied(Language lang) noexcept;

struct PostDocument {
    std::string post_id;
    std::vector<std::string> paragraphs;
    std::vector<std::string> code_blocks;
    std::vector<std::string> diagnostics;
};

// Lenient: unterminated elements close at the next block tag or at the end
// of input, with a diagnostic. Entities are decoded; tags inside paragraphs
// are dropped (their text kept), <br> becomes a newline.
PostDocument extract_parts(std::string_view html, std::string post_id = {});

std::string decode_entities(std::string_view text);

// Throws TextError on invalid UTF-8.
std::string nfc_normalize(std::string_view text);

// A scheme-prefixed span such as "https://..." running to the next
// whitespace. Returns the byte offset of the scheme within `token`.
std::optional<std::size_t> find_link(std::string_view token);

// Removes punctuation outside link spans; everything else (case, layout)
// is left as is.
std::string strip_punctuation(std::string_view text);

const std::set<std::string>& default_stopwords();

// punctuation (links kept) -> lowercase (links kept) -> stopwords ->
// whitespace collapse. Expects NFC input.
std::string clean_text(std::string_view text, const std::set<std::string>& stopwords = default_stopwords());

struct CommentRules {
    std::vector<std::string> line_markers;
    // Open/close pairs; open may equal close (docstrings).
    std::vector<std::pair<std::string, std::string>> block_delimiters;
    // Block delimiters that only count as the first non-blank text on a
    // line; the whole lines are removed (Ruby =begin/=end).
    std::vector<std::pair<std::string, std::string>> line_blocks;
    // A line marker is ignored where one of these starts at the same offset.
    std::vector<std::string> guards;
    // Also drop horizontal whitespace before a trailing line comment.
    bool trim_before_line_comment = false;
    // Leave a leading "#!" line alone.
    bool keep_shebang = false;
};

class CommentRuleSet {
public:
    static CommentRuleSet defaults();
    // Object keyed by language name; each value has "line", "block",
    // "line_block", "guards", "trim_before_line_comment", "keep_shebang".
    // Must cover the five studied languages.
    static CommentRuleSet from_json(const nlohmann::json& j);
    static CommentRuleSet load(const std::string& path);

    const CommentRules& at(Language lang) const;
    bool contains(Language lang) const { return rules_.count(lang) > 0; }
    void set(Language lang, CommentRules rules) { rules_[lang] = std::move(rules); }
    nlohmann::json to_json() const;

private:
    std::map<Language, CommentRules> rules_;
};

// Throws TextError if the language has no rules.
std::string strip_comments(std::string_view code, Language lang, const CommentRuleSet& rules);

struct LanguageGuess {
    Language language = Language::Other;
    double confidence = 0.0;
    // "external" or "heuristic".
    std::string source;
    // True when an external identifier was configured but unavailable.
    bool fallback = false;
};

// Returns nullopt (or throws) when it cannot answer.
using LanguageIdentifier = std::function<std::optional<Language>(std::string_view)>;

// Keyword-scoring heuristic over the five studied languages.
LanguageGuess heuristic_language(std::string_view snippet);
// Throws TextError on an empty (all-blank) snippet.
LanguageGuess identify_language(std::string_view snippet, const LanguageIdentifier& external = {});

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kEosToken = "[EOS]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::size_t kMaxSequence = 512;

// Runs of letters/digits/underscore (any non-ASCII byte counts as a letter)
// and single punctuation characters.
std::vector<std::string> tokenize(std::string_view text);
using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

struct BimodalSequence {
    std::vector<std::string> tokens;
    // Half-open [begin, end) ranges into tokens.
    std::pair<std::size_t, std::size_t> word_span;
    std::pair<std::size_t, std::size_t> code_span;
    std::array<std::size_t, 3> specials{};
    bool truncated = false;

    std::size_t size() const noexcept { return tokens.size(); }
};

// [CLS] words [SEP] code [EOS]. Over-long content is split between the
// segments in proportion to their lengths (floor for words, at least one
// token each when non-empty) and tail-truncated. Throws TextError when both
// segments are empty or limit < 4.
BimodalSequence pack_sequence(const std::vector<std::string>& words, const std::vector<std::string>& code,
                              std::size_t limit = kMaxSequence);

class Vocabulary {
public:
    // Starts with [CLS]=0, [SEP]=1, [EOS]=2, [UNK]=3.
    Vocabulary();

    std::size_t add(const std::string& token);
    // [UNK] for unknown tokens.
    std::size_t id(const std::string& token) const;
    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    std::vector<std::size_t> encode(const BimodalSequence& seq) const;
    // One token per line, id = line number.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> tokens_;
    std::map<std::string, std::size_t> ids_;
};

// Finite-population sample size, rounded up. Pass infinity for an unbounded
// population. Throws TextError unless 0 < p < 1, e > 0, z > 0, N >= 1.
std::size_t cochran_n(double population, double p = 0.5, double e = 0.05, double z = 1.96);

struct ProcessedSnippet {
    std::string text;
    LanguageGuess language;
    bool kept = false;
};

struct ProcessedPost {
    std::string post_id;
    std::string clean_text;
    std::vector<ProcessedSnippet> snippets;
    BimodalSequence sequence;
    std::vector<std::string> diagnostics;
};

struct TextPipeline {
    CommentRuleSet rules = CommentRuleSet::defaults();
    std::set<std::string> stopwords = default_stopwords();
    LanguageIdentifier identifier;
    Tokenizer tokenizer = tokenize;
    std::size_t limit = kMaxSequence;

    // extract -> NFC -> clean paragraphs; snippets: NFC -> identify -> keep
    // studied languages -> strip comments; then tokenize and pack. Throws
    // TextError if the post has no usable content.
    ProcessedPost process(std::string_view html, std::string post_id = {}) const;
};

}  // namespace cqabench
