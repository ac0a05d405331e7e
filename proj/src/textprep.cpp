#include "cqabench/textprep.hpp"

#include "cqabench/error.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

namespace cqabench {

namespace {

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool starts_at(std::string_view s, std::size_t i, std::string_view prefix) {
    return s.size() >= i + prefix.size() && s.compare(i, prefix.size(), prefix) == 0;
}

bool is_hspace(char c) { return c == ' ' || c == '\t'; }

// Decodes one code point at i (advancing it); negative on malformed input.
UChar32 next_code_point(std::string_view s, std::size_t& i) {
    UChar32 c = 0;
    auto pos = static_cast<int32_t>(i);
    U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), pos, static_cast<int32_t>(s.size()), c);
    i = static_cast<std::size_t>(pos);
    return c;
}

bool valid_utf8(std::string_view s) {
    for (std::size_t i = 0; i < s.size();)
        if (next_code_point(s, i) < 0) return false;
    return true;
}

bool is_punct(UChar32 c) { return (c < 128 && std::ispunct(static_cast<int>(c))) || u_ispunct(c); }

std::string remove_punct(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const std::size_t start = i;
        const UChar32 c = next_code_point(s, i);
        if (c < 0 || !is_punct(c)) out.append(s.substr(start, i - start));
    }
    return out;
}

std::string to_lower(std::string_view s) {
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    u.toLower(icu::Locale::getRoot());
    std::string out;
    u.toUTF8String(out);
    return out;
}

struct Piece {
    std::string_view text;
    bool space;
};

// Splits into alternating whitespace / non-whitespace runs.
std::vector<Piece> split_runs(std::string_view s) {
    std::vector<Piece> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const std::size_t start = i;
        std::size_t probe = i;
        const UChar32 first = next_code_point(s, probe);
        const bool space = first >= 0 && u_isUWhiteSpace(first);
        i = probe;
        while (i < s.size()) {
            std::size_t j = i;
            const UChar32 c = next_code_point(s, j);
            if ((c >= 0 && u_isUWhiteSpace(c)) != space) break;
            i = j;
        }
        out.push_back({s.substr(start, i - start), space});
    }
    return out;
}

bool scheme_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
}

}  // namespace

std::string to_string(Language lang) {
    switch (lang) {
        case Language::Sql: return "SQL";
        case Language::JavaScript: return "JavaScript";
        case Language::Python: return "Python";
        case Language::Ruby: return "Ruby";
        case Language::Java: return "Java";
        case Language::Other: return "other";
    }
    return "other";
}

Language parse_language(std::string_view name) {
    const std::string s = lower_ascii(name);
    if (s == "sql") return Language::Sql;
    if (s == "javascript" || s == "js") return Language::JavaScript;
    if (s == "python") return Language::Python;
    if (s == "ruby") return Language::Ruby;
    if (s == "java") return Language::Java;
    if (s == "other") return Language::Other;
    throw TextError("unknown language '" + std::string(name) + "'");
}

const std::vector<Language>& studied_languages() {
    static const std::vector<Language> langs{Language::Sql, Language::JavaScript, Language::Python, Language::Ruby,
                                             Language::Java};
    return langs;
}

bool is_studied(Language lang) noexcept { return lang != Language::Other; }

std::string decode_entities(std::string_view text) {
    static const std::map<std::string, std::string, std::less<>> named{
        {"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", "\xC2\xA0"},
        {"hellip", "\xE2\x80\xA6"}, {"mdash", "\xE2\x80\x94"}, {"ndash", "\xE2\x80\x93"}, {"copy", "\xC2\xA9"},
    };
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        if (text[i] != '&') {
            out.push_back(text[i++]);
            continue;
        }
        const std::size_t semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(text[i++]);
            continue;
        }
        const std::string_view body = text.substr(i + 1, semi - i - 1);
        if (!body.empty() && body[0] == '#') {
            const bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
            const std::string digits(body.substr(hex ? 2 : 1));
            char* end = nullptr;
            const unsigned long cp = digits.empty() ? 0 : std::strtoul(digits.c_str(), &end, hex ? 16 : 10);
            if (!digits.empty() && end && *end == '\0' && cp > 0 && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF)) {
                uint8_t buf[4];
                int32_t len = 0;
                [[maybe_unused]] UBool err = false;
                U8_APPEND(buf, len, 4, static_cast<UChar32>(cp), err);
                out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
                i = semi + 1;
                continue;
            }
        } else if (const auto it = named.find(body); it != named.end()) {
            out += it->second;
            i = semi + 1;
            continue;
        }
        out.push_back(text[i++]);
    }
    return out;
}

namespace {

struct Tag {
    std::string name;
    bool closing = false;
};

bool block_tag(const std::string& name) {
    static const std::set<std::string> blocks{"p", "pre", "div", "blockquote", "li", "ul", "ol", "table",
                                              "h1", "h2", "h3", "h4", "h5", "h6", "hr"};
    return blocks.count(name) > 0;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace

PostDocument extract_parts(std::string_view html, std::string post_id) {
    PostDocument doc;
    doc.post_id = std::move(post_id);
    enum class Mode { None, Para, Pre, Code } mode = Mode::None;
    std::string buf;

    auto finish_para = [&](bool clean) {
        if (!clean) doc.diagnostics.push_back("unterminated <p> closed implicitly");
        std::string text = trim(decode_entities(buf));
        if (!text.empty()) doc.paragraphs.push_back(std::move(text));
        buf.clear();
        mode = Mode::None;
    };
    auto finish_code = [&](bool clean) {
        if (!clean) doc.diagnostics.push_back("unterminated <code> closed implicitly");
        std::string text = decode_entities(buf);
        if (!text.empty() && text.back() == '\n') text.pop_back();
        if (!trim(text).empty()) doc.code_blocks.push_back(std::move(text));
        buf.clear();
        mode = Mode::Pre;
    };
    auto handle = [&](const Tag& tag, auto& self) -> void {
        switch (mode) {
            case Mode::None:
                if (!tag.closing && tag.name == "p") mode = Mode::Para;
                if (!tag.closing && tag.name == "pre") mode = Mode::Pre;
                return;
            case Mode::Para:
                if (tag.name == "br") {
                    buf.push_back('\n');
                } else if (tag.closing && tag.name == "p") {
                    finish_para(true);
                } else if (block_tag(tag.name)) {
                    finish_para(false);
                    self(tag, self);
                }
                return;
            case Mode::Pre:
                if (!tag.closing && tag.name == "code") {
                    mode = Mode::Code;
                    buf.clear();
                } else if (tag.closing && tag.name == "pre") {
                    mode = Mode::None;
                } else if (!tag.closing && block_tag(tag.name)) {
                    mode = Mode::None;
                    self(tag, self);
                }
                return;
            case Mode::Code:
                if (tag.closing && tag.name == "code") {
                    finish_code(true);
                } else if (tag.closing && tag.name == "pre") {
                    finish_code(false);
                    mode = Mode::None;
                }
                return;
        }
    };

    std::size_t i = 0;
    while (i < html.size()) {
        if (html[i] != '<') {
            if (mode == Mode::Para || mode == Mode::Code) buf.push_back(html[i]);
            ++i;
            continue;
        }
        if (starts_at(html, i, "<!--")) {
            const std::size_t end = html.find("-->", i + 4);
            if (end == std::string_view::npos) {
                doc.diagnostics.push_back("unterminated comment skipped");
                break;
            }
            i = end + 3;
            continue;
        }
        std::size_t j = i + 1;
        Tag tag;
        if (j < html.size() && html[j] == '/') {
            tag.closing = true;
            ++j;
        }
        if (j >= html.size() || !std::isalpha(static_cast<unsigned char>(html[j]))) {
            if (mode == Mode::Para || mode == Mode::Code) buf.push_back('<');
            ++i;
            continue;
        }
        std::size_t k = j;
        while (k < html.size() && std::isalnum(static_cast<unsigned char>(html[k]))) ++k;
        tag.name = lower_ascii(html.substr(j, k - j));
        char quote = 0;
        while (k < html.size() && (quote || html[k] != '>')) {
            if (quote && html[k] == quote)
                quote = 0;
            else if (!quote && (html[k] == '"' || html[k] == '\''))
                quote = html[k];
            ++k;
        }
        if (k >= html.size()) {
            doc.diagnostics.push_back("unterminated <" + tag.name + "> tag skipped");
            break;
        }
        i = k + 1;
        handle(tag, handle);
    }
    if (mode == Mode::Para) finish_para(false);
    if (mode == Mode::Code) finish_code(false);
    return doc;
}

std::string nfc_normalize(std::string_view text) {
    if (!valid_utf8(text)) throw TextError("input is not valid UTF-8");
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw TextError(std::string("NFC normalizer unavailable: ") + u_errorName(status));
    const icu::UnicodeString in =
        icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    const icu::UnicodeString out = nfc->normalize(in, status);
    if (U_FAILURE(status)) throw TextError(std::string("NFC normalization failed: ") + u_errorName(status));
    std::string result;
    out.toUTF8String(result);
    return result;
}

std::optional<std::size_t> find_link(std::string_view token) {
    for (std::size_t pos = token.find("://"); pos != std::string_view::npos; pos = token.find("://", pos + 1)) {
        std::size_t start = pos;
        while (start > 0 && scheme_char(token[start - 1])) --start;
        while (start < pos && !std::isalpha(static_cast<unsigned char>(token[start]))) ++start;
        if (start < pos) return start;
    }
    return std::nullopt;
}

namespace {

template <class F>
std::string map_outside_links(std::string_view text, F&& f, bool collapse) {
    std::string out;
    for (const Piece& p : split_runs(text)) {
        if (p.space) {
            if (!collapse) out.append(p.text);
            continue;
        }
        const auto link = find_link(p.text);
        std::string word = link ? f(p.text.substr(0, *link)) + std::string(p.text.substr(*link)) : f(p.text);
        if (collapse) {
            if (word.empty()) continue;
            if (!out.empty()) out.push_back(' ');
        }
        out += word;
    }
    return out;
}

}  // namespace

std::string strip_punctuation(std::string_view text) {
    return map_outside_links(text, [](std::string_view s) { return remove_punct(s); }, false);
}

const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> words{
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
        "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did",
        "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
        "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into",
        "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of",
        "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
        "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
        "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very", "was",
        "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
        "you", "your", "yours", "yourself", "yourselves",
    };
    return words;
}

std::string clean_text(std::string_view text, const std::set<std::string>& stopwords) {
    const std::string stripped = strip_punctuation(text);
    const std::string lowered = map_outside_links(stripped, [](std::string_view s) { return to_lower(s); }, false);
    return map_outside_links(
        lowered,
        [&](std::string_view s) { return stopwords.count(std::string(s)) ? std::string() : std::string(s); }, true);
}

CommentRuleSet CommentRuleSet::defaults() {
    CommentRuleSet set;
    CommentRules c_like;
    c_like.line_markers = {"//"};
    c_like.block_delimiters = {{"/*", "*/"}};
    set.set(Language::Java, c_like);
    set.set(Language::JavaScript, c_like);

    CommentRules sql;
    sql.line_markers = {"--"};
    sql.block_delimiters = {{"/*", "*/"}};
    set.set(Language::Sql, sql);

    CommentRules python;
    python.line_markers = {"#"};
    python.block_delimiters = {{"\"\"\"", "\"\"\""}, {"'''", "'''"}};
    python.trim_before_line_comment = true;
    python.keep_shebang = true;
    set.set(Language::Python, python);

    CommentRules ruby;
    ruby.line_markers = {"#"};
    ruby.line_blocks = {{"=begin", "=end"}};
    ruby.guards = {"#{"};
    ruby.trim_before_line_comment = true;
    ruby.keep_shebang = true;
    set.set(Language::Ruby, ruby);
    return set;
}

namespace {

std::vector<std::pair<std::string, std::string>> pairs_from_json(const nlohmann::json& j, const std::string& where) {
    std::vector<std::pair<std::string, std::string>> out;
    if (!j.is_array()) throw ConfigError(where + " must be an array of [open, close] pairs");
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string() ||
            p[0].get<std::string>().empty() || p[1].get<std::string>().empty())
            throw ConfigError(where + " must hold non-empty [open, close] string pairs");
        out.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
    return out;
}

std::vector<std::string> strings_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& s : j) {
        if (!s.is_string() || s.get<std::string>().empty()) throw ConfigError(where + " must hold non-empty strings");
        out.push_back(s.get<std::string>());
    }
    return out;
}

}  // namespace

CommentRuleSet CommentRuleSet::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("comment rules must be an object keyed by language");
    CommentRuleSet set;
    for (const auto& [name, body] : j.items()) {
        Language lang;
        try {
            lang = parse_language(name);
        } catch (const TextError& e) {
            throw ConfigError(e.what());
        }
        if (!body.is_object()) throw ConfigError("rules for " + name + " must be an object");
        CommentRules r;
        for (const auto& [key, value] : body.items()) {
            const std::string where = name + "." + key;
            if (key == "line")
                r.line_markers = strings_from_json(value, where);
            else if (key == "block")
                r.block_delimiters = pairs_from_json(value, where);
            else if (key == "line_block")
                r.line_blocks = pairs_from_json(value, where);
            else if (key == "guards")
                r.guards = strings_from_json(value, where);
            else if (key == "trim_before_line_comment" && value.is_boolean())
                r.trim_before_line_comment = value.get<bool>();
            else if (key == "keep_shebang" && value.is_boolean())
                r.keep_shebang = value.get<bool>();
            else
                throw ConfigError("unknown or mistyped comment rule key " + where);
        }
        set.set(lang, std::move(r));
    }
    for (Language lang : studied_languages())
        if (!set.contains(lang)) throw ConfigError("comment rules missing language " + to_string(lang));
    return set;
}

CommentRuleSet CommentRuleSet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open comment rules file " + path);
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("comment rules file " + path + ": " + e.what());
    }
}

const CommentRules& CommentRuleSet::at(Language lang) const {
    const auto it = rules_.find(lang);
    if (it == rules_.end()) throw TextError("no comment rules for language " + to_string(lang));
    return it->second;
}

nlohmann::json CommentRuleSet::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [lang, r] : rules_) {
        auto pairs = [](const auto& v) {
            nlohmann::json a = nlohmann::json::array();
            for (const auto& [o, c] : v) a.push_back({o, c});
            return a;
        };
        j[lower_ascii(to_string(lang))] = {{"line", r.line_markers},
                                           {"block", pairs(r.block_delimiters)},
                                           {"line_block", pairs(r.line_blocks)},
                                           {"guards", r.guards},
                                           {"trim_before_line_comment", r.trim_before_line_comment},
                                           {"keep_shebang", r.keep_shebang}};
    }
    return j;
}

std::string strip_comments(std::string_view code, Language lang, const CommentRuleSet& rules) {
    const CommentRules& r = rules.at(lang);
    std::string out;
    out.reserve(code.size());
    const std::size_t n = code.size();
    std::size_t i = 0;
    if (r.keep_shebang && starts_at(code, 0, "#!")) {
        const std::size_t nl = code.find('\n');
        i = nl == std::string_view::npos ? n : nl + 1;
        out.append(code.substr(0, i));
    }
    auto line_end = [&](std::size_t from) {
        const std::size_t nl = code.find('\n', from);
        return nl == std::string_view::npos ? n : nl;
    };
    auto after_indent = [&](std::size_t from) {
        while (from < n && is_hspace(code[from])) ++from;
        return from;
    };
    auto word_end = [&](std::size_t at) { return at >= n || std::isspace(static_cast<unsigned char>(code[at])); };

    while (i < n) {
        if (i == 0 || code[i - 1] == '\n') {
            const std::size_t j = after_indent(i);
            bool removed = false;
            for (const auto& [open, close] : r.line_blocks) {
                if (!starts_at(code, j, open) || !word_end(j + open.size())) continue;
                std::size_t end = n;
                for (std::size_t line = line_end(j); line < n; line = line_end(line + 1)) {
                    const std::size_t k = after_indent(line + 1);
                    if (starts_at(code, k, close) && word_end(k + close.size())) {
                        const std::size_t e = line_end(k);
                        end = e < n ? e + 1 : n;
                        break;
                    }
                }
                i = end;
                removed = true;
                break;
            }
            if (removed) continue;
        }
        bool matched = false;
        for (const auto& [open, close] : r.block_delimiters) {
            if (!starts_at(code, i, open)) continue;
            const std::size_t c = code.find(close, i + open.size());
            i = c == std::string_view::npos ? n : c + close.size();
            matched = true;
            break;
        }
        if (matched) continue;
        for (const auto& marker : r.line_markers) {
            if (!starts_at(code, i, marker)) continue;
            if (std::any_of(r.guards.begin(), r.guards.end(), [&](const std::string& g) { return starts_at(code, i, g); }))
                continue;
            if (r.trim_before_line_comment)
                while (!out.empty() && is_hspace(out.back())) out.pop_back();
            i = line_end(i);
            matched = true;
            break;
        }
        if (matched) continue;
        out.push_back(code[i++]);
    }
    return out;
}

namespace {

struct KeywordRule {
    std::regex pattern;
    double weight;
};

using Rules = std::vector<std::pair<Language, std::vector<KeywordRule>>>;

const Rules& keyword_rules() {
    static const Rules rules = [] {
        const auto icase = std::regex::ECMAScript | std::regex::icase;
        const auto plain = std::regex::ECMAScript;
        auto r = [](const char* p, std::regex::flag_type f, double w) { return KeywordRule{std::regex(p, f), w}; };
        Rules out;
        out.push_back({Language::Sql,
                       {r(R"(\bselect\b)", icase, 2), r(R"(\bfrom\b)", icase, 1), r(R"(\bwhere\b)", icase, 1),
                        r(R"(\binsert\s+into\b)", icase, 3), r(R"(\bupdate\s+\w+\s+set\b)", icase, 3),
                        r(R"(\bdelete\s+from\b)", icase, 3), r(R"(\bcreate\s+(table|index|view|procedure)\b)", icase, 3),
                        r(R"(\bjoin\b)", icase, 1), r(R"(\bgroup\s+by\b)", icase, 2), r(R"(\border\s+by\b)", icase, 2),
                        r(R"(\bvarchar\b|\bprimary\s+key\b)", icase, 2)}});
        out.push_back({Language::JavaScript,
                       {r(R"(\bfunction\b)", plain, 2), r(R"(\b(var|let|const)\s+\w+\s*=)", plain, 3),
                        r(R"(=>)", plain, 2), r(R"(console\.log)", plain, 3), r(R"(\bdocument\.)", plain, 3),
                        r(R"(===|!==)", plain, 3), r(R"(\$\()", plain, 2), r(R"(\brequire\()", plain, 2),
                        r(R"(\bwindow\.)", plain, 2)}});
        out.push_back({Language::Python,
                       {r(R"(^\s*def\s+\w+\s*\(.*\)\s*:)", plain, 3), r(R"(^\s*(from\s+[\w.]+\s+)?import\s+[\w.]+)", plain, 2),
                        r(R"(\bself\.)", plain, 2), r(R"(\belif\b)", plain, 3), r(R"(\bprint\()", plain, 1),
                        r(R"(^\s*(if|for|while|with|try|except|else|class)\b.*:\s*$)", plain, 2),
                        r(R"(\b(None|True|False)\b)", plain, 1), r(R"(__\w+__)", plain, 2), r(R"(\blambda\b)", plain, 1)}});
        out.push_back({Language::Ruby,
                       {r(R"(^\s*def\s+\w+[?!]?(\s*\(.*\))?\s*$)", plain, 3), r(R"(^\s*end\s*$)", plain, 2),
                        r(R"(\bputs\b)", plain, 3), r(R"(\bdo\s*\|)", plain, 3), r(R"(#\{)", plain, 2),
                        r(R"(\belsif\b)", plain, 3), r(R"(\bnil\b)", plain, 2), r(R"(\battr_(accessor|reader|writer)\b)", plain, 3),
                        r(R"(\brequire\s+['"])", plain, 2), r(R"(:\w+\s*=>)", plain, 1), r(R"(\.each\b)", plain, 1)}});
        out.push_back({Language::Java,
                       {r(R"(\bpublic\s+(static\s+)?(class|void|final|interface)\b)", plain, 3),
                        r(R"(\b(private|protected|public)\s+\w+(<[^>]*>)?\s+\w+\s*[;=(])", plain, 3),
                        r(R"(System\.out\.print)", plain, 3), r(R"(^\s*import\s+java)", plain, 3),
                        r(R"(\bnew\s+[A-Z]\w*\s*[(<\[])", plain, 2), r(R"(\bString\b)", plain, 1), r(R"(@Override)", plain, 3),
                        r(R"(\b(int|void|boolean|double)\s+\w+)", plain, 2)}});
        return out;
    }();
    return rules;
}

}  // namespace

LanguageGuess heuristic_language(std::string_view snippet) {
    std::vector<std::string> lines;
    std::stringstream ss{std::string(snippet)};
    for (std::string line; std::getline(ss, line);) lines.push_back(line);
    LanguageGuess guess;
    guess.source = "heuristic";
    double total = 0.0, best = 0.0;
    for (const auto& [lang, rules] : keyword_rules()) {
        double score = 0.0;
        for (const auto& line : lines)
            for (const auto& rule : rules)
                if (std::regex_search(line, rule.pattern)) score += rule.weight;
        total += score;
        if (score > best) {
            best = score;
            guess.language = lang;
        }
    }
    guess.confidence = total > 0.0 ? best / total : 0.0;
    return guess;
}

LanguageGuess identify_language(std::string_view snippet, const LanguageIdentifier& external) {
    if (trim(snippet).empty()) throw TextError("cannot identify the language of an empty snippet");
    if (external) {
        std::optional<Language> lang;
        try {
            lang = external(snippet);
        } catch (const std::exception&) {
            lang.reset();
        }
        if (lang) return {*lang, 1.0, "external", false};
        LanguageGuess g = heuristic_language(snippet);
        g.fallback = true;
        return g;
    }
    return heuristic_language(snippet);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    auto word = [](unsigned char c) { return c >= 0x80 || std::isalnum(c) || c == '_'; };
    for (std::size_t i = 0; i < text.size();) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (word(c)) {
            const std::size_t start = i;
            while (i < text.size() && word(static_cast<unsigned char>(text[i]))) ++i;
            out.emplace_back(text.substr(start, i - start));
        } else {
            out.emplace_back(1, text[i++]);
        }
    }
    return out;
}

BimodalSequence pack_sequence(const std::vector<std::string>& words, const std::vector<std::string>& code,
                              std::size_t limit) {
    if (words.empty() && code.empty()) throw TextError("cannot pack a sequence with no word or code tokens");
    if (limit < 4) throw TextError("sequence limit must leave room for content and three special tokens");
    const std::size_t budget = limit - 3;
    std::size_t nw = words.size(), nc = code.size();
    BimodalSequence seq;
    if (nw + nc > budget) {
        seq.truncated = true;
        if (nw == 0) {
            nc = budget;
        } else if (nc == 0) {
            nw = budget;
        } else {
            const auto share = static_cast<std::size_t>(
                std::floor(static_cast<double>(budget) * static_cast<double>(nw) / static_cast<double>(nw + nc)));
            std::size_t w = std::clamp<std::size_t>(share, 1, budget - 1);
            std::size_t c = budget - w;
            if (w > nw) {
                c += w - nw;
                w = nw;
            }
            if (c > nc) {
                w += c - nc;
                c = nc;
            }
            nw = w;
            nc = c;
        }
    }
    seq.tokens.reserve(nw + nc + 3);
    seq.tokens.emplace_back(kClsToken);
    seq.tokens.insert(seq.tokens.end(), words.begin(), words.begin() + static_cast<std::ptrdiff_t>(nw));
    seq.tokens.emplace_back(kSepToken);
    seq.tokens.insert(seq.tokens.end(), code.begin(), code.begin() + static_cast<std::ptrdiff_t>(nc));
    seq.tokens.emplace_back(kEosToken);
    seq.word_span = {1, 1 + nw};
    seq.code_span = {2 + nw, 2 + nw + nc};
    seq.specials = {0, 1 + nw, 2 + nw + nc};
    return seq;
}

Vocabulary::Vocabulary() {
    for (std::string_view t : {kClsToken, kSepToken, kEosToken, kUnkToken}) add(std::string(t));
}

std::size_t Vocabulary::add(const std::string& token) {
    const auto [it, inserted] = ids_.try_emplace(token, tokens_.size());
    if (inserted) tokens_.push_back(token);
    return it->second;
}

std::size_t Vocabulary::id(const std::string& token) const {
    const auto it = ids_.find(token);
    return it == ids_.end() ? 3 : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const BimodalSequence& seq) const {
    std::vector<std::size_t> ids;
    ids.reserve(seq.tokens.size());
    for (const auto& t : seq.tokens) ids.push_back(id(t));
    return ids;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TextError("cannot write vocabulary " + path);
    for (const auto& t : tokens_) {
        if (t.find('\n') != std::string::npos) throw TextError("vocabulary token contains a newline");
        out << t << '\n';
    }
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TextError("cannot read vocabulary " + path);
    Vocabulary v;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line); ++line_no) {
        if (line_no < 4) {
            if (line != v.tokens_[line_no]) throw TextError("vocabulary " + path + " does not start with the special tokens");
            continue;
        }
        if (v.add(line) != line_no) throw TextError("vocabulary " + path + " repeats token '" + line + "'");
    }
    return v;
}

std::size_t cochran_n(double population, double p, double e, double z) {
    if (!(p > 0.0 && p < 1.0)) throw TextError("expected proportion must lie strictly between 0 and 1");
    if (!(e > 0.0)) throw TextError("margin of error must be positive");
    if (!(z > 0.0)) throw TextError("confidence quantile must be positive");
    if (!(population >= 1.0)) throw TextError("population size must be at least 1");
    const double n0 = z * z * p * (1.0 - p) / (e * e);
    const double n = std::isinf(population) ? n0 : n0 / (1.0 + (n0 - 1.0) / population);
    return static_cast<std::size_t>(std::ceil(n - 1e-9));
}

ProcessedPost TextPipeline::process(std::string_view html, std::string post_id) const {
    ProcessedPost post;
    const PostDocument doc = extract_parts(html, std::move(post_id));
    post.post_id = doc.post_id;
    post.diagnostics = doc.diagnostics;
    for (const auto& para : doc.paragraphs) {
        const std::string cleaned = clean_text(nfc_normalize(para), stopwords);
        if (cleaned.empty()) continue;
        if (!post.clean_text.empty()) post.clean_text.push_back(' ');
        post.clean_text += cleaned;
    }
    std::vector<std::string> code_tokens;
    for (const auto& block : doc.code_blocks) {
        ProcessedSnippet s;
        s.text = nfc_normalize(block);
        s.language = identify_language(s.text, identifier);
        s.kept = is_studied(s.language.language);
        if (s.kept) {
            s.text = strip_comments(s.text, s.language.language, rules);
            for (auto& t : tokenizer(s.text)) code_tokens.push_back(std::move(t));
        }
        post.snippets.push_back(std::move(s));
    }
    const std::vector<std::string> word_tokens = tokenizer(post.clean_text);
    if (word_tokens.empty() && code_tokens.empty())
        throw TextError("post " + post.post_id + " has no paragraph text or studied-language code");
    post.sequence = pack_sequence(word_tokens, code_tokens, limit);
    return post;
}

}  // namespace cqabench
