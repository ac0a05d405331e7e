#include "cqabench/error.hpp"
#include "cqabench/random.hpp"
#include "cqabench/textprep.hpp"

#include "text_fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

using namespace cqabench;

namespace {

std::string random_word(Rng& rng, std::size_t max_len = 8) {
    static const std::string alpha = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJ0123456789";
    std::string w;
    const std::size_t len = 1 + rng.index(max_len);
    for (std::size_t i = 0; i < len; ++i) w += alpha[rng.index(alpha.size())];
    return w;
}

}  // namespace

TEST(Extract, ParagraphsCodeAndEntities) {
    const auto d = extract_parts("<p>Hello &amp; <a href='x'>bye</a></p><pre><code>x = 1 &lt; 2\n</code></pre>"
                                 "<p>one<br>two</p>",
                                 "7");
    EXPECT_EQ(d.post_id, "7");
    ASSERT_EQ(d.paragraphs.size(), 2u);
    EXPECT_EQ(d.paragraphs[0], "Hello & bye");
    EXPECT_EQ(d.paragraphs[1], "one\ntwo");
    ASSERT_EQ(d.code_blocks.size(), 1u);
    EXPECT_EQ(d.code_blocks[0], "x = 1 < 2");
    EXPECT_TRUE(d.diagnostics.empty());
}

TEST(Extract, UnterminatedElementsAreDiagnosed) {
    const auto d = extract_parts("<p>first<pre><code>code here</pre><p>last");
    EXPECT_EQ(d.paragraphs.size(), 2u);
    EXPECT_EQ(d.code_blocks.size(), 1u);
    EXPECT_GE(d.diagnostics.size(), 2u);
}

TEST(Entities, NamedAndNumeric) {
    EXPECT_EQ(decode_entities("&lt;&gt;&quot;&#39;&#x41;&#233;&nbsp;&bogus;"), "<>\"'A\xC3\xA9\xC2\xA0&bogus;");
}

TEST(Nfc, ComposesAndIsIdempotent) {
    const std::string decomposed = "e\xCC\x81";  // e + combining acute
    EXPECT_EQ(nfc_normalize(decomposed), "\xC3\xA9");
    Rng rng(2);
    const std::string pieces[] = {"a", "e\xCC\x81", "\xC3\xA9", " ", "\xE2\x84\xAB", "o\xCC\x88\xCC\x81", "Z"};
    for (int rep = 0; rep < 300; ++rep) {
        std::string s;
        for (int i = 0; i < 12; ++i) s += pieces[rng.index(std::size(pieces))];
        const auto once = nfc_normalize(s);
        EXPECT_EQ(nfc_normalize(once), once);
    }
    EXPECT_THROW(nfc_normalize("\xFF\xFE"), TextError);
}

TEST(Clean, PunctuationKeepsTheLinkByteForByte) {
    EXPECT_EQ(strip_punctuation(fixture::kListViewParagraph), fixture::kListViewStripped);
    const auto cleaned = clean_text(fixture::kListViewParagraph);
    EXPECT_NE(cleaned.find(fixture::kListViewUrl), std::string::npos);
    EXPECT_EQ(cleaned.find("The"), std::string::npos);
}

TEST(Clean, OrderAndStopwords) {
    EXPECT_EQ(clean_text("the cat, the hat", {"the"}), "cat hat");
    EXPECT_EQ(clean_text("The  CAT!\n\tsat", {"the"}), "cat sat");
    EXPECT_EQ(clean_text("See HTTPS://Example.com/A?b=C.", {}), "see HTTPS://Example.com/A?b=C.");
}

TEST(Clean, LinksSurviveRandomSurroundings) {
    Rng rng(6);
    const std::string links[] = {"https://a.b/c?d=e&f=G", "ftp://x.y/Z_(1).txt", "http://t.co/AbC#frag"};
    const std::string punct = ".,;:!?()\"'";
    for (int rep = 0; rep < 500; ++rep) {
        std::string text;
        const auto& link = links[rng.index(3)];
        const std::size_t at = rng.index(6);
        for (std::size_t i = 0; i < 6; ++i) {
            if (i == at) text += link + " ";
            text += random_word(rng) + punct[rng.index(punct.size())] + " ";
        }
        EXPECT_NE(clean_text(text, {}).find(link), std::string::npos) << text;
    }
}

TEST(Links, SchemeDetection) {
    EXPECT_EQ(find_link("(https://x.y)"), std::optional<std::size_t>(1));
    EXPECT_EQ(find_link("no link"), std::nullopt);
    EXPECT_EQ(find_link("://x"), std::nullopt);
}

TEST(Comments, RubyInterpolationAndBlocks) {
    EXPECT_EQ(strip_comments(fixture::kRubyBefore, Language::Ruby, CommentRuleSet::defaults()), fixture::kRubyAfter);
}

TEST(Comments, PerLanguageDefaults) {
    const auto rules = CommentRuleSet::defaults();
    EXPECT_EQ(strip_comments("int x = 1; // note", Language::Java, rules), "int x = 1; ");
    EXPECT_EQ(strip_comments("/* a */ int y;", Language::Java, rules), " int y;");
    // Markers inside string literals are not recognised as such.
    EXPECT_EQ(strip_comments("var s = \"//not\"; // yes", Language::JavaScript, rules), "var s = \"");
    EXPECT_EQ(strip_comments("SELECT 1 -- one\nFROM t /* x */", Language::Sql, rules), "SELECT 1 \nFROM t ");
    EXPECT_EQ(strip_comments("x = 1  # set\n\"\"\"doc\"\"\"\ny = '#'", Language::Python, rules), "x = 1\n\ny = '");
    EXPECT_THROW(strip_comments("x", Language::Other, rules), TextError);
}

TEST(Comments, CodeWithoutMarkersIsUnchanged) {
    Rng rng(9);
    const auto rules = CommentRuleSet::defaults();
    const std::string safe = "abcxyz0123 =+();{}[]<>\n\t.,";
    for (auto lang : studied_languages())
        for (int rep = 0; rep < 200; ++rep) {
            std::string code;
            const std::size_t len = rng.index(80);
            for (std::size_t i = 0; i < len; ++i) code += safe[rng.index(safe.size())];
            EXPECT_EQ(strip_comments(code, lang, rules), code) << to_string(lang);
        }
}

TEST(Comments, RulesJsonRoundTripAndValidation) {
    const auto rules = CommentRuleSet::defaults();
    const auto back = CommentRuleSet::from_json(rules.to_json());
    EXPECT_EQ(strip_comments(fixture::kRubyBefore, Language::Ruby, back), fixture::kRubyAfter);
    auto j = rules.to_json();
    j.erase("sql");
    EXPECT_THROW(CommentRuleSet::from_json(j), ConfigError);
    EXPECT_THROW(CommentRuleSet::from_json(nlohmann::json::parse(R"({"java": {"line": [""]}})")), ConfigError);
}

TEST(Language, HeuristicAndExternal) {
    EXPECT_EQ(identify_language("SELECT name FROM users WHERE id = 1;").language, Language::Sql);
    EXPECT_EQ(identify_language("def foo(x):\n    return x + 1\n").language, Language::Python);
    EXPECT_EQ(identify_language("public static void main(String[] args) { System.out.println(1); }").language,
              Language::Java);
    EXPECT_EQ(identify_language("const x = document.getElementById('a');\nconsole.log(x);").language,
              Language::JavaScript);
    EXPECT_EQ(identify_language("puts 'hi'\nend").language, Language::Ruby);
    const auto ext = identify_language("anything", [](std::string_view) { return Language::Java; });
    EXPECT_EQ(ext.language, Language::Java);
    EXPECT_EQ(ext.source, "external");
    const auto fb = identify_language("SELECT 1 FROM t", [](std::string_view) -> std::optional<Language> {
        throw std::runtime_error("offline");
    });
    EXPECT_TRUE(fb.fallback);
    EXPECT_EQ(fb.source, "heuristic");
    EXPECT_THROW(identify_language("  \n "), TextError);
    EXPECT_EQ(parse_language("JS"), Language::JavaScript);
    EXPECT_THROW(parse_language("cobol"), TextError);
}

TEST(Tokenize, WordsAndPunctuation) {
    EXPECT_EQ(tokenize("foo_bar(x, 12);"), (std::vector<std::string>{"foo_bar", "(", "x", ",", "12", ")", ";"}));
    EXPECT_EQ(tokenize("caf\xC3\xA9 ok"), (std::vector<std::string>{"caf\xC3\xA9", "ok"}));
}

TEST(Pack, ProportionalSplit) {
    const auto s = pack_sequence(std::vector<std::string>(600, "w"), std::vector<std::string>(600, "c"));
    EXPECT_EQ(s.size(), 512u);
    EXPECT_EQ(s.word_span.second - s.word_span.first, 254u);
    EXPECT_EQ(s.code_span.second - s.code_span.first, 255u);
    EXPECT_TRUE(s.truncated);
    const auto small = pack_sequence({"a", "b"}, {"c"});
    EXPECT_EQ(small.tokens, (std::vector<std::string>{"[CLS]", "a", "b", "[SEP]", "c", "[EOS]"}));
    EXPECT_FALSE(small.truncated);
    EXPECT_THROW(pack_sequence({}, {}), TextError);
    EXPECT_THROW(pack_sequence({"a"}, {"b"}, 3), TextError);
}

TEST(Pack, FuzzedInputsRespectTheLimit) {
    Rng rng(10);
    for (int rep = 0; rep < 2000; ++rep) {
        std::vector<std::string> w(rng.index(900)), c(rng.index(900));
        for (auto& t : w) t = random_word(rng, 3);
        for (auto& t : c) t = random_word(rng, 3);
        if (w.empty() && c.empty()) w.push_back("x");
        const std::size_t limit = 4 + rng.index(600);
        const auto s = pack_sequence(w, c, limit);
        EXPECT_LE(s.size(), limit);
        std::size_t specials = 0;
        for (const auto& t : s.tokens) specials += t == kClsToken || t == kSepToken || t == kEosToken;
        EXPECT_EQ(specials, 3u);
        const std::size_t wn = s.word_span.second - s.word_span.first, cn = s.code_span.second - s.code_span.first;
        EXPECT_EQ(wn + cn + 3, s.size());
        EXPECT_EQ(s.truncated, wn + cn < w.size() + c.size());
        // With a single content slot only one side can be represented.
        if (!w.empty() && (c.empty() || limit > 4)) {
            EXPECT_GE(wn, 1u) << limit;
        }
        if (!c.empty() && (w.empty() || limit > 4)) {
            EXPECT_GE(cn, 1u) << limit;
        }
    }
}

TEST(Vocabulary, IdsAndPersistence) {
    Vocabulary v;
    EXPECT_EQ(v.size(), 4u);
    EXPECT_EQ(v.id("[CLS]"), 0u);
    EXPECT_EQ(v.id("nope"), 3u);
    const auto a = v.add("alpha");
    EXPECT_EQ(v.add("alpha"), a);
    const auto path = std::filesystem::temp_directory_path() / "cqabench_vocab_test.txt";
    v.save(path.string());
    const auto back = Vocabulary::load(path.string());
    EXPECT_EQ(back.tokens(), v.tokens());
    std::filesystem::remove(path);
    const auto seq = pack_sequence({"alpha", "beta"}, {"alpha"});
    EXPECT_EQ(v.encode(seq), (std::vector<std::size_t>{0, a, 3, 1, a, 2}));
}

TEST(Cochran, ReferenceValuesAndMonotonicity) {
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(cochran_n(inf), 385u);
    EXPECT_EQ(cochran_n(100), 80u);
    std::size_t prev = 0;
    for (double n = 1; n < 1e6; n = std::floor(n * 1.7) + 1) {
        const auto s = cochran_n(n);
        EXPECT_GE(s, prev);
        EXPECT_LE(static_cast<double>(s), n);
        EXPECT_LE(s, 385u);
        prev = s;
    }
    EXPECT_GT(cochran_n(inf, 0.5, 0.03), cochran_n(inf, 0.5, 0.05));
    EXPECT_THROW(cochran_n(100, 1.0), TextError);
    EXPECT_THROW(cochran_n(0), TextError);
}

TEST(Pipeline, ProcessesAPost) {
    TextPipeline p;
    const auto post = p.process("<p>How do I select rows?</p><pre><code>SELECT * FROM users -- all\n</code></pre>"
                                "<pre><code>just prose here</code></pre>",
                                "42");
    EXPECT_EQ(post.post_id, "42");
    EXPECT_EQ(post.clean_text, "select rows");
    ASSERT_EQ(post.snippets.size(), 2u);
    EXPECT_TRUE(post.snippets[0].kept);
    EXPECT_EQ(post.snippets[0].language.language, Language::Sql);
    EXPECT_EQ(post.snippets[0].text, "SELECT * FROM users ");
    EXPECT_LE(post.sequence.size(), kMaxSequence);
    EXPECT_THROW(p.process("<p>   </p>"), TextError);
}
