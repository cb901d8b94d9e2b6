#include <gtest/gtest.h>

#include "flexkit/errors.hpp"
#include "flexkit/preprocess.hpp"
#include "flexkit/tokenizer.hpp"
#include "test_support.hpp"

using namespace flexkit;
namespace ft = flexkit::testing;

TEST(ParseDocument, HtmlTitleAndBody)
{
    const auto doc = parse_document("<html><head><title>T</title></head><body><p>x</p></body></html>", DocFormat::html);
    EXPECT_EQ(doc.title, "T");
    EXPECT_EQ(doc.text, "x");
}

TEST(ParseDocument, HtmlDropsChromeAndScripts)
{
    const std::string html = "<nav>Home | About</nav><script>var a = '<p>no</p>';</script>"
                             "<p>Keep&nbsp;this &amp; that</p><style>p{}</style><footer>(c) 2024</footer>";
    EXPECT_EQ(parse_document(html, DocFormat::html).text, "Keep this & that");
}

TEST(ParseDocument, HtmlBlocksBecomeLines)
{
    const auto doc = parse_document("<div>one</div><div>two <b>bold</b></div><ul><li>a</li><li>b</li></ul>",
                                    DocFormat::html);
    EXPECT_EQ(doc.text, "one\ntwo bold\na\nb");
}

TEST(ParseDocument, LiteralLessThanStaysText)
{
    EXPECT_EQ(parse_document("<p>1 < 2 and 3 > 2</p>", DocFormat::html).text, "1 < 2 and 3 > 2");
}

TEST(ParseDocument, FixturePageMatchesGolden)
{
    const auto html = ft::read_file(ft::data_dir() / "html" / "eiffel.html");
    const auto doc = parse_document(html, DocFormat::html, "eiffel.html");
    EXPECT_EQ(doc.title, "Eiffel Tower - Example Encyclopedia");
    auto golden = ft::read_file(ft::data_dir() / "golden" / "eiffel.txt");
    while (!golden.empty() && golden.back() == '\n') {
        golden.pop_back();
    }
    EXPECT_EQ(doc.text, golden);
}

TEST(ParseDocument, PlainAndMarkdownNormalizeNewlines)
{
    EXPECT_EQ(parse_document("a\r\nb\rc", DocFormat::plain).text, "a\nb\nc");
    EXPECT_EQ(normalize_newlines("a\n\n\n\n\nb"), "a\n\nb");
    const auto md = parse_document("# Heading\n\nBody text", DocFormat::markdown);
    EXPECT_EQ(md.title, "Heading");
}

TEST(ParseDocument, RejectsInvalidUtf8AndEmptyDocuments)
{
    EXPECT_THROW((void)parse_document("bad \xff\xfe bytes", DocFormat::plain), FormatError);
    EXPECT_THROW((void)parse_document("<script>x</script>", DocFormat::html), FormatError);
    EXPECT_THROW((void)parse_document("   \n ", DocFormat::plain), FormatError);
}

TEST(ParseDocument, StripsByteOrderMark)
{
    EXPECT_EQ(parse_document("\xef\xbb\xbfhello", DocFormat::plain).text, "hello");
}

TEST(Utf8, Validation)
{
    EXPECT_TRUE(is_valid_utf8("plain ascii"));
    EXPECT_TRUE(is_valid_utf8("\xe2\x9c\x93"));
    EXPECT_FALSE(is_valid_utf8("\xc0\xaf"));     // overlong
    EXPECT_FALSE(is_valid_utf8("\xed\xa0\x80")); // surrogate
    EXPECT_FALSE(is_valid_utf8("\xe2\x9c"));     // truncated
}

namespace {

// Independent window oracle: token index ranges for fixed chunking.
std::vector<std::pair<std::size_t, std::size_t>> fixed_windows(std::size_t n, std::size_t size, std::size_t overlap)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (n == 0) {
        return out;
    }
    for (std::size_t s = 0;; s += size - overlap) {
        const std::size_t e = std::min(s + size, n);
        out.emplace_back(s, e);
        if (e == n) {
            break;
        }
    }
    return out;
}

} // namespace

TEST(ChunkFixed, MatchesWindowOracle)
{
    const auto texts = ft::synthetic_corpus(20, 50, 0, 120, 3);
    for (const auto &text : texts) {
        for (auto [size, overlap] : {std::pair<std::size_t, std::size_t>{10, 0}, {10, 3}, {7, 6}, {200, 10}}) {
            const auto chunks = chunk_fixed(text, size, overlap, "u");
            const auto expected = fixed_windows(count_tokens(text), size, overlap);
            ASSERT_EQ(chunks.size(), expected.size());
            const auto tokens = tokenize(text);
            for (std::size_t i = 0; i < chunks.size(); ++i) {
                EXPECT_EQ(chunks[i].token_begin, expected[i].first);
                EXPECT_EQ(chunks[i].token_end, expected[i].second);
                EXPECT_EQ(chunks[i].chunk_index, i);
                EXPECT_EQ(chunks[i].parent_uri, "u");
                const std::vector<std::string> slice(tokens.begin() + static_cast<std::ptrdiff_t>(expected[i].first),
                                                     tokens.begin() + static_cast<std::ptrdiff_t>(expected[i].second));
                EXPECT_EQ(tokenize(chunks[i].text), slice);
            }
        }
    }
}

TEST(ChunkFixed, RejectsBadParameters)
{
    EXPECT_THROW((void)chunk_fixed("a b", 0, 0), InvalidArgument);
    EXPECT_THROW((void)chunk_fixed("a b", 4, 4), InvalidArgument);
    EXPECT_TRUE(chunk_fixed("", 4, 1).empty());
}

TEST(ChunkSentence, PacksWholeSentences)
{
    const std::string text = "One two three. Four five! Six seven eight nine? Ten.";
    const auto chunks = chunk_sentence(text, 5);
    // sentence sizes 3, 2, 4, 1
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].text, "One two three. Four five");
    EXPECT_EQ(chunks[1].text, "Six seven eight nine? Ten");
}

TEST(ChunkSentence, SplitsOverlongSentences)
{
    const auto chunks = chunk_sentence("a b c d e f g. h", 3);
    ASSERT_EQ(chunks.size(), 4u);
    EXPECT_EQ(chunks[0].text, "a b c");
    EXPECT_EQ(chunks[2].text, "g");
    EXPECT_EQ(chunks[3].text, "h");
}

TEST(ChunkSentence, CoversEveryTokenOnce)
{
    for (const auto &text : ft::synthetic_corpus(10, 30, 5, 80, 9)) {
        std::string with_stops;
        std::size_t i = 0;
        for (const auto &t : tokenize(text)) {
            with_stops += t;
            with_stops += (++i % 7 == 0) ? ". " : " ";
        }
        const auto chunks = chunk_sentence(with_stops, 10);
        std::size_t expect = 0;
        for (const auto &c : chunks) {
            EXPECT_EQ(c.token_begin, expect);
            EXPECT_LE(c.token_end - c.token_begin, 10u);
            expect = c.token_end;
        }
        EXPECT_EQ(expect, count_tokens(with_stops));
    }
}

TEST(SentenceRanges, NewlinesAndTerminators)
{
    const auto r = sentence_token_ranges("a b.c d\ne f? g");
    // "b.c" has no space after the dot, so it is not a boundary
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0], (std::pair<std::size_t, std::size_t>{0, 4}));
    EXPECT_EQ(r[1], (std::pair<std::size_t, std::size_t>{4, 6}));
    EXPECT_EQ(r[2], (std::pair<std::size_t, std::size_t>{6, 7}));
}

namespace {

Document text_doc(std::string text)
{
    Document d;
    d.fields["text"] = std::move(text);
    return d;
}

} // namespace

TEST(KnowledgeRules, Parse)
{
    const auto rules = parse_knowledge_rules("drop_if_shorter_than:5,dedupe_exact,strip_boilerplate_lines:3");
    ASSERT_EQ(rules.size(), 3u);
    EXPECT_EQ(rules[0], (KnowledgeRule{KnowledgeRule::Kind::drop_if_shorter_than, 5}));
    EXPECT_EQ(rules[1].kind, KnowledgeRule::Kind::dedupe_exact);
    EXPECT_EQ(rules[2], (KnowledgeRule{KnowledgeRule::Kind::strip_boilerplate_lines, 3}));
    EXPECT_TRUE(parse_knowledge_rules("").empty());
    EXPECT_THROW((void)parse_knowledge_rules("frobnicate"), InvalidArgument);
    EXPECT_THROW((void)parse_knowledge_rules("drop_if_shorter_than:x"), InvalidArgument);
}

TEST(KnowledgeRules, DropShortAndDedupe)
{
    std::vector<Document> docs = {text_doc("a b c"), text_doc("one"), text_doc("a b c"), text_doc("x y z w")};
    const auto out = knowledge_preprocess(docs, parse_knowledge_rules("drop_if_shorter_than:2,dedupe_exact"));
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].fields.at("text"), "a b c");
    EXPECT_EQ(out[1].fields.at("text"), "x y z w");
}

TEST(KnowledgeRules, StripBoilerplateLines)
{
    std::vector<Document> docs = {text_doc("Menu\nreal one"), text_doc("Menu\nreal two"), text_doc("Menu\nreal three"),
                                  text_doc("Menu")};
    const auto out = knowledge_preprocess(docs, parse_knowledge_rules("strip_boilerplate_lines:3"));
    ASSERT_EQ(out.size(), 3u); // the last document had nothing but boilerplate
    EXPECT_EQ(out[0].fields.at("text"), "real one");
    EXPECT_EQ(out[2].fields.at("text"), "real three");
}

TEST(KnowledgeRules, NeverGrowsInput)
{
    std::vector<Document> docs;
    for (const auto &t : ft::synthetic_corpus(40, 5, 1, 6, 11)) {
        docs.push_back(text_doc(t));
    }
    const auto out = knowledge_preprocess(docs, parse_knowledge_rules("dedupe_exact,drop_if_shorter_than:3"));
    EXPECT_LE(out.size(), docs.size());
}

TEST(PreprocessDirectory, FixturePagesAreDeterministic)
{
    PreprocessOptions opts;
    opts.chunk_size = 40;
    const auto a = preprocess_directory(ft::data_dir() / "html", opts);
    const auto b = preprocess_directory(ft::data_dir() / "html", opts);
    ASSERT_FALSE(a.documents.empty());
    EXPECT_EQ(a.documents, b.documents);
    EXPECT_TRUE(a.skipped.empty());
    EXPECT_EQ(a.documents.front().metadata.at("source"), "beatles.html");
    for (const auto &d : a.documents) {
        EXPECT_EQ(d.fields.at("text").find("Copyright"), std::string::npos);
        EXPECT_EQ(d.fields.at("text").find("tracker"), std::string::npos);
    }
}

TEST(PreprocessDirectory, SkipsUnknownExtensions)
{
    ft::TempDir dir;
    ft::write_file(dir / "a.txt", "hello there");
    ft::write_file(dir / "b.bin", "\x01\x02");
    const auto r = preprocess_directory(dir.path(), {});
    ASSERT_EQ(r.documents.size(), 1u);
    ASSERT_EQ(r.skipped.size(), 1u);
    EXPECT_EQ(r.skipped[0].first, "b.bin");
}
