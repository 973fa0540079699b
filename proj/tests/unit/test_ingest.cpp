#include <gtest/gtest.h>

#include "argmine/error.hpp"
#include "argmine/ingest.hpp"
#include "argmine/random.hpp"
#include "argmine/utf8.hpp"
#include "support/golden.hpp"

using namespace argmine;

namespace {

std::vector<argmine::testing::GoldenCase> cases() {
  return argmine::testing::golden_cases(std::string(ARGMINE_TEST_DATA) + "/golden");
}

std::string strip_space(std::string_view s) {
  std::string out;
  for (char32_t c : utf8::decode(s)) {
    if (!utf8::is_space(c)) utf8::append(out, c);
  }
  return out;
}

// Random markup over a small alphabet. `wrap` marks one inline node (by
// creation order) to be wrapped in <strong>.
struct RandomHtml {
  Rng rng;
  int counter = 0;
  int wrap = -1;

  explicit RandomHtml(std::uint64_t seed) : rng(seed) {}

  std::string text() {
    static const std::vector<std::string> pieces = {"基金", "上涨", "下跌", "。", "！", "？", " ", "ab", "7", ";", "，"};
    std::string out;
    const std::size_t k = 1 + rng.index(6);
    for (std::size_t i = 0; i < k; ++i) out += pieces[rng.index(pieces.size())];
    return out;
  }

  std::string inline_node(int depth) {
    static const std::vector<std::pair<std::string, std::string>> tags = {
        {"<strong>", "</strong>"},
        {"<b>", "</b>"},
        {"<font size=\"4\">", "</font>"},
        {"<span style=\"color:#123456\">", "</span>"},
        {"<span class=\"supertalk\">", "</span>"},
        {"<a href=\"x\">", "</a>"},
        {"<em>", "</em>"},
        {"<span>", "</span>"}};
    const int id = counter++;
    std::string body;
    const std::size_t k = 1 + rng.index(3);
    for (std::size_t i = 0; i < k; ++i) {
      body += depth < 3 && rng.bernoulli(0.4) ? inline_node(depth + 1) : text();
    }
    const auto& t = tags[rng.index(tags.size())];
    std::string out = t.first + body + t.second;
    if (id == wrap) out = "<strong>" + out + "</strong>";
    return out;
  }

  std::string document() {
    static const std::vector<std::pair<std::string, std::string>> blocks = {
        {"<p>", "</p>"}, {"<div>", "</div>"}, {"<blockquote>", "</blockquote>"}, {"<h2>", "</h2>"}};
    std::string out;
    const std::size_t n = 1 + rng.index(5);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& b = blocks[rng.index(blocks.size())];
      out += b.first;
      const std::size_t k = 1 + rng.index(3);
      for (std::size_t j = 0; j < k; ++j) out += rng.bernoulli(0.6) ? inline_node(0) : text();
      out += "基金。" + b.second;
    }
    return out;
  }
};

}  // namespace

class Golden : public ::testing::TestWithParam<argmine::testing::GoldenCase> {};

TEST_P(Golden, ReproducesExpectedSegments) {
  EXPECT_EQ(argmine::testing::check_golden(GetParam()), "");
}

INSTANTIATE_TEST_SUITE_P(Files, Golden, ::testing::ValuesIn(cases()),
                         [](const auto& info) { return info.param.name.substr(3); });

TEST(GoldenSuite, HasTwentyCases) {
  EXPECT_EQ(cases().size(), 20u);
}

TEST(MarkOf, TagsAndAttributes) {
  EXPECT_TRUE(mark_of("b", {}).strong);
  EXPECT_TRUE(mark_of("STRONG", {}).strong);
  EXPECT_TRUE(mark_of("h3", {}).header);
  EXPECT_TRUE(mark_of("h1", {}).header);
  EXPECT_FALSE(mark_of("h7", {}).header);
  EXPECT_TRUE(mark_of("span", {{"class", "supertalk"}}).supertalk);
  EXPECT_TRUE(mark_of("supertalk", {}).supertalk);
  EXPECT_TRUE(mark_of("blockquote", {}).blockquote);
  EXPECT_TRUE(mark_of("font", {}).font);
  EXPECT_TRUE(mark_of("span", {{"style", "FONT-SIZE: 20px"}}).font);
  EXPECT_TRUE(mark_of("span", {{"style", "font-weight:bolder"}}).strong);
  EXPECT_FALSE(mark_of("span", {{"style", "font-weight:normal"}}).strong);
  EXPECT_TRUE(mark_of("span", {{"color", "#000000"}}).color);  // presence, not value
  EXPECT_TRUE(mark_of("p", {{"style", "margin:0; color: black"}}).color);
  EXPECT_FALSE(mark_of("marquee", {{"class", "x"}}).any());
  EXPECT_FALSE(mark_of("p", {}).any());
}

TEST(ParseHtml, EmptyVisibleTextThrows) {
  EXPECT_THROW(parse_html("<p>  </p><script>x</script>"), InvalidDocument);
}

TEST(ParseHtml, UnclosedTagsFlagAndRecover) {
  const HtmlTree t = parse_html_tree("<p><strong>半截");
  EXPECT_TRUE(t.malformed);
  ASSERT_FALSE(t.warnings.empty());
  EXPECT_NE(t.warnings[0].find("MalformedMarkup"), std::string::npos);
  const Document d = parse_html("<p><strong>半截");
  EXPECT_EQ(d.size(), 1u);
  EXPECT_TRUE(d.segment(0).marks.strong);
  EXPECT_FALSE(d.warnings().empty());
}

TEST(ParseHtml, TruncatesToPositionVocabulary) {
  std::string html = "<p>";
  for (int i = 0; i < 12; ++i) html += "句。";
  html += "</p>";
  IngestConfig cfg;
  cfg.max_segments = 5;
  const Document d = parse_html(html, "t", cfg);
  EXPECT_EQ(d.size(), 5u);
  EXPECT_FALSE(d.warnings().empty());
}

TEST(ParseHtml, SplitCharactersConfigurable) {
  IngestConfig cfg;
  cfg.split_chars = U"，";
  cfg.split_on_newline = false;
  const Document d = parse_html("<p>一，二。三<br>四</p>", "t", cfg);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.segment(0).text, "一，");
  EXPECT_EQ(d.segment(1).text, "二。三 四");  // <br> degrades to a space
}

TEST(ParseHtml, AttributeQuotingVariants) {
  const Document d = parse_html("<p><span class=supertalk>甲。</span><span STYLE='color:red'>乙。</span></p>");
  EXPECT_TRUE(d.segment(0).marks.supertalk);
  EXPECT_TRUE(d.segment(1).marks.color);
}

TEST(ParseHtml, LoneAngleBracketIsText) {
  const Document d = parse_html("<p>1 < 2。</p>");
  EXPECT_EQ(d.segment(0).text, "1 < 2。");
}

TEST(IngestProperties, TextIsPreservedAndPositionsAreOrdered) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    RandomHtml gen(seed);
    const std::string html = gen.document();
    const Document d = parse_html(html);
    std::string joined;
    std::size_t last_para = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      joined += d.segment(i).text;
      EXPECT_EQ(d.segment(i).segment_pos, i);
      EXPECT_GE(d.segment(i).paragraph_pos, last_para);
      last_para = d.segment(i).paragraph_pos;
    }
    ASSERT_EQ(strip_space(joined), strip_space(visible_text(parse_html_tree(html)))) << html;
  }
}

TEST(IngestProperties, WrappingInStrongNeverClearsMarks) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    RandomHtml plain(seed);
    const std::string a = plain.document();
    RandomHtml wrapped(seed);
    wrapped.wrap = static_cast<int>(seed % 5);
    const std::string b = wrapped.document();
    const Document da = parse_html(a), db = parse_html(b);
    ASSERT_EQ(da.size(), db.size()) << b;
    for (std::size_t i = 0; i < da.size(); ++i) {
      const auto ma = da.segment(i).marks.bits(), mb = db.segment(i).marks.bits();
      for (std::size_t k = 0; k < kNumMarks; ++k) EXPECT_LE(ma[k], mb[k]) << b;
      EXPECT_EQ(da.segment(i).text, db.segment(i).text);
    }
  }
}

TEST(VisibleText, CollapsesWhitespaceAndDropsMarkup) {
  EXPECT_EQ(visible_text(parse_html_tree("<p> a <b>b</b>\n\n c </p><style>p{}</style>")), "a b c");
}
