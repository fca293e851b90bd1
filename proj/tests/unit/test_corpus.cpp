#include <doctest.h>

#include <cmath>

#include "infogap/corpus.hpp"
#include "infogap/error.hpp"
#include "support/testing.hpp"

using namespace infogap;
using namespace infogap::corpus;

TEST_CASE("clean_text strips part, chapter and title lines") {
    auto chapters = clean_text("Part One\nChapter 1\nThe Tributes\n\nText A.");
    REQUIRE(chapters.size() == 1);
    CHECK(chapters[0].index == 1);
    CHECK(chapters[0].body == "Text A.");
}

TEST_CASE("clean_text keeps a first line that reads like prose") {
    auto chapters = clean_text("CHAPTER 2\nShe ran.\nChapter three\nHe stayed. Then left.\n");
    REQUIRE(chapters.size() == 2);
    CHECK(chapters[0].body == "She ran.");
    CHECK(chapters[1].body == "He stayed. Then left.");
}

TEST_CASE("clean_text without a marker names the pattern") {
    try {
        clean_text("Just prose.\nMore prose.");
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("chapter") != std::string::npos);
    }
}

TEST_CASE("clean_body is the identity on clean input and idempotent") {
    const std::string body = "First line.\nSecond line here.";
    CHECK(clean_body(body) == body);
    const std::string dirty = "Part Two\nChapter 9\n\nFirst line.\n\nSecond line here.";
    CHECK(clean_body(dirty) == body);
    CHECK(clean_body(clean_body(dirty)) == clean_body(dirty));
}

TEST_CASE("split_sentences") {
    CHECK(split_sentences("A. B? C!") == std::vector<std::string>{"A.", "B?", "C!"});
    CHECK(split_sentences("Mr. Smith ran. He fell.") == std::vector<std::string>{"Mr. Smith ran.", "He fell."});
    CHECK(split_sentences("").empty());
    CHECK(split_sentences("He said \"Go.\" Then   left.") ==
          std::vector<std::string>{"He said \"Go.\"", "Then left."});
    CHECK(split_sentences("J. R. wrote it. Done.") == std::vector<std::string>{"J. R. wrote it.", "Done."});
}

TEST_CASE("window_spans examples") {
    SegmenterConfig cfg;
    using Spans = std::vector<std::pair<std::size_t, std::size_t>>;
    CHECK(window_spans(12, cfg) == Spans{{1, 5}, {4, 8}, {7, 11}, {10, 12}});
    CHECK(window_spans(4, cfg) == Spans{{1, 4}});
    CHECK(window_spans(0, cfg).empty());
}

TEST_CASE("window_spans cover every sentence with the configured step") {
    for (std::size_t n = 1; n <= 40; ++n)
        for (std::size_t w = 1; w <= 8; ++w)
            for (std::size_t o = 0; o < w; ++o) {
                SegmenterConfig cfg{w, o, true};
                const auto spans = window_spans(n, cfg);
                REQUIRE(!spans.empty());
                CHECK(spans.front().first == 1);
                CHECK(spans.back().second == n);
                for (std::size_t i = 0; i < spans.size(); ++i) {
                    CHECK(spans[i].second - spans[i].first + 1 <= w);
                    if (i > 0) CHECK(spans[i].first == spans[i - 1].first + (w - o));
                }
                const double expected = std::max(1.0, std::ceil((double(n) - double(w)) / double(w - o)) + 1);
                CHECK(spans.size() == static_cast<std::size_t>(expected));
            }
}

TEST_CASE("invalid segmenter settings") {
    CHECK_THROWS_AS(window_spans(5, SegmenterConfig{3, 3, true}), ConfigError);
    CHECK_THROWS_AS(window_spans(5, SegmenterConfig{0, 0, true}), ConfigError);
}

TEST_CASE("segment respects chapter boundaries and skips empty chapters") {
    testing::LogCapture logs;
    std::vector<ChapterSentences> chapters = {
        {1, {"One a.", "Two b.", "Three c."}}, {2, {}}, {3, {"Four d.", "Five e."}}};
    const auto segs = segment(chapters, SegmenterConfig{2, 1, true});
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].chapter_index == 1);
    CHECK(segs[0].text == "One a. Two b.");
    CHECK(segs[0].word_count == 4);
    CHECK(segs[1].text == "Two b. Three c.");
    CHECK(segs[2].chapter_index == 3);
    CHECK(segs[2].sentence_begin == 1);
    CHECK(segs[2].segment_id == 2);
    CHECK(logs.contains("chapter 2"));
}

TEST_CASE("segments crossing chapters belong to the first sentence's chapter") {
    testing::LogCapture logs;
    std::vector<ChapterSentences> chapters = {{1, {"A a.", "B b.", "C c."}}, {2, {"D d.", "E e."}}};
    const auto segs = segment(chapters, SegmenterConfig{2, 0, false});
    REQUIRE(segs.size() == 3);
    CHECK(segs[1].text == "C c. D d.");
    CHECK(segs[1].chapter_index == 1);
    CHECK(segs[2].chapter_index == 2);
}

TEST_CASE("segments table round-trip") {
    std::vector<ChapterSentences> chapters = {{1, {"Plain text here.", "Another one."}}};
    const auto segs = segment(chapters, SegmenterConfig{1, 0, true});
    const auto back = parse_segments(segments_table(segs));
    REQUIRE(back.size() == segs.size());
    for (std::size_t i = 0; i < segs.size(); ++i) {
        CHECK(back[i].segment_id == segs[i].segment_id);
        CHECK(back[i].chapter_index == segs[i].chapter_index);
        CHECK(back[i].word_count == segs[i].word_count);
        CHECK(back[i].text == segs[i].text);
    }
}

namespace {

util::Table ratings(std::vector<std::vector<std::string>> rows) {
    util::Table t;
    t.header = {"participant_id", "chapter_index", "curiosity", "knows_book", "knows_movie"};
    t.rows = std::move(rows);
    return t;
}

}  // namespace

TEST_CASE("mean curiosity over naive raters") {
    auto load = load_ratings(ratings({{"a", "1", "60", "no", "no"}, {"b", "1", "80", "false", "0"}}));
    auto kept = filter_naive(load.records);
    auto means = mean_curiosity(kept);
    REQUIRE(means.size() == 1);
    CHECK(means[0].mean_curiosity == doctest::Approx(70));
    CHECK(means[0].n_raters == 2);
}

TEST_CASE("raters who know the movie or book are excluded") {
    auto load = load_ratings(ratings({{"a", "1", "60", "no", "yes"}, {"b", "1", "80", "true", "no"},
                                      {"c", "1", "50", "no", "no"}}));
    auto kept = filter_naive(load.records);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].participant_id == "c");
}

TEST_CASE("bad rating rows are rejected and counted") {
    testing::LogCapture logs;
    auto load = load_ratings(ratings({{"a", "1", "101", "no", "no"}, {"a", "2", "x", "no", "no"},
                                      {"b", "1", "40", "no", "no"}, {"b", "1", "41", "no", "no"},
                                      {"c", "0", "40", "no", "no"}}));
    CHECK(load.records.size() == 1);
    CHECK(load.rejected == 4);
    CHECK(logs.contains("rejected"));
}

TEST_CASE("a chapter without kept raters is an error") {
    auto load = load_ratings(ratings({{"a", "1", "50", "no", "no"}, {"a", "3", "50", "no", "no"}}));
    CHECK_THROWS_AS(mean_curiosity(load.records, 3), InputError);
}
