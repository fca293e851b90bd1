#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "infogap/util.hpp"

namespace infogap::corpus {

struct CleanConfig {
    // Matched case-insensitively against whole lines.
    std::string chapter_pattern = R"(\s*chapter\s+[0-9a-z-]+\s*)";
    std::string part_pattern = R"(\s*part\s+[0-9a-z-]+\s*)";
    // A line right after a chapter marker is taken as the chapter title when
    // it has at most this many words and no sentence-final punctuation.
    std::size_t max_title_words = 8;
};

struct Chapter {
    int index;  // 1-based, in order of appearance
    std::string body;
};

// Splits a raw novel into chapter bodies. Part lines, chapter marker lines,
// chapter titles, and empty lines are removed; text before the first marker
// is dropped. Throws InputError when no line matches the chapter pattern.
std::vector<Chapter> clean_text(std::string_view raw, const CleanConfig& cfg = {});

// Removes part/chapter marker lines and empty lines from a single body.
// Idempotent; returns clean input unchanged.
std::string clean_body(std::string_view body, const CleanConfig& cfg = {});

// Rule-based splitter: a sentence ends at . ! or ? (plus closing quotes or
// brackets) followed by whitespace and a capital letter, unless the word
// before the period is a known abbreviation, or a single initial followed by
// a name or another initial. Whitespace inside each sentence is collapsed to
// single spaces.
std::vector<std::string> split_sentences(std::string_view body);
inline constexpr int kSplitterVersion = 2;

struct SegmenterConfig {
    std::size_t window_size = 5;
    std::size_t overlap = 2;
    bool respect_chapter_boundaries = true;

    std::size_t step() const { return window_size - overlap; }
    void validate() const;  // throws ConfigError
};

struct TextSegment {
    std::uint64_t segment_id;
    int chapter_index;
    // 1-based inclusive sentence range within the chapter (within the whole
    // corpus when windows cross chapter boundaries).
    std::size_t sentence_begin;
    std::size_t sentence_end;
    std::string text;
    std::size_t word_count;
};

struct ChapterSentences {
    int chapter_index;
    std::vector<std::string> sentences;
};

// 1-based inclusive spans for a run of n sentences.
std::vector<std::pair<std::size_t, std::size_t>> window_spans(std::size_t n, const SegmenterConfig& cfg);

std::size_t word_count(std::string_view text);

// Chapters without sentences are skipped with a warning. When windows may
// cross chapters, a segment belongs to the chapter of its first sentence.
std::vector<TextSegment> segment(std::span<const ChapterSentences> chapters, const SegmenterConfig& cfg);

// Convenience: clean, split, segment.
std::vector<TextSegment> segment_novel(std::string_view raw, const CleanConfig& clean_cfg,
                                       const SegmenterConfig& cfg);

util::Table segments_table(std::span<const TextSegment> segments);
std::vector<TextSegment> parse_segments(const util::Table& table);

// ---- ratings ----------------------------------------------------------------

struct RatingColumns {
    std::string participant = "participant_id";
    std::string chapter = "chapter_index";
    std::string curiosity = "curiosity";
    std::string knows_book = "knows_book";
    std::string knows_movie = "knows_movie";
};

struct RatingRecord {
    std::string participant_id;
    int chapter_index;
    double curiosity;
    bool knows_book;
    bool knows_movie;
};

struct RatingLoad {
    std::vector<RatingRecord> records;
    std::size_t rejected = 0;  // unparsable, out-of-range, or duplicate rows
};

// Rejected rows are counted and reported through the log.
RatingLoad load_ratings(const util::Table& table, const RatingColumns& columns = {});

std::vector<RatingRecord> filter_naive(std::span<const RatingRecord> records);

struct ChapterCuriosity {
    int chapter_index;
    double mean_curiosity;
    std::size_t n_raters;
};

// Per-chapter means in chapter order. With n_chapters > 0, every chapter in
// 1..n_chapters must have at least one rater (InputError otherwise).
std::vector<ChapterCuriosity> mean_curiosity(std::span<const RatingRecord> records, int n_chapters = 0);

}  // namespace infogap::corpus
