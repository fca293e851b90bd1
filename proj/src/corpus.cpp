#include "infogap/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <regex>
#include <set>

#include "infogap/error.hpp"
#include "infogap/log.hpp"

namespace infogap::corpus {

namespace {

std::regex line_regex(const std::string& pattern) {
    try {
        return std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
        throw ConfigError("invalid pattern '" + pattern + "': " + e.what());
    }
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

bool blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

bool looks_like_title(std::string_view line, std::size_t max_words) {
    std::string t = util::trim(line);
    if (t.empty()) return false;
    if (word_count(t) > max_words) return false;
    char last = t.back();
    return last != '.' && last != '!' && last != '?' && last != '"' && last != '\'' && last != ',';
}

}  // namespace

std::vector<Chapter> clean_text(std::string_view raw, const CleanConfig& cfg) {
    const std::regex chapter_re = line_regex(cfg.chapter_pattern);
    const std::regex part_re = line_regex(cfg.part_pattern);

    std::vector<Chapter> chapters;
    bool expect_title = false;
    for (std::string_view line : lines_of(raw)) {
        std::string s(line);
        if (std::regex_match(s, chapter_re)) {
            chapters.push_back({static_cast<int>(chapters.size()) + 1, {}});
            expect_title = true;
            continue;
        }
        if (std::regex_match(s, part_re) || blank(line)) continue;
        if (chapters.empty()) continue;
        if (expect_title) {
            expect_title = false;
            if (looks_like_title(line, cfg.max_title_words)) continue;
        }
        std::string& body = chapters.back().body;
        if (!body.empty()) body += '\n';
        body += s;
    }
    if (chapters.empty())
        throw InputError("no chapter marker found; expected lines matching /" + cfg.chapter_pattern + "/i");
    return chapters;
}

std::string clean_body(std::string_view body, const CleanConfig& cfg) {
    const std::regex chapter_re = line_regex(cfg.chapter_pattern);
    const std::regex part_re = line_regex(cfg.part_pattern);
    std::string out;
    for (std::string_view line : lines_of(body)) {
        std::string s(line);
        if (blank(line) || std::regex_match(s, chapter_re) || std::regex_match(s, part_re)) continue;
        if (!out.empty()) out += '\n';
        out += s;
    }
    return out;
}

namespace {

const std::set<std::string>& abbreviations() {
    static const std::set<std::string> words = {
        "mr", "mrs", "ms", "dr", "st", "jr", "sr", "prof", "rev", "gen", "col", "lt", "sgt", "capt",
        "mt", "vs", "etc", "e.g", "i.e", "no", "fig", "approx", "dept", "ave", "co", "inc", "ltd"};
    return words;
}

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// Length of a closing quote or bracket at text[i], 0 if none.
std::size_t closer_at(std::string_view text, std::size_t i) {
    char c = text[i];
    if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
    // U+201D and U+2019
    if (text.substr(i, 3) == "\xE2\x80\x9D" || text.substr(i, 3) == "\xE2\x80\x99") return 3;
    return 0;
}

std::size_t opener_at(std::string_view text, std::size_t i) {
    char c = text[i];
    if (c == '"' || c == '\'' || c == '(' || c == '[') return 1;
    // U+201C and U+2018
    if (text.substr(i, 3) == "\xE2\x80\x9C" || text.substr(i, 3) == "\xE2\x80\x98") return 3;
    return 0;
}

// A lone letter before the period followed by a name ("J. Smith") or another
// initial ("J. R.").
bool initial_before(std::string_view text, std::size_t period, std::size_t next) {
    if (period == 0 || !std::isalpha(static_cast<unsigned char>(text[period - 1]))) return false;
    if (period >= 2 && !is_space(static_cast<unsigned char>(text[period - 2])) && opener_at(text, period - 2) == 0)
        return false;
    std::size_t e = next;
    while (e < text.size() && std::isalpha(static_cast<unsigned char>(text[e]))) ++e;
    if (e - next >= 2) return true;
    return e - next == 1 && e < text.size() && text[e] == '.';
}

bool abbreviation_before(std::string_view text, std::size_t period) {
    std::size_t b = period;
    while (b > 0 && !is_space(static_cast<unsigned char>(text[b - 1])) && opener_at(text, b - 1) == 0) --b;
    std::string word = util::to_lower(text.substr(b, period - b));
    if (word.empty()) return false;
    return abbreviations().count(word) != 0;
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    bool pending = false;
    for (char c : text) {
        if (is_space(static_cast<unsigned char>(c))) {
            pending = !out.empty();
            continue;
        }
        if (pending) out += ' ';
        pending = false;
        out += c;
    }
    return out;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view body) {
    std::vector<std::string> sentences;
    std::size_t start = 0;
    const std::size_t n = body.size();
    for (std::size_t i = 0; i < n; ++i) {
        char c = body[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t end = i + 1;
        while (end < n && (body[end] == '.' || body[end] == '!' || body[end] == '?')) ++end;
        while (end < n) {
            std::size_t len = closer_at(body, end);
            if (len == 0) break;
            end += len;
        }
        std::size_t j = end;
        if (j >= n || !is_space(static_cast<unsigned char>(body[j]))) {
            i = end - 1;
            continue;
        }
        while (j < n && is_space(static_cast<unsigned char>(body[j]))) ++j;
        std::size_t k = j;
        while (k < n) {
            std::size_t len = opener_at(body, k);
            if (len == 0) break;
            k += len;
        }
        bool capital = k < n && std::isupper(static_cast<unsigned char>(body[k]));
        bool abbreviated = c == '.' && end == i + 1 && (abbreviation_before(body, i) || initial_before(body, i, k));
        if (capital && !abbreviated) {
            std::string sentence = collapse_whitespace(body.substr(start, end - start));
            if (!sentence.empty()) sentences.push_back(std::move(sentence));
            start = j;
        }
        i = end - 1;
    }
    std::string tail = collapse_whitespace(body.substr(std::min(start, n)));
    if (!tail.empty()) sentences.push_back(std::move(tail));
    return sentences;
}

void SegmenterConfig::validate() const {
    if (window_size < 1) throw ConfigError("window_size must be >= 1");
    if (overlap >= window_size)
        throw ConfigError("overlap (" + std::to_string(overlap) + ") must be smaller than window_size (" +
                          std::to_string(window_size) + ")");
}

std::vector<std::pair<std::size_t, std::size_t>> window_spans(std::size_t n, const SegmenterConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    if (n == 0) return spans;
    for (std::size_t start = 1;; start += cfg.step()) {
        std::size_t end = std::min(start + cfg.window_size - 1, n);
        spans.emplace_back(start, end);
        if (end == n) break;
    }
    return spans;
}

std::size_t word_count(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

namespace {

std::string join_range(const std::vector<std::string>& sentences, std::size_t begin, std::size_t end) {
    std::string text;
    for (std::size_t i = begin; i <= end; ++i) {
        if (!text.empty()) text += ' ';
        text += sentences[i - 1];
    }
    return text;
}

}  // namespace

std::vector<TextSegment> segment(std::span<const ChapterSentences> chapters, const SegmenterConfig& cfg) {
    cfg.validate();
    std::vector<TextSegment> out;
    std::uint64_t next_id = 0;
    if (cfg.respect_chapter_boundaries) {
        for (const auto& chapter : chapters) {
            if (chapter.sentences.empty()) {
                log::warn("chapter " + std::to_string(chapter.chapter_index) + " has no sentences; skipped");
                continue;
            }
            for (auto [b, e] : window_spans(chapter.sentences.size(), cfg)) {
                std::string text = join_range(chapter.sentences, b, e);
                std::size_t words = word_count(text);
                out.push_back({next_id++, chapter.chapter_index, b, e, std::move(text), words});
            }
        }
        return out;
    }
    std::vector<std::string> stream;
    std::vector<int> owner;
    for (const auto& chapter : chapters) {
        if (chapter.sentences.empty())
            log::warn("chapter " + std::to_string(chapter.chapter_index) + " has no sentences; skipped");
        for (const auto& s : chapter.sentences) {
            stream.push_back(s);
            owner.push_back(chapter.chapter_index);
        }
    }
    for (auto [b, e] : window_spans(stream.size(), cfg)) {
        std::string text = join_range(stream, b, e);
        std::size_t words = word_count(text);
        out.push_back({next_id++, owner[b - 1], b, e, std::move(text), words});
    }
    return out;
}

std::vector<TextSegment> segment_novel(std::string_view raw, const CleanConfig& clean_cfg,
                                       const SegmenterConfig& cfg) {
    std::vector<ChapterSentences> chapters;
    for (const auto& chapter : clean_text(raw, clean_cfg))
        chapters.push_back({chapter.index, split_sentences(chapter.body)});
    return segment(chapters, cfg);
}

util::Table segments_table(std::span<const TextSegment> segments) {
    util::Table table;
    table.header = {"segment_id", "chapter_index", "sentence_begin", "sentence_end", "word_count", "text"};
    for (const auto& s : segments) {
        std::string text = s.text;
        std::replace(text.begin(), text.end(), '\t', ' ');
        std::replace(text.begin(), text.end(), '\n', ' ');
        table.rows.push_back({std::to_string(s.segment_id), std::to_string(s.chapter_index),
                              std::to_string(s.sentence_begin), std::to_string(s.sentence_end),
                              std::to_string(s.word_count), std::move(text)});
    }
    return table;
}

std::vector<TextSegment> parse_segments(const util::Table& table) {
    const std::size_t id = table.column("segment_id"), ch = table.column("chapter_index"),
                      b = table.column("sentence_begin"), e = table.column("sentence_end"),
                      wc = table.column("word_count"), tx = table.column("text");
    std::vector<TextSegment> out;
    for (const auto& row : table.rows) {
        out.push_back({static_cast<std::uint64_t>(util::parse_int(row[id])),
                       static_cast<int>(util::parse_int(row[ch])), static_cast<std::size_t>(util::parse_int(row[b])),
                       static_cast<std::size_t>(util::parse_int(row[e])), row[tx],
                       static_cast<std::size_t>(util::parse_int(row[wc]))});
    }
    return out;
}

namespace {

bool parse_flag(std::string_view text) {
    std::string t = util::to_lower(util::trim(text));
    if (t == "1" || t == "true" || t == "yes" || t == "y") return true;
    if (t == "0" || t == "false" || t == "no" || t == "n") return false;
    throw InputError("not a flag: '" + t + "'");
}

}  // namespace

RatingLoad load_ratings(const util::Table& table, const RatingColumns& columns) {
    const std::size_t p = table.column(columns.participant), ch = table.column(columns.chapter),
                      cu = table.column(columns.curiosity), kb = table.column(columns.knows_book),
                      km = table.column(columns.knows_movie);
    RatingLoad load;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& row : table.rows) {
        try {
            RatingRecord r{util::trim(row[p]), static_cast<int>(util::parse_int(row[ch])),
                           util::parse_double(row[cu]), parse_flag(row[kb]), parse_flag(row[km])};
            if (!(r.curiosity >= 0 && r.curiosity <= 100) || r.chapter_index < 1 ||
                !seen.insert({r.participant_id, r.chapter_index}).second) {
                ++load.rejected;
                continue;
            }
            load.records.push_back(std::move(r));
        } catch (const InputError&) {
            ++load.rejected;
        }
    }
    if (load.rejected > 0)
        log::warn("ratings: rejected " + std::to_string(load.rejected) + " of " + std::to_string(table.rows.size()) +
                  " rows (unparsable, out of [0,100], or duplicate participant/chapter)");
    return load;
}

std::vector<RatingRecord> filter_naive(std::span<const RatingRecord> records) {
    std::vector<RatingRecord> kept;
    for (const auto& r : records)
        if (!r.knows_book && !r.knows_movie) kept.push_back(r);
    return kept;
}

std::vector<ChapterCuriosity> mean_curiosity(std::span<const RatingRecord> records, int n_chapters) {
    std::map<int, std::pair<double, std::size_t>> sums;
    for (const auto& r : records) {
        auto& [sum, count] = sums[r.chapter_index];
        sum += r.curiosity;
        ++count;
    }
    if (n_chapters > 0)
        for (int c = 1; c <= n_chapters; ++c)
            if (sums.find(c) == sums.end())
                throw InputError("chapter " + std::to_string(c) + " has no ratings from kept raters");
    std::vector<ChapterCuriosity> out;
    for (const auto& [chapter, acc] : sums) {
        if (n_chapters > 0 && chapter > n_chapters) continue;
        out.push_back({chapter, acc.first / static_cast<double>(acc.second), acc.second});
    }
    return out;
}

}  // namespace infogap::corpus
