#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "patclass/errors.hpp"

namespace patclass {

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;
    auto operator<=>(const Date&) const = default;
};

inline bool is_leap_year(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int days_in_month(int y, int m) {
    static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap_year(y)) return 29;
    return kDays[m - 1];
}

// Strict ISO 8601 calendar date, YYYY-MM-DD.
inline Date parse_date(std::string_view s) {
    auto fail = [&] { throw ParseError("bad date '" + std::string(s) + "' (expect YYYY-MM-DD)"); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') fail();
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (s[i] < '0' || s[i] > '9') fail();
    }
    Date d;
    d.year = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
    d.month = (s[5] - '0') * 10 + (s[6] - '0');
    d.day = (s[8] - '0') * 10 + (s[9] - '0');
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
        fail();
    }
    return d;
}

inline std::string to_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

struct DateWindow {
    Date start;
    Date end;

    void validate() const {
        if (end < start) {
            throw DataError("window start " + patclass::to_string(start) + " is after end " +
                            patclass::to_string(end));
        }
    }
    bool contains(const Date& d) const { return start <= d && d <= end; }
};

// ---------------------------------------------------------------------------
// Records and CPC symbols
// ---------------------------------------------------------------------------

struct Claim {
    int sequence = 0;
    std::string text;
};

struct PatentRecord {
    std::string id;
    Date date;
    std::string type;
    std::vector<Claim> claims;
    std::vector<std::string> cpc_symbols;
};

struct LabeledExample {
    std::string id;
    Date date;
    std::vector<std::string> labels;  // sorted, distinct subclass codes
    std::string text;                 // first-claim text
};

enum class LabelScheme { cpc, ipc };

inline LabelScheme label_scheme_from_string(const std::string& s) {
    if (s == "cpc") return LabelScheme::cpc;
    if (s == "ipc") return LabelScheme::ipc;
    throw ConfigError("unknown label scheme: " + s);
}

inline std::string to_string(LabelScheme s) {
    return s == LabelScheme::cpc ? "cpc" : "ipc";
}

// A valid subclass prefix is one section letter, two digits, one uppercase
// letter, e.g. "G06F". The Y section exists only in CPC.
inline bool has_subclass_prefix(std::string_view symbol, LabelScheme scheme = LabelScheme::cpc) {
    if (symbol.size() < 4) return false;
    const char section = symbol[0];
    const bool section_ok =
        (section >= 'A' && section <= 'H') || (scheme == LabelScheme::cpc && section == 'Y');
    return section_ok && symbol[1] >= '0' && symbol[1] <= '9' && symbol[2] >= '0' &&
           symbol[2] <= '9' && symbol[3] >= 'A' && symbol[3] <= 'Z';
}

// "G06F16/951" -> "G06F"; group/subgroup detail past the subclass is dropped.
inline std::string subclass_of(std::string_view symbol, LabelScheme scheme = LabelScheme::cpc) {
    if (!has_subclass_prefix(symbol, scheme)) {
        throw SymbolError("no valid subclass prefix in '" + std::string(symbol) + "'");
    }
    return std::string(symbol.substr(0, 4));
}

// ---------------------------------------------------------------------------
// Filtering — the SQL predicates, applied to one record
// ---------------------------------------------------------------------------

enum class DropReason { kept, wrong_type, out_of_window, no_first_claim, no_valid_cpc };

inline const char* to_string(DropReason r) {
    switch (r) {
        case DropReason::kept: return "kept";
        case DropReason::wrong_type: return "wrong_type";
        case DropReason::out_of_window: return "out_of_window";
        case DropReason::no_first_claim: return "no_first_claim";
        case DropReason::no_valid_cpc: return "no_valid_cpc";
    }
    return "unknown";
}

namespace detail {

inline bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; });
}

}  // namespace detail

// Applies, in order: type match, date window, presence of a sequence-1 claim
// with non-blank text, and at least one symbol with a valid subclass prefix.
// Labels are the sorted distinct subclasses; text is the first claim only.
inline std::pair<std::optional<LabeledExample>, DropReason> filter_with_reason(
    const PatentRecord& record, const DateWindow& window, const std::string& patent_type,
    LabelScheme scheme = LabelScheme::cpc) {
    window.validate();
    if (record.type != patent_type) return {std::nullopt, DropReason::wrong_type};
    if (!window.contains(record.date)) return {std::nullopt, DropReason::out_of_window};

    const Claim* first = nullptr;
    for (const Claim& c : record.claims) {
        if (c.sequence == 1) {
            first = &c;
            break;
        }
    }
    if (first == nullptr || detail::is_blank(first->text)) {
        return {std::nullopt, DropReason::no_first_claim};
    }

    std::set<std::string> labels;
    for (const std::string& symbol : record.cpc_symbols) {
        if (has_subclass_prefix(symbol, scheme)) {
            labels.insert(subclass_of(symbol, scheme));
        }
    }
    if (labels.empty()) return {std::nullopt, DropReason::no_valid_cpc};

    LabeledExample ex;
    ex.id = record.id;
    ex.date = record.date;
    ex.labels.assign(labels.begin(), labels.end());
    ex.text = first->text;
    return {std::move(ex), DropReason::kept};
}

inline std::optional<LabeledExample> filter_and_label(const PatentRecord& record,
                                                      const DateWindow& window,
                                                      const std::string& patent_type,
                                                      LabelScheme scheme = LabelScheme::cpc) {
    return filter_with_reason(record, window, patent_type, scheme).first;
}

struct IngestSummary {
    std::size_t kept = 0;
    std::size_t wrong_type = 0;
    std::size_t out_of_window = 0;
    std::size_t no_first_claim = 0;
    std::size_t no_valid_cpc = 0;

    std::size_t total() const {
        return kept + wrong_type + out_of_window + no_first_claim + no_valid_cpc;
    }
    void count(DropReason r) {
        switch (r) {
            case DropReason::kept: ++kept; break;
            case DropReason::wrong_type: ++wrong_type; break;
            case DropReason::out_of_window: ++out_of_window; break;
            case DropReason::no_first_claim: ++no_first_claim; break;
            case DropReason::no_valid_cpc: ++no_valid_cpc; break;
        }
    }
};

inline void to_json(nlohmann::json& j, const IngestSummary& s) {
    j = nlohmann::json{{"kept", s.kept},
                       {"dropped",
                        {{"wrong_type", s.wrong_type},
                         {"out_of_window", s.out_of_window},
                         {"no_first_claim", s.no_first_claim},
                         {"no_valid_cpc", s.no_valid_cpc}}},
                       {"total", s.total()}};
}

// Filters a whole dump. Output is sorted by patent id so shard order and any
// upstream parallelism never change the artifact.
inline std::pair<std::vector<LabeledExample>, IngestSummary> run_ingest(
    const std::vector<PatentRecord>& records, const DateWindow& window,
    const std::string& patent_type, LabelScheme scheme = LabelScheme::cpc) {
    window.validate();
    std::vector<LabeledExample> kept;
    IngestSummary summary;
    for (const PatentRecord& rec : records) {
        auto [ex, reason] = filter_with_reason(rec, window, patent_type, scheme);
        summary.count(reason);
        if (ex) kept.push_back(std::move(*ex));
    }
    std::sort(kept.begin(), kept.end(),
              [](const LabeledExample& a, const LabeledExample& b) { return a.id < b.id; });
    return {std::move(kept), summary};
}

// ---------------------------------------------------------------------------
// Label vocabulary
// ---------------------------------------------------------------------------

class LabelVocabulary {
public:
    LabelVocabulary() = default;

    explicit LabelVocabulary(std::vector<std::string> sorted_labels)
        : labels_(std::move(sorted_labels)) {
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (i > 0 && !(labels_[i - 1] < labels_[i])) {
                throw DataError("label vocabulary must be strictly ascending");
            }
            index_[labels_[i]] = static_cast<int>(i);
        }
    }

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& at(std::size_t i) const { return labels_.at(i); }

    int index_of(const std::string& label) const {
        auto it = index_.find(label);
        return it == index_.end() ? -1 : it->second;
    }
    bool contains(const std::string& label) const { return index_.count(label) != 0; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, int> index_;
};

inline LabelVocabulary build_label_vocab(const std::vector<LabeledExample>& examples) {
    if (examples.empty()) throw DataError("cannot build a label vocabulary from no examples");
    std::set<std::string> all;
    for (const LabeledExample& ex : examples) all.insert(ex.labels.begin(), ex.labels.end());
    return LabelVocabulary(std::vector<std::string>(all.begin(), all.end()));
}

// Multi-hot encoding. Strict mode rejects labels outside the vocabulary;
// lenient mode drops them and reports the count through dropped_out.
inline std::vector<std::uint8_t> encode_labels(const std::vector<std::string>& labels,
                                               const LabelVocabulary& vocab, bool lenient = false,
                                               std::size_t* dropped_out = nullptr) {
    if (labels.empty()) throw GoldError("an example must carry at least one label");
    std::vector<std::uint8_t> hot(vocab.size(), 0);
    std::size_t dropped = 0;
    for (const std::string& label : labels) {
        const int idx = vocab.index_of(label);
        if (idx < 0) {
            if (!lenient) throw UnknownLabel("label '" + label + "' is not in the vocabulary");
            ++dropped;
            continue;
        }
        hot[static_cast<std::size_t>(idx)] = 1;
    }
    if (dropped_out) *dropped_out = dropped;
    return hot;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const LabeledExample& ex) {
    j = nlohmann::json{
        {"id", ex.id}, {"date", to_string(ex.date)}, {"labels", ex.labels}, {"text", ex.text}};
}

namespace detail {

[[noreturn]] inline void parse_fail(std::size_t line_no, const std::string& what) {
    throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

inline void check_new_id(std::unordered_set<std::string>& seen, const std::string& id,
                         std::size_t line_no) {
    if (id.empty()) parse_fail(line_no, "empty id");
    if (!seen.insert(id).second) {
        throw DuplicateId("id '" + id + "' appears more than once (line " +
                          std::to_string(line_no) + ")");
    }
}

// Normalizes a label column entry to subclass level, keeping output sorted
// and distinct. Throws SymbolError via subclass_of on malformed symbols.
inline std::vector<std::string> normalize_labels(const std::vector<std::string>& symbols,
                                                 LabelScheme scheme) {
    std::set<std::string> out;
    for (const std::string& s : symbols) out.insert(subclass_of(s, scheme));
    return {out.begin(), out.end()};
}

}  // namespace detail

// Raw patent dumps: one JSON object per line with fields id, date, type,
// claims [{sequence, text}], cpc [symbols]. sequence may be a number or a
// numeric string (the SQL compares it against the string '1').
inline std::vector<PatentRecord> load_patents_jsonl(std::istream& in) {
    std::vector<PatentRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            detail::parse_fail(line_no, e.what());
        }
        PatentRecord rec;
        try {
            rec.id = obj.at("id").get<std::string>();
            rec.date = parse_date(obj.at("date").get<std::string>());
            rec.type = obj.at("type").get<std::string>();
            for (const auto& c : obj.value("claims", nlohmann::json::array())) {
                Claim claim;
                const auto& seq = c.at("sequence");
                if (seq.is_string()) {
                    claim.sequence = std::stoi(seq.get<std::string>());
                } else {
                    claim.sequence = seq.get<int>();
                }
                claim.text = c.at("text").get<std::string>();
                rec.claims.push_back(std::move(claim));
            }
            rec.cpc_symbols =
                obj.value("cpc", nlohmann::json::array()).get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            detail::parse_fail(line_no, e.what());
        } catch (const ParseError& e) {
            detail::parse_fail(line_no, error_body(e));
        } catch (const std::logic_error&) {  // std::stoi on a non-numeric sequence
            detail::parse_fail(line_no, "claim sequence is not a number");
        }
        std::set<int> seqs;
        for (const Claim& c : rec.claims) {
            if (!seqs.insert(c.sequence).second) {
                detail::parse_fail(line_no, "duplicate claim sequence " +
                                                std::to_string(c.sequence));
            }
        }
        detail::check_new_id(seen, rec.id, line_no);
        records.push_back(std::move(rec));
    }
    return records;
}

// Labeled examples as JSON lines {id, date, labels, text}.
inline std::vector<LabeledExample> load_labeled_jsonl(std::istream& in,
                                                      LabelScheme scheme = LabelScheme::cpc) {
    std::vector<LabeledExample> examples;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            detail::parse_fail(line_no, e.what());
        }
        LabeledExample ex;
        try {
            ex.id = obj.at("id").get<std::string>();
            ex.date = parse_date(obj.at("date").get<std::string>());
            ex.labels = detail::normalize_labels(obj.at("labels").get<std::vector<std::string>>(),
                                                 scheme);
            ex.text = obj.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            detail::parse_fail(line_no, e.what());
        } catch (const Error& e) {
            detail::parse_fail(line_no, error_body(e));
        }
        if (ex.labels.empty()) detail::parse_fail(line_no, "empty label list");
        if (detail::is_blank(ex.text)) detail::parse_fail(line_no, "empty text");
        detail::check_new_id(seen, ex.id, line_no);
        examples.push_back(std::move(ex));
    }
    return examples;
}

// Tab-separated rows mirroring the aggregation output column order:
// cpc_ids (comma-separated), id, date, text. Only the first three tabs
// delimit; the text column may itself contain tabs.
inline std::vector<LabeledExample> load_labeled_tsv(std::istream& in,
                                                    LabelScheme scheme = LabelScheme::cpc) {
    std::vector<LabeledExample> examples;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        const auto t3 = t2 == std::string::npos ? t2 : line.find('\t', t2 + 1);
        if (t3 == std::string::npos) detail::parse_fail(line_no, "expected 4 tab-separated columns");

        const std::string cpc_ids = line.substr(0, t1);
        LabeledExample ex;
        ex.id = line.substr(t1 + 1, t2 - t1 - 1);
        ex.text = line.substr(t3 + 1);

        std::vector<std::string> symbols;
        std::size_t start = 0;
        while (start <= cpc_ids.size()) {
            const auto comma = cpc_ids.find(',', start);
            const auto end = comma == std::string::npos ? cpc_ids.size() : comma;
            if (end > start) symbols.emplace_back(cpc_ids, start, end - start);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (symbols.empty()) detail::parse_fail(line_no, "empty cpc_ids column");

        try {
            ex.date = parse_date(std::string_view(line).substr(t2 + 1, t3 - t2 - 1));
            ex.labels = detail::normalize_labels(symbols, scheme);
        } catch (const Error& e) {
            detail::parse_fail(line_no, error_body(e));
        }
        if (detail::is_blank(ex.text)) detail::parse_fail(line_no, "empty text");
        detail::check_new_id(seen, ex.id, line_no);
        examples.push_back(std::move(ex));
    }
    return examples;
}

enum class DatasetFormat { jsonl, tsv };

inline DatasetFormat dataset_format_from_string(const std::string& s) {
    if (s == "jsonl") return DatasetFormat::jsonl;
    if (s == "tsv") return DatasetFormat::tsv;
    throw ConfigError("unknown dataset format: " + s);
}

inline std::vector<LabeledExample> load_dataset(const std::string& path, DatasetFormat format,
                                                LabelScheme scheme = LabelScheme::cpc) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    return format == DatasetFormat::jsonl ? load_labeled_jsonl(in, scheme)
                                          : load_labeled_tsv(in, scheme);
}

// Writes examples as JSON lines, sorted by id (UTF-8, LF).
inline void write_labeled_jsonl(std::ostream& out, std::vector<LabeledExample> examples) {
    std::sort(examples.begin(), examples.end(),
              [](const LabeledExample& a, const LabeledExample& b) { return a.id < b.id; });
    for (const LabeledExample& ex : examples) {
        out << nlohmann::json(ex).dump() << '\n';
    }
}

// One subclass per line, sorted ascending.
inline void write_label_vocab(std::ostream& out, const LabelVocabulary& vocab) {
    for (const std::string& label : vocab.labels()) out << label << '\n';
}

inline LabelVocabulary load_label_vocab(std::istream& in) {
    std::vector<std::string> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            labels.push_back(subclass_of(line));
        } catch (const SymbolError& e) {
            detail::parse_fail(line_no, error_body(e));
        }
        if (labels.back() != line) detail::parse_fail(line_no, "label is not subclass-level");
    }
    if (labels.empty()) throw DataError("label vocabulary file is empty");
    try {
        return LabelVocabulary(std::move(labels));
    } catch (const DataError& e) {
        throw ParseError(error_body(e));
    }
}

inline LabelVocabulary load_label_vocab_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open label vocabulary: " + path);
    return load_label_vocab(in);
}

}  // namespace patclass
