#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "patclass/errors.hpp"

namespace patclass {

struct PredictionRecord {
    std::string doc_id;
    std::vector<double> scores;  // one per label, probability or logit
    std::vector<int> gold;       // label indices, at least one
};

struct KMetrics {
    double precision_macro = 0.0;
    double recall_macro = 0.0;
    double f1_macro = 0.0;
    double precision_micro = 0.0;
    double recall_micro = 0.0;
    double f1_micro = 0.0;
};

struct EvalReport {
    std::size_t n_docs = 0;
    std::map<int, KMetrics> per_k;
};

inline double f1_from_pr(double p, double r) {
    if (!(p >= 0.0 && p <= 1.0) || !(r >= 0.0 && r <= 1.0)) {
        throw RangeError("precision and recall must lie in [0,1]");
    }
    const double s = p + r;
    if (s == 0.0) return 0.0;
    return 2.0 * p * r / s;
}

// Indices of the k largest scores, descending; equal scores order by lower
// label index.
inline std::vector<int> top_k(const std::vector<double>& scores, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > scores.size()) {
        throw RangeError("k must lie in [1, n_labels]");
    }
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

// Additive sufficient statistics for one k — shards can be accumulated
// independently and merged.
struct KStats {
    std::uint64_t hits = 0;               // sum over docs of |top_k ∩ gold|
    double recall_frac = 0.0;             // sum over docs of hits/|gold|
};

struct EvalAccumulator {
    std::vector<int> ks;
    std::map<int, KStats> stats;
    std::uint64_t n_docs = 0;
    std::uint64_t total_gold = 0;

    explicit EvalAccumulator(std::vector<int> requested) : ks(std::move(requested)) {
        if (ks.empty()) throw RangeError("at least one k is required");
        for (int k : ks) stats[k];
    }

    void add(const PredictionRecord& rec) {
        if (rec.gold.empty()) throw GoldError("document " + rec.doc_id + " has no gold labels");
        for (int g : rec.gold) {
            if (g < 0 || static_cast<std::size_t>(g) >= rec.scores.size()) {
                throw GoldError("document " + rec.doc_id + " has a gold index outside the label space");
            }
        }
        std::vector<int> gold_sorted = rec.gold;
        std::sort(gold_sorted.begin(), gold_sorted.end());
        gold_sorted.erase(std::unique(gold_sorted.begin(), gold_sorted.end()), gold_sorted.end());

        for (int k : ks) {
            const std::vector<int> picked = top_k(rec.scores, k);
            std::uint64_t hits = 0;
            for (int idx : picked) {
                if (std::binary_search(gold_sorted.begin(), gold_sorted.end(), idx)) ++hits;
            }
            KStats& s = stats[k];
            s.hits += hits;
            s.recall_frac += static_cast<double>(hits) / static_cast<double>(gold_sorted.size());
        }
        n_docs += 1;
        total_gold += gold_sorted.size();
    }

    void merge(const EvalAccumulator& other) {
        if (other.ks != ks) throw RangeError("accumulators were built for different k sets");
        for (int k : ks) {
            stats[k].hits += other.stats.at(k).hits;
            stats[k].recall_frac += other.stats.at(k).recall_frac;
        }
        n_docs += other.n_docs;
        total_gold += other.total_gold;
    }

    EvalReport report() const {
        if (n_docs == 0) throw DataError("no documents were evaluated");
        EvalReport rep;
        rep.n_docs = n_docs;
        for (int k : ks) {
            const KStats& s = stats.at(k);
            KMetrics m;
            // Both precision averages reduce to Σhits/(N·k); computing them
            // through the same expression keeps the equality exact.
            m.precision_micro = static_cast<double>(s.hits) /
                                (static_cast<double>(n_docs) * static_cast<double>(k));
            m.precision_macro = m.precision_micro;
            m.recall_macro = s.recall_frac / static_cast<double>(n_docs);
            m.recall_micro = static_cast<double>(s.hits) / static_cast<double>(total_gold);
            m.f1_macro = f1_from_pr(m.precision_macro, m.recall_macro);
            m.f1_micro = f1_from_pr(m.precision_micro, m.recall_micro);
            rep.per_k[k] = m;
        }
        return rep;
    }
};

inline EvalReport evaluate(const std::vector<PredictionRecord>& records,
                           const std::vector<int>& ks) {
    if (records.empty()) throw DataError("no prediction records to evaluate");
    const std::size_t width = records.front().scores.size();
    for (const PredictionRecord& rec : records) {
        if (rec.scores.size() != width) {
            throw DataError("document " + rec.doc_id + " has a different score length");
        }
        for (double s : rec.scores) {
            if (!std::isfinite(s)) {
                throw DataError("document " + rec.doc_id + " has a non-finite score");
            }
        }
    }
    EvalAccumulator acc(ks);
    for (const PredictionRecord& rec : records) acc.add(rec);
    return acc.report();
}

inline void to_json(nlohmann::json& j, const KMetrics& m) {
    j = nlohmann::json{{"precision_macro", m.precision_macro}, {"recall_macro", m.recall_macro},
                       {"f1_macro", m.f1_macro},               {"precision_micro", m.precision_micro},
                       {"recall_micro", m.recall_micro},       {"f1_micro", m.f1_micro}};
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
    nlohmann::json per_k = nlohmann::json::object();
    for (const auto& [k, m] : r.per_k) per_k[std::to_string(k)] = m;
    j = nlohmann::json{{"n_docs", r.n_docs}, {"per_k", per_k}};
}

// Plain-text table, one row per k and averaging mode, percentages with two
// decimals in F1 / Precision / Recall column order.
inline std::string render_report_table(const EvalReport& r) {
    std::string out;
    char line[128];
    std::snprintf(line, sizeof(line), "%-8s %-6s %8s %14s %11s\n", "average", "top-k", "F1 (%)",
                  "Precision (%)", "Recall (%)");
    out += line;
    for (const auto& [k, m] : r.per_k) {
        std::snprintf(line, sizeof(line), "%-8s %-6d %8.2f %14.2f %11.2f\n", "macro", k,
                      100.0 * m.f1_macro, 100.0 * m.precision_macro, 100.0 * m.recall_macro);
        out += line;
    }
    for (const auto& [k, m] : r.per_k) {
        std::snprintf(line, sizeof(line), "%-8s %-6d %8.2f %14.2f %11.2f\n", "micro", k,
                      100.0 * m.f1_micro, 100.0 * m.precision_micro, 100.0 * m.recall_micro);
        out += line;
    }
    return out;
}

// JSON-lines predictions: {"doc_id", "gold", and either "scores" (full score
// vector) or "ranked_labels" (descending label indices)}. Ranked lists are
// turned into synthetic descending scores over the full label space.
inline std::vector<PredictionRecord> load_predictions(std::istream& in) {
    struct RawLine {
        std::size_t line_no;
        nlohmann::json obj;
    };
    std::vector<RawLine> raw;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.contains("doc_id") || !obj.contains("gold") ||
            (!obj.contains("scores") && !obj.contains("ranked_labels"))) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": need doc_id, gold, and scores or ranked_labels");
        }
        raw.push_back({line_no, std::move(obj)});
    }

    // Label-space width: score vectors fix it exactly; ranked/gold indices
    // only bound it from below.
    std::size_t width = 0;
    for (const RawLine& r : raw) {
        if (r.obj.contains("scores")) {
            width = std::max(width, r.obj.at("scores").size());
        } else {
            for (const auto& v : r.obj.at("ranked_labels")) {
                width = std::max(width, static_cast<std::size_t>(v.get<int>()) + 1);
            }
        }
        for (const auto& v : r.obj.at("gold")) {
            width = std::max(width, static_cast<std::size_t>(v.get<int>()) + 1);
        }
    }

    std::vector<PredictionRecord> records;
    records.reserve(raw.size());
    for (const RawLine& r : raw) {
        PredictionRecord rec;
        try {
            rec.doc_id = r.obj.at("doc_id").get<std::string>();
            rec.gold = r.obj.at("gold").get<std::vector<int>>();
            if (r.obj.contains("scores")) {
                rec.scores = r.obj.at("scores").get<std::vector<double>>();
                if (rec.scores.size() != width) {
                    throw ParseError("line " + std::to_string(r.line_no) +
                                     ": score vector length disagrees with the rest of the file");
                }
            } else {
                const auto ranked = r.obj.at("ranked_labels").get<std::vector<int>>();
                rec.scores.assign(width, 0.0);
                for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
                    const int idx = ranked[pos];
                    if (idx < 0 || static_cast<std::size_t>(idx) >= width) {
                        throw ParseError("line " + std::to_string(r.line_no) +
                                         ": ranked label index out of range");
                    }
                    rec.scores[static_cast<std::size_t>(idx)] =
                        static_cast<double>(width - pos);
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(r.line_no) + ": " + e.what());
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace patclass
