// Shared fixtures for the test suites: a small WordPiece vocabulary, a
// synthetic 32-claim/8-label corpus every training test can memorize, and
// process helpers for driving the CLI binary.
#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "patclass/config.hpp"
#include "patclass/ingest.hpp"
#include "patclass/optimizer.hpp"
#include "patclass/vocab.hpp"

namespace fixtures {

inline const std::array<std::string, 8>& topic_words() {
    static const std::array<std::string, 8> words = {"ploughing",  "gearboxes",  "pyridine",
                                                     "papermaking", "bricks",     "couplings",
                                                     "processors", "routers"};
    return words;
}

inline const std::array<std::string, 8>& topic_labels() {
    static const std::array<std::string, 8> labels = {"A01B", "B60K", "C07D", "D21H",
                                                      "E04B", "F16H", "G06F", "H04L"};
    return labels;
}

// Specials first, then every word the synthetic corpus can emit.
inline std::vector<std::string> overfit_vocab_entries() {
    std::vector<std::string> entries = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
                                        ".",     "a",     "an",    "the",   "method",
                                        "for",   "improved", "apparatus", "device",
                                        "with",  "system",   "of",        "assembly",
                                        "arrangement"};
    for (const std::string& w : topic_words()) entries.push_back(w);
    return entries;
}

// 32 single-label claims, 4 texts per label, ids in sorted order.
inline std::vector<patclass::LabeledExample> overfit_corpus() {
    std::vector<patclass::LabeledExample> out;
    for (int i = 0; i < 32; ++i) {
        const std::size_t label = static_cast<std::size_t>(i % 8);
        const int variant = i / 8;
        const std::string& topic = topic_words()[label];
        std::string text;
        switch (variant) {
            case 0: text = "A method for " + topic + "."; break;
            case 1: text = "An improved apparatus for " + topic + "."; break;
            case 2: text = "The system of " + topic + " with assembly."; break;
            default: text = "A device with " + topic + " arrangement."; break;
        }
        patclass::LabeledExample ex;
        char id[8];
        std::snprintf(id, sizeof(id), "d%02d", i);
        ex.id = id;
        ex.date = patclass::parse_date("2013-06-01");
        ex.labels = {topic_labels()[label]};
        ex.text = text;
        out.push_back(std::move(ex));
    }
    return out;
}

inline patclass::ModelConfig overfit_model_config(int vocab_size) {
    patclass::ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.hidden = 64;
    cfg.n_heads = 2;
    cfg.ffn_dim = 256;
    cfg.max_positions = 32;
    cfg.vocab_size = vocab_size;
    cfg.n_labels = 8;
    cfg.dropout = 0.0;  // memorization check, not a regularization check
    return cfg;
}

// 150 epochs x ceil(32/16) = 300 steps.
inline patclass::TrainConfig overfit_train_config() {
    patclass::TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.epochs = 150;
    cfg.base_lr = 1e-3;
    cfg.warmup_fraction = 0.1;
    cfg.seed = 7;
    return cfg;
}

inline std::string make_temp_dir() {
    std::string tmpl = "/tmp/patclass_test_XXXXXX";
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    return tmpl;
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    out << contents;
    if (!out) throw std::runtime_error("cannot write " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_vocab_file(const std::string& path) {
    std::string contents;
    for (const std::string& t : overfit_vocab_entries()) contents += t + "\n";
    write_file(path, contents);
}

inline void write_corpus_file(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    patclass::write_labeled_jsonl(out, overfit_corpus());
    if (!out) throw std::runtime_error("cannot write " + path);
}

inline void write_labels_file(const std::string& path) {
    std::string contents;
    for (const std::string& l : topic_labels()) contents += l + "\n";
    write_file(path, contents);
}

#ifdef PATCLASS_CLI_PATH
struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

// Runs the CLI with the given argument string; output is captured via popen.
inline CliResult run_cli(const std::string& args) {
    const std::string command = std::string(PATCLASS_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = ::popen(command.c_str(), "r");
    if (pipe == nullptr) throw std::runtime_error("popen failed");
    CliResult result;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, n);
    const int status = ::pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}
#endif

}  // namespace fixtures
