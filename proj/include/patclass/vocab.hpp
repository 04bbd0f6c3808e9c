#pragma once

#include <istream>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "patclass/errors.hpp"

namespace patclass {

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";

// WordPiece vocabulary. Ids are dense 0..N-1 in file order; immutable after load.
class Vocabulary {
public:
    Vocabulary(std::vector<std::string> entries_in)
        : entries(std::move(entries_in)) {
        index.reserve(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            auto [it, inserted] = index.emplace(entries[i], static_cast<int>(i));
            (void)it;
            if (!inserted) throw DuplicateToken("'" + entries[i] + "'");
        }
        pad_id = require_special(kPadToken);
        unk_id = require_special(kUnkToken);
        cls_id = require_special(kClsToken);
        sep_id = require_special(kSepToken);
    }

    int size() const { return static_cast<int>(entries.size()); }

    bool contains(const std::string& token) const { return index.count(token) != 0; }

    // -1 when absent.
    int id_of(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? -1 : it->second;
    }

    const std::string& token_of(int id) const { return entries[static_cast<std::size_t>(id)]; }

    std::vector<std::string> entries;
    std::unordered_map<std::string, int> index;
    int pad_id = -1;
    int unk_id = -1;
    int cls_id = -1;
    int sep_id = -1;

private:
    int require_special(const char* token) const {
        auto it = index.find(token);
        if (it == index.end()) throw MissingSpecial(std::string("'") + token + "' not in vocabulary");
        return it->second;
    }
};

// One token per line, id = zero-based line number. LF terminators; a lone
// trailing newline does not produce an empty token.
inline Vocabulary load_vocab(std::istream& in) {
    std::vector<std::string> entries;
    std::string line;
    bool pending_empty = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (pending_empty) {
            entries.emplace_back();  // interior empty line is a literal empty token
            pending_empty = false;
        }
        if (line.empty()) {
            pending_empty = true;
        } else {
            entries.push_back(line);
        }
    }
    return Vocabulary(std::move(entries));
}

inline Vocabulary load_vocab_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    return load_vocab(in);
}

}  // namespace patclass
