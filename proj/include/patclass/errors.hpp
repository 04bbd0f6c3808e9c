#pragma once

#include <stdexcept>
#include <string>

namespace patclass {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define PATCLASS_DEFINE_ERROR(NAME)                                     \
    class NAME : public Error {                                         \
    public:                                                             \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
    }

// tokenizer
PATCLASS_DEFINE_ERROR(DuplicateToken);
PATCLASS_DEFINE_ERROR(MissingSpecial);
PATCLASS_DEFINE_ERROR(ConfigError);

// encoder
PATCLASS_DEFINE_ERROR(VocabRangeError);
PATCLASS_DEFINE_ERROR(ShapeError);
PATCLASS_DEFINE_ERROR(CacheError);
PATCLASS_DEFINE_ERROR(FormatError);
PATCLASS_DEFINE_ERROR(CorruptError);

// training
PATCLASS_DEFINE_ERROR(TargetError);
PATCLASS_DEFINE_ERROR(NumericsError);
PATCLASS_DEFINE_ERROR(DataError);

// metrics
PATCLASS_DEFINE_ERROR(RangeError);
PATCLASS_DEFINE_ERROR(GoldError);

// ingest
PATCLASS_DEFINE_ERROR(SymbolError);
PATCLASS_DEFINE_ERROR(ParseError);
PATCLASS_DEFINE_ERROR(DuplicateId);
PATCLASS_DEFINE_ERROR(UnknownLabel);

#undef PATCLASS_DEFINE_ERROR

// Message text without the "ClassName: " prefix, for re-wrapping an error
// with extra context (line numbers, step indices) without stacking prefixes.
inline std::string error_body(const std::exception& e) {
    const std::string s = e.what();
    const auto colon = s.find(": ");
    if (colon != std::string::npos && s.find(' ') > colon) {
        return s.substr(colon + 2);
    }
    return s;
}

}  // namespace patclass
