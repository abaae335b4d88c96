#pragma once

#include <stdexcept>
#include <string>

namespace termalign {

// Base class for every error raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- parsing -------------------------------------------------------------

// A [Term] stanza without an id, a synonym line with unbalanced quotes, or
// a non-obsolete term without a label. Carries the offending line number.
struct MalformedStanza : Error {
    MalformedStanza(const std::string& what, std::size_t line_no)
        : Error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
    std::size_t line;
};

struct HeaderMismatch : Error {
    using Error::Error;
};

struct NamespaceViolation : Error {
    using Error::Error;
};

struct DuplicateTermId : Error {
    using Error::Error;
};

// --- corpus / embedding / retrieval --------------------------------------

struct EmptyCorpus : Error {
    using Error::Error;
};

struct ProviderError : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct ZeroVector : Error {
    using Error::Error;
};

struct LengthMismatch : Error {
    using Error::Error;
};

// --- candidate generation -------------------------------------------------

struct NoQueryText : Error {
    using Error::Error;
};

// --- adjudication ----------------------------------------------------------

struct EmptyField : Error {
    using Error::Error;
};

struct UnparseableVerdict : Error {
    using Error::Error;
};

struct CacheCorruption : Error {
    using Error::Error;
};

// --- evaluation -------------------------------------------------------------

struct DuplicatePairKey : Error {
    using Error::Error;
};

struct EmptyMatrix : Error {
    using Error::Error;
};

struct NoDecidedPairs : Error {
    using Error::Error;
};

// --- configuration / pipeline ------------------------------------------------

struct ConfigInvalid : Error {
    using Error::Error;
};

struct MissingInput : Error {
    using Error::Error;
};

}  // namespace termalign
