#pragma once

#include <stdexcept>
#include <string>

namespace ss {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// bad user-supplied configuration (bad rates, dims, missing paths)
struct ConfigError : Error { using Error::Error; };
// tensor shape mismatch
struct DimError : Error { using Error::Error; };
// malformed runtime input (empty sentence, too-short char sequence)
struct InputError : Error { using Error::Error; };
// label id outside the alphabet
struct LabelError : Error { using Error::Error; };
// unparseable input file
struct ParseError : Error { using Error::Error; };
// corrupt serialized artifact (mask file, checkpoint)
struct FormatError : Error { using Error::Error; };
// mask applied against the wrong ParamSpace, mismatched lengths
struct StructuralError : Error { using Error::Error; };
// pred/gold sequence lengths disagree
struct AlignmentError : Error { using Error::Error; };
// NaN/Inf escaped an operation
struct NumericError : Error { using Error::Error; };
// non-finite training loss
struct DivergenceError : Error { using Error::Error; };
// pruning can no longer remove at least one weight
struct ProgressStallError : Error { using Error::Error; };
// subnet selection over an empty candidate list
struct SelectionError : Error { using Error::Error; };
// ledger directory missing or inconsistent artifacts
struct IntegrityError : Error { using Error::Error; };

}  // namespace ss
