#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sketchd {

/** Base class of every error raised by the library. */
struct error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

#define SKETCHD_DECLARE_ERROR(NAME) \
    struct NAME : error { using error::error; }

SKETCHD_DECLARE_ERROR(unknown_relation);
SKETCHD_DECLARE_ERROR(unknown_attribute);
SKETCHD_DECLARE_ERROR(type_mismatch);
SKETCHD_DECLARE_ERROR(kind_mismatch);
SKETCHD_DECLARE_ERROR(schema_mismatch);
SKETCHD_DECLARE_ERROR(ill_formed_delta);
SKETCHD_DECLARE_ERROR(inconsistent_delta);
SKETCHD_DECLARE_ERROR(out_of_domain);
SKETCHD_DECLARE_ERROR(overflow_error);
SKETCHD_DECLARE_ERROR(unknown_version);
SKETCHD_DECLARE_ERROR(duplicate_name);
SKETCHD_DECLARE_ERROR(already_committed);
SKETCHD_DECLARE_ERROR(corrupt_snapshot);
SKETCHD_DECLARE_ERROR(empty_sketch);
SKETCHD_DECLARE_ERROR(mismatched_workloads);
SKETCHD_DECLARE_ERROR(invalid_plan);

#undef SKETCHD_DECLARE_ERROR

/** Raised when a capacity-bounded operator state can no longer answer exactly.  The caller has to rebuild the state
 * from the full database. */
struct recapture_required : error
{
    using error::error;
};

/** A malformed input file; carries the 1-based line number of the offending record. */
struct parse_error : error
{
    std::size_t line;

    parse_error(std::size_t line, const std::string &what)
        : error("line " + std::to_string(line) + ": " + what)
        , line(line)
    { }
};

}
