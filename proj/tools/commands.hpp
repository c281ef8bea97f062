#pragma once

#include <iosfwd>
#include <string>

#include "config.hpp"
#include "curvcone/io.hpp"
#include "curvcone/submersion.hpp"

namespace curvcone::cli {

inline constexpr const char* kVersion = "0.1.0";

// identity:n=, zero:n=, model:d=,r=,n=, sphere:n=, random:n=,seed=, file:<path to JSON>.
CurvatureOperator parse_operator(const std::string& text);
// hopf, or product:fdim=,fkappa=,bdim=,bkappa=.
SubmersionData parse_submersion(const std::string& text);

// Builds the report: config echo, rows (each with a boolean "pass"), summary and provenance.
// Invalid input raises InputError.
json run(const RunConfig& cfg);

bool report_pass(const json& report);
std::string rows_csv(const json& rows);

// run() plus output and error mapping: 0 pass, 1 verification failed, 2 invalid input or I/O.
int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace curvcone::cli
