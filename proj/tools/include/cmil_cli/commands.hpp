#pragma once

#include <ostream>
#include <string>

#include "cmil_cli/run_config.hpp"

namespace cmil::cli {

/// Writes <out>/{train,validation,test}.{json,csv} and <out>/config.txt.
void cmd_gen_data(const RunConfig& cfg, std::ostream& log);

/// Writes <out>/policy.cmil and appends stage curves to <out>/train.log.
void cmd_train(const RunConfig& cfg, std::ostream& log);

/// Writes <out>/report.txt (table) and <out>/report.tsv.
void cmd_eval(const RunConfig& cfg, std::ostream& log);

/// Writes <out>/rollout.{json,csv} in the dataset format.
void cmd_rollout(const RunConfig& cfg, std::ostream& log);

/// Writes <out>/copula_<a>_<b>.txt for every requested pair.
void cmd_export_copula(const RunConfig& cfg, std::ostream& log);

/// Creates `dir` and its parents; throws IoError when that is impossible.
void ensure_directory(const std::string& dir);

}  // namespace cmil::cli
