#pragma once

#include <string>
#include <vector>

#include "vcurl/cognitive.hpp"
#include "vcurl/error.hpp"
#include "vcurl/ingest.hpp"
#include "vcurl/simharness.hpp"
#include "vcurl/visual.hpp"

namespace vcurl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

/// Parses and dispatches one command line (args[0] is the program name).
/// Never throws; failures are reported as one line on stderr:
///   error code=<Code> detail="<json-escaped text>"
int run(const std::vector<std::string>& args);

/// Line-delimited score files written by score-visual / score-text.
std::vector<VisualScore> load_visual_scores(const fs::path& path);
std::vector<TextScore> load_text_scores(const fs::path& path);

/// {id, <field>} records; used for correlate inputs.
std::vector<ScoredId> load_scored_ids(const fs::path& path, const std::string& field);

/// Sidecar listing failed ids next to a score file.
fs::path failures_path(const fs::path& out);

}  // namespace vcurl::cli
