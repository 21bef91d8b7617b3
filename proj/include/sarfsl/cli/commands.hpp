#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sarfsl/cli/config.hpp"
#include "sarfsl/core/error.hpp"

namespace sarfsl::cli {

/// 2 for config errors, 3 for data errors, 4 for everything else.
int exit_code(ErrorKind kind);

/// Entry point of the sarfsl executable. Failures print one line
/// "error: <category>: <message>" to `err` and return the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Command bodies; they throw sarfsl::Error and write every output file
// atomically once all work has succeeded. `log` receives progress lines.

/// Writes the checkpoint and, next to it, <stem>.train_log.jsonl.
void cmd_pretrain(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);
/// Writes accuracy.md, accuracy.jsonl and run_config.json into out_dir.
void cmd_evaluate(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                  const std::filesystem::path& out_dir, std::ostream& log);
/// Writes ood.md, ood.jsonl, run_config.json and per-shot score files
/// scores_<M>way_<N>shot_{basic,oe}.tsv into out_dir.
void cmd_ood_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                  const std::filesystem::path& out_dir, std::ostream& log);
/// Writes the SVG to `image` and the histogram table to `image` with a .tsv
/// extension. `ways` = 0 takes the value recorded in the score files.
void cmd_plot(const std::vector<std::filesystem::path>& score_files, const std::filesystem::path& image,
              const PlotConfig& plot, int ways, std::ostream& log);
/// Exports the configured pools as manifests under out_dir (task/,
/// pretrain/, ood/<name>/) plus a run_config.json that points at them.
void cmd_make_data(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace sarfsl::cli
