#pragma once

#include "more/em_trainer.hpp"
#include "more/evaluation.hpp"
#include "more/model_selection.hpp"
#include "more/synth.hpp"
#include "more/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace more {

namespace fs = std::filesystem;

inline constexpr int kModelFormatVersion = 1;

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view content);

std::string read_file(const fs::path& path);

/// Numeric CSV. The first line is a header when none of its cells parse as
/// numbers; otherwise every cell of every line must be a finite number.
/// Errors carry the 1-based line and column.
Matrix parse_matrix_csv(std::string_view text, const std::string& source = "<csv>");
Matrix read_matrix_csv(const fs::path& path);
std::string matrix_to_csv(const Matrix& values, const std::vector<std::string>& header = {});
void write_matrix_csv(const fs::path& path, const Matrix& values,
                      const std::vector<std::string>& header = {});

/// Features CSV (N x k), targets CSV (N x m) and an optional labels file with
/// one string per line.
Dataset load_dataset(const fs::path& features, const fs::path& targets,
                     const std::optional<fs::path>& labels = std::nullopt);

std::string model_to_json(const MoreModel& model);
MoreModel model_from_json(std::string_view text);
void save_model(const MoreModel& model, const fs::path& path);
MoreModel load_model(const fs::path& path);

std::string train_report_to_json(const TrainReport& report);
/// "iteration,loglik" with iteration 0 holding the initial log-likelihood.
std::string loglik_trace_csv(const TrainReport& report);

std::string eval_report_to_json(const EvalReport& report);
/// Header plus one row: model_tag, mean_r2, fold_1 ... fold_n.
std::string eval_report_csv(const EvalReport& report);

/// K,d,loglik,bic,status.
std::string sweep_to_csv(const BicSweepResult& sweep);

/// Ground-truth sidecar for a synthetic dataset.
std::string synth_truth_to_json(const SynthSpec& spec, const SynthResult& result);

/// Flat "key = value" lines; '#' starts a comment. Keys are the TrainConfig
/// field names. Unknown keys and malformed values throw ValidationError.
void apply_config_text(std::string_view text, TrainConfig& config);
void apply_config_file(const fs::path& path, TrainConfig& config);
std::string config_to_text(const TrainConfig& config);

}  // namespace more
