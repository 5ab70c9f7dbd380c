#pragma once

// File formats: sequence CSV, label lists, score CSV, model JSON.

#include "sinkcpd/detector.hpp"
#include "sinkcpd/metric_learn.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sinkcpd::io {

/// Rows of comma-separated decimals; lines starting with '#' are skipped.
/// Errors name the 1-based line and column.
Matrix read_sequence_csv(const std::filesystem::path& path);
Matrix parse_sequence_csv(const std::string& text, const std::string& source = "<string>");
std::string format_sequence_csv(const Matrix& data);
void write_sequence_csv(const std::filesystem::path& path, const Matrix& data);

/// One nonnegative integer per line, strictly increasing. When
/// `sequence_length` >= 0, every label must be < sequence_length.
std::vector<Index> read_labels(const std::filesystem::path& path, Index sequence_length = -1);
std::vector<Index> parse_labels(const std::string& text, Index sequence_length = -1,
                                const std::string& source = "<string>");
std::string format_labels(const std::vector<Index>& labels);
void write_labels(const std::filesystem::path& path, const std::vector<Index>& labels);

/// "index,score,valid" with a header row.
std::string format_scores_csv(const ChangeScoreSeries& scores);
void write_scores_csv(const std::filesystem::path& path, const ChangeScoreSeries& scores);
ChangeScoreSeries read_scores_csv(const std::filesystem::path& path);
ChangeScoreSeries parse_scores_csv(const std::string& text, const std::string& source = "<string>");

constexpr int kModelFormatVersion = 1;

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);
void write_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel read_model(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal that round-trips the double.
std::string format_double(double x);

}  // namespace sinkcpd::io
