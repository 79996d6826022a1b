#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "p2pgrid/env.hpp"
#include "p2pgrid/metrics.hpp"

namespace p2pgrid::io {

// One JSON object per environment step.
nlohmann::json step_to_json(long episode, const env::StepResult& step);
void write_step_line(std::ostream& out, long episode, const env::StepResult& step);

// Rebuilds per-episode metrics from a JSON-lines trajectory. Throws DataError on malformed lines.
std::vector<EpisodeMetrics> metrics_from_trajectory(std::istream& in);

enum class ExportFormat { TidyCsv, WideCsv };
// Accepts "tidy-csv" and "wide-csv". Throws UnknownFormat.
ExportFormat parse_export_format(std::string_view name);

// Columns episode,metric,agent,value; agent is an index or "community".
void write_tidy_csv(std::ostream& out, const std::vector<EpisodeMetrics>& metrics);
void write_metrics_csv(std::ostream& out, const std::vector<EpisodeMetrics>& metrics, std::size_t agents);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace p2pgrid::io
