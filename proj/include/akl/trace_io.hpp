#pragma once
// SPDX-License-Identifier: Apache-2.0

// Result emission and parsing. One schema, two renderings:
//
//   CSV   header: epoch,loss,head_error,tail_error,max_abs_error,w_fkl,w_rkl
//         (weight cells empty for non-adaptive losses)
//   JSON  {"version":1, "rows":[{epoch,loss,head_error,tail_error,
//          max_abs_error,w_fkl,w_rkl}], "converged_at":int|null}
//         (weights null for non-adaptive losses)
//
// Sequence reports use columns token,value,w_fkl,w_rkl and a "total" field in
// JSON. Floats are rendered with 17 significant digits so parsing them back
// reproduces the exact bit pattern; files are written via a temp-and-rename
// so readers never observe a torn file.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "akl/errors.hpp"
#include "akl/sequence_loss.hpp"
#include "akl/toy_trainer.hpp"

namespace akl {

enum class OutputFormat { csv, json };

inline OutputFormat parse_output_format(std::string_view s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw invalid_input("unknown output format: '" + std::string(s) + "'");
}

namespace detail {

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s, const char* what) {
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty()) {
    throw invalid_input(std::string(what) + ": bad float '" + s + "'");
  }
  return x;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

inline constexpr const char* kTraceCsvHeader =
    "epoch,loss,head_error,tail_error,max_abs_error,w_fkl,w_rkl";
inline constexpr const char* kSequenceCsvHeader = "token,value,w_fkl,w_rkl";

inline void write_trace_csv(std::ostream& out, const TrainingTrace& trace) {
  out << kTraceCsvHeader << '\n';
  for (std::size_t e = 0; e < trace.rows.size(); ++e) {
    const TraceRow& r = trace.rows[e];
    out << e << ',' << detail::format_double(r.loss) << ','
        << detail::format_double(r.head_error) << ',' << detail::format_double(r.tail_error)
        << ',' << detail::format_double(r.max_abs_error) << ',';
    if (r.has_weights) {
      out << detail::format_double(r.w_fkl) << ',' << detail::format_double(r.w_rkl);
    } else {
      out << ',';
    }
    out << '\n';
  }
}

inline TrainingTrace read_trace_csv(std::istream& in) {
  TrainingTrace trace;
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader) {
    throw invalid_input("trace csv: missing or unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 7) throw invalid_input("trace csv: expected 7 cells per row");
    TraceRow r;
    r.loss = detail::parse_double(cells[1], "trace csv");
    r.head_error = detail::parse_double(cells[2], "trace csv");
    r.tail_error = detail::parse_double(cells[3], "trace csv");
    r.max_abs_error = detail::parse_double(cells[4], "trace csv");
    if (!cells[5].empty() || !cells[6].empty()) {
      r.has_weights = true;
      r.w_fkl = detail::parse_double(cells[5], "trace csv");
      r.w_rkl = detail::parse_double(cells[6], "trace csv");
    }
    trace.rows.push_back(r);
  }
  return trace;
}

inline nlohmann::json trace_to_json(const TrainingTrace& trace) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t e = 0; e < trace.rows.size(); ++e) {
    const TraceRow& r = trace.rows[e];
    nlohmann::json row{{"epoch", e},
                       {"loss", r.loss},
                       {"head_error", r.head_error},
                       {"tail_error", r.tail_error},
                       {"max_abs_error", r.max_abs_error}};
    if (r.has_weights) {
      row["w_fkl"] = r.w_fkl;
      row["w_rkl"] = r.w_rkl;
    } else {
      row["w_fkl"] = nullptr;
      row["w_rkl"] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  nlohmann::json j{{"version", 1}, {"rows", std::move(rows)}};
  if (trace.converged_at) {
    j["converged_at"] = *trace.converged_at;
  } else {
    j["converged_at"] = nullptr;
  }
  return j;
}

inline void write_trace_json(std::ostream& out, const TrainingTrace& trace) {
  out << trace_to_json(trace).dump(2) << '\n';
}

inline TrainingTrace read_trace_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input(std::string("trace json: parse error: ") + e.what());
  }
  if (!j.contains("version") || j.at("version").get<int>() != 1 || !j.contains("rows")) {
    throw invalid_input("trace json: missing version or rows");
  }
  TrainingTrace trace;
  for (const auto& row : j.at("rows")) {
    TraceRow r;
    r.loss = row.at("loss").get<double>();
    r.head_error = row.at("head_error").get<double>();
    r.tail_error = row.at("tail_error").get<double>();
    r.max_abs_error = row.at("max_abs_error").get<double>();
    if (!row.at("w_fkl").is_null()) {
      r.has_weights = true;
      r.w_fkl = row.at("w_fkl").get<double>();
      r.w_rkl = row.at("w_rkl").get<double>();
    }
    trace.rows.push_back(r);
  }
  if (j.contains("converged_at") && !j.at("converged_at").is_null()) {
    trace.converged_at = j.at("converged_at").get<int>();
  }
  return trace;
}

inline void write_sequence_csv(std::ostream& out, const SequenceLossReport& report) {
  out << kSequenceCsvHeader << '\n';
  for (std::size_t t = 0; t < report.per_token.size(); ++t) {
    out << t << ',' << detail::format_double(report.per_token[t].value) << ',';
    if (t < report.per_token_weights.size()) {
      out << detail::format_double(report.per_token_weights[t].first) << ','
          << detail::format_double(report.per_token_weights[t].second);
    } else {
      out << ',';
    }
    out << '\n';
  }
}

inline nlohmann::json sequence_report_to_json(const SequenceLossReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < report.per_token.size(); ++t) {
    nlohmann::json row{{"token", t}, {"value", report.per_token[t].value}};
    if (t < report.per_token_weights.size()) {
      row["w_fkl"] = report.per_token_weights[t].first;
      row["w_rkl"] = report.per_token_weights[t].second;
    } else {
      row["w_fkl"] = nullptr;
      row["w_rkl"] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  return nlohmann::json{{"version", 1}, {"total", report.total}, {"per_token", std::move(rows)}};
}

/// Writes content to path atomically: temp file in the same directory, then
/// rename over the target.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  const auto dir = path.parent_path();
  if (!dir.empty()) {
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory " + dir.string() + ": " + ec.message());
  }
  static std::atomic<unsigned> counter{std::random_device{}()};
  const auto tmp = path.string() + ".tmp." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + tmp + " for writing");
    out << content;
    out.flush();
    if (!out) throw io_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw io_error("cannot rename " + tmp + " to " + path.string() + ": " + ec.message());
  }
}

/// emit_results: renders a trace in the requested format and writes it
/// atomically.
inline void emit_results(const TrainingTrace& trace, OutputFormat format,
                         const std::filesystem::path& path) {
  std::ostringstream os;
  if (format == OutputFormat::csv) {
    write_trace_csv(os, trace);
  } else {
    write_trace_json(os, trace);
  }
  atomic_write_file(path, os.str());
}

inline void emit_results(const SequenceLossReport& report, OutputFormat format,
                         const std::filesystem::path& path) {
  std::ostringstream os;
  if (format == OutputFormat::csv) {
    write_sequence_csv(os, report);
  } else {
    os << sequence_report_to_json(report).dump(2) << '\n';
  }
  atomic_write_file(path, os.str());
}

}  // namespace akl
