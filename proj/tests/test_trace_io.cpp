// SPDX-License-Identifier: Apache-2.0

#include "akl/trace_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "akl/toy_trainer.hpp"
#include "teacher_suite.hpp"

namespace {

using akl::DivergenceKind;
using akl::OutputFormat;
using akl::TrainingTrace;

TrainingTrace sample_trace(DivergenceKind kind, int epochs = 12) {
  const auto teacher = akl::build_teacher(akl::test::bimodal_spec(40));
  const auto z0 = akl::init_student(40, 5, {akl::InitKind::random_normal, 1.0, {}});
  akl::TrainConfig cfg;
  cfg.divergence = {kind, 0.5};
  cfg.epochs = epochs;
  cfg.learning_rate = 0.5;
  return akl::train(teacher, z0, cfg);
}

void expect_rows_equal(const TrainingTrace& a, const TrainingTrace& b) {
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t e = 0; e < a.rows.size(); ++e) {
    EXPECT_EQ(a.rows[e].loss, b.rows[e].loss);
    EXPECT_EQ(a.rows[e].head_error, b.rows[e].head_error);
    EXPECT_EQ(a.rows[e].tail_error, b.rows[e].tail_error);
    EXPECT_EQ(a.rows[e].max_abs_error, b.rows[e].max_abs_error);
    EXPECT_EQ(a.rows[e].has_weights, b.rows[e].has_weights);
    if (a.rows[e].has_weights) {
      EXPECT_EQ(a.rows[e].w_fkl, b.rows[e].w_fkl);
      EXPECT_EQ(a.rows[e].w_rkl, b.rows[e].w_rkl);
    }
  }
}

TEST(TraceIo, CsvRoundTripIsBitExact) {
  for (auto kind : {DivergenceKind::fkl, DivergenceKind::akl}) {
    const auto trace = sample_trace(kind);
    std::ostringstream os;
    akl::write_trace_csv(os, trace);
    std::istringstream is(os.str());
    const auto back = akl::read_trace_csv(is);
    expect_rows_equal(trace, back);
  }
}

TEST(TraceIo, JsonRoundTripIsBitExact) {
  for (auto kind : {DivergenceKind::rkl, DivergenceKind::akl_r}) {
    auto trace = sample_trace(kind);
    std::ostringstream os;
    akl::write_trace_json(os, trace);
    std::istringstream is(os.str());
    const auto back = akl::read_trace_json(is);
    expect_rows_equal(trace, back);
    EXPECT_EQ(trace.converged_at.has_value(), back.converged_at.has_value());
  }
}

TEST(TraceIo, ZeroEpochTraceIsHeaderOnly) {
  TrainingTrace empty;
  std::ostringstream os;
  akl::write_trace_csv(os, empty);
  EXPECT_EQ(os.str(), std::string(akl::kTraceCsvHeader) + "\n");
}

TEST(TraceIo, GoldenSchema) {
  // The header line and JSON keys are part of the external contract.
  EXPECT_STREQ(akl::kTraceCsvHeader, "epoch,loss,head_error,tail_error,max_abs_error,w_fkl,w_rkl");
  EXPECT_STREQ(akl::kSequenceCsvHeader, "token,value,w_fkl,w_rkl");

  const auto trace = sample_trace(DivergenceKind::fkl, 2);
  const auto j = akl::trace_to_json(trace);
  EXPECT_TRUE(j.contains("version"));
  EXPECT_EQ(j.at("version").get<int>(), 1);
  EXPECT_TRUE(j.contains("rows"));
  EXPECT_TRUE(j.contains("converged_at"));
  const auto& row = j.at("rows").at(0);
  for (const char* key :
       {"epoch", "loss", "head_error", "tail_error", "max_abs_error", "w_fkl", "w_rkl"}) {
    EXPECT_TRUE(row.contains(key)) << key;
  }
}

TEST(TraceIo, NonAdaptiveWeightCellsAreEmpty) {
  const auto trace = sample_trace(DivergenceKind::fkl, 4);
  std::ostringstream os;
  akl::write_trace_csv(os, trace);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    ASSERT_TRUE(line.size() >= 2);
    EXPECT_EQ(line.substr(line.size() - 2), ",,") << line;
  }

  const auto j = akl::trace_to_json(trace);
  for (const auto& row : j.at("rows")) {
    EXPECT_TRUE(row.at("w_fkl").is_null());
    EXPECT_TRUE(row.at("w_rkl").is_null());
  }
}

TEST(TraceIo, AdaptiveWeightCellsArePopulated) {
  const auto trace = sample_trace(DivergenceKind::akl, 4);
  std::ostringstream os;
  akl::write_trace_csv(os, trace);
  EXPECT_EQ(os.str().find(",,"), std::string::npos);
}

TEST(TraceIo, EmitResultsWritesAtomically) {
  const auto dir = std::filesystem::temp_directory_path() / "akl_trace_io_test";
  std::filesystem::remove_all(dir);
  const auto trace = sample_trace(DivergenceKind::akl, 3);
  const auto path = dir / "out.csv";
  akl::emit_results(trace, OutputFormat::csv, path);
  ASSERT_TRUE(std::filesystem::exists(path));
  // No stray temp files left behind.
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
  EXPECT_EQ(entries, 1u);
  std::ifstream in(path);
  const auto back = akl::read_trace_csv(in);
  expect_rows_equal(trace, back);
  std::filesystem::remove_all(dir);
}

TEST(TraceIo, SequenceReportEmission) {
  akl::SequenceLossReport report;
  report.total = 0.75;
  report.per_token.push_back({0.5, {0.1, -0.1}});
  report.per_token.push_back({0.25, {0.2, -0.2}});
  report.per_token_weights = {{0.6, 0.4}, {0.3, 0.7}};
  std::ostringstream os;
  akl::write_sequence_csv(os, report);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, akl::kSequenceCsvHeader);
  std::string row0;
  std::getline(is, row0);
  EXPECT_EQ(row0, "0,0.5,0.59999999999999998,0.40000000000000002");

  const auto j = akl::sequence_report_to_json(report);
  EXPECT_EQ(j.at("total").get<double>(), 0.75);
  EXPECT_EQ(j.at("per_token").size(), 2u);
}

TEST(TraceIo, RejectsMalformedInput) {
  std::istringstream bad_header("not,a,header\n");
  EXPECT_THROW(akl::read_trace_csv(bad_header), akl::invalid_input);
  std::istringstream bad_cells(std::string(akl::kTraceCsvHeader) + "\n1,2,3\n");
  EXPECT_THROW(akl::read_trace_csv(bad_cells), akl::invalid_input);
  std::istringstream bad_float(std::string(akl::kTraceCsvHeader) + "\n0,x,0,0,0,,\n");
  EXPECT_THROW(akl::read_trace_csv(bad_float), akl::invalid_input);
  std::istringstream bad_json("{\"rows\": []}");
  EXPECT_THROW(akl::read_trace_json(bad_json), akl::invalid_input);
  std::istringstream not_json("êtes-vous json?");
  EXPECT_THROW(akl::read_trace_json(not_json), akl::invalid_input);
}

TEST(OutputFormatTag, Parses) {
  EXPECT_EQ(akl::parse_output_format("csv"), OutputFormat::csv);
  EXPECT_EQ(akl::parse_output_format("json"), OutputFormat::json);
  EXPECT_THROW(akl::parse_output_format("xml"), akl::invalid_input);
}

}  // namespace
