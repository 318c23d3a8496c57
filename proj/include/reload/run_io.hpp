#pragma once

#include "reload/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace reload {

//! run.csv columns: iteration, wrl_train, wrl_test, train_latency_ms, test_latency_ms,
//! buffer_size, mean_td_norm, mean_recency, epsilon, one "train:<id>" column per train
//! query, one "test:<id>" column per test query, then wall_ms (always last).
std::vector<std::string> run_csv_header(const Workspace &ws);

void write_run_csv(const std::filesystem::path &path, const Workspace &ws,
                   const std::vector<IterationRecord> &records);

//! Parses a run.csv written for the same workspace; the header must match exactly.
std::vector<IterationRecord> read_run_csv(const std::filesystem::path &path, const Workspace &ws);

//! One row per run; a trailing "median" row when there is more than one run.
std::vector<std::string> summary_csv_header();
void write_summary_csv(const std::filesystem::path &path, const std::vector<const TrainingResult *> &runs);

std::vector<std::string> verdicts_csv_header();
void write_verdicts_csv(const std::filesystem::path &path, const std::vector<const TrainingResult *> &runs);

//! Shortest decimal text that reads back to the same double.
std::string format_number(double x);

//! Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string &line);

} // namespace reload
