/* Copyright 2026 The FocusLeak Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "focusleak/attack.hpp"
#include "focusleak/defenses.hpp"
#include "focusleak/metrics.hpp"
#include "focusleak/region.hpp"

namespace focusleak {

// A failure inside one pipeline stage; what() reads "<stage>: <cause>".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause)
      : std::runtime_error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

enum class SweepAxis { epsilon, k, iterations, lambda_attn, alpha_weight };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepRanges {
  std::vector<double> epsilon;
  std::vector<double> k;
  std::vector<double> iterations;
  std::vector<double> lambda_attn;
  // Step sizes in 1/255 units.
  std::vector<double> alpha_weight;

  std::vector<double>& values(SweepAxis axis);
  const std::vector<double>& values(SweepAxis axis) const;
};

struct PipelineConfig {
  std::vector<std::filesystem::path> images;
  std::optional<std::filesystem::path> mask;
  std::string findings;
  std::string modality;  // optional label used for per-modality summaries
  AttackConfig attack;
  MetricConfig metrics;
  std::vector<DefenseConfig> defenses;
  std::filesystem::path output_dir = "focusleak_out";
  SweepRanges sweep;
  std::vector<std::uint64_t> ensemble_seeds{std::begin(kDefaultSeeds), std::end(kDefaultSeeds)};
  double segment_threshold = 0.5;
  double segment_min_component = 0.01;
  std::optional<std::filesystem::path> judge_scores;
  std::optional<std::filesystem::path> vocabulary;
  unsigned jobs = 1;

  void validate() const;
};

// Accepts plain decimals and "a/b" fractions such as "16/255".
double parse_number(std::string_view text);

PipelineConfig parse_config(std::string_view json_text);
PipelineConfig load_config(const std::filesystem::path& path);
// Canonical JSON of every field that affects results.
std::string canonical_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

// FNV-1a 64 as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

struct DefenseOutcome {
  DefenseConfig config;
  double avg_sim = 0.0;       // defended adversarial vs clean
  double a_bg = 0.0;          // attention mass on the background after the defense
  double l_loc = 0.0;         // fixed-crop alignment to the target after the defense
};

struct ImageOutcome {
  std::string image_id;
  TokenSeq clean_findings;
  TokenSeq adversarial_findings;
  AttackResult attack;
  PatchSet patches;
  EvalRecord record;
  std::vector<DefenseOutcome> defenses;
  std::string adversarial_checksum;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> artifacts;
};

// Appends rows to <dir>/report.csv and <dir>/report.jsonl under one lock.
class ReportWriter {
 public:
  explicit ReportWriter(std::filesystem::path dir);
  void append(const ImageOutcome& outcome, const std::string& config_hash);
  std::filesystem::path csv_path() const { return dir_ / "report.csv"; }
  std::filesystem::path jsonl_path() const { return dir_ / "report.jsonl"; }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
};

std::string report_header();

using ProgressFn = std::function<void(const std::string&)>;

// Runs every stage for one image and writes its artifacts into
// config.output_dir. On failure the artifacts written so far are removed and
// a StageError is thrown.
ImageOutcome run_image(const PipelineConfig& config, const SurrogateEnsemble& ens, const Vocabulary& vocab,
                       const std::filesystem::path& image_path, const ProgressFn& progress = {});

struct PipelineSummary {
  std::vector<ImageOutcome> outcomes;
  AggregateReport aggregate;
  std::string config_hash;
  std::string report_checksum;  // of report.csv after this run
};

// Throws IoError before any stage runs when an input path is missing.
PipelineSummary run_pipeline(const PipelineConfig& config, const ProgressFn& progress = {});

struct SweepRow {
  double axis_value = 0.0;
  double mtr = 0.0;
  double avg_sim = 0.0;
  double mas = 0.0;
  double runtime_ms = 0.0;
  std::string error;  // empty on success
};

struct SweepResult {
  SweepAxis axis;
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;
  std::filesystem::path csv;
};

// One pipeline run per distinct axis value over the first image, sharing the
// base seed; rows may run concurrently up to config.jobs.
SweepResult run_sweep(const PipelineConfig& config, SweepAxis axis, const ProgressFn& progress = {});

// Loads a jsonl report and aggregates it.
AggregateReport summarize_report(const std::filesystem::path& jsonl, const MetricConfig& config);

// 8-bit grayscale visualizations.
Image delta_heatmap(const Perturbation& delta, std::size_t height, std::size_t width, double epsilon);
Image attention_image(const SurrogateEnsemble& ens, const Image& image, const TokenSeq& tokens);

}  // namespace focusleak
