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

#include "focusleak/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "focusleak/error.hpp"
#include "json.hpp"

namespace focusleak {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kFindingsSalt = 0xF1D1;
constexpr std::uint64_t kDefenseEvalSalt = 0xDEF0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

template <class F>
auto in_stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure by index once all workers have stopped.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::epsilon: return "epsilon";
    case SweepAxis::k: return "k";
    case SweepAxis::iterations: return "iterations";
    case SweepAxis::lambda_attn: return "lambda_attn";
    case SweepAxis::alpha_weight: return "alpha_weight";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  for (SweepAxis a : {SweepAxis::epsilon, SweepAxis::k, SweepAxis::iterations, SweepAxis::lambda_attn,
                      SweepAxis::alpha_weight}) {
    if (to_string(a) == text) return a;
  }
  throw ContractError("unknown sweep axis '" + std::string(text) +
                      "' (expected epsilon, k, iterations, lambda_attn or alpha_weight)");
}

std::vector<double>& SweepRanges::values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::epsilon: return epsilon;
    case SweepAxis::k: return k;
    case SweepAxis::iterations: return iterations;
    case SweepAxis::lambda_attn: return lambda_attn;
    case SweepAxis::alpha_weight: return alpha_weight;
  }
  throw ContractError("bad sweep axis");
}

const std::vector<double>& SweepRanges::values(SweepAxis axis) const {
  return const_cast<SweepRanges*>(this)->values(axis);
}

void PipelineConfig::validate() const {
  attack.validate();
  metrics.validate();
  for (const auto& d : defenses) d.validate();
  if (ensemble_seeds.empty()) throw ContractError("config: ensemble_seeds must not be empty");
  if (findings.empty()) throw ContractError("config: findings text is empty");
  if (jobs == 0) throw ContractError("config: jobs must be >= 1");
}

double parse_number(std::string_view text) {
  auto parse_plain = [&](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ContractError("not a number: '" + std::string(text) + "'");
    }
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse_plain(text);
  const double den = parse_plain(text.substr(slash + 1));
  if (den == 0.0) throw ContractError("zero denominator in '" + std::string(text) + "'");
  return parse_plain(text.substr(0, slash)) / den;
}

// --- JSON config --------------------------------------------------------------

namespace {

double num(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_number(v.get<std::string>());
  throw ContractError("config: '" + key + "' must be a number or a fraction string");
}

std::size_t count(const json& v, const std::string& key) {
  const double d = num(v, key);
  if (!(d >= 0.0) || d != std::floor(d)) throw ContractError("config: '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(d);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ContractError("config: '" + where + "' must be an object");
  for (const auto& [k, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ContractError("config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
    }
  }
}

std::vector<double> num_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ContractError("config: '" + key + "' must be a list");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(num(e, key));
  return out;
}

DefenseConfig parse_defense(const json& j) {
  check_keys(j, "defenses[]", {"kind", "sigma", "bits", "down_factor", "seed"});
  DefenseConfig d;
  if (j.contains("kind")) d.kind = parse_defense_kind(j["kind"].get<std::string>());
  if (j.contains("sigma")) d.sigma = num(j["sigma"], "sigma");
  if (j.contains("bits")) d.bits = static_cast<unsigned>(count(j["bits"], "bits"));
  if (j.contains("down_factor")) d.down_factor = count(j["down_factor"], "down_factor");
  if (j.contains("seed")) d.seed = j["seed"].get<std::uint64_t>();
  return d;
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), e.byte);
  }
  check_keys(root, "", {"images", "mask", "findings", "modality", "output_dir", "attack", "metrics", "defenses",
                        "sweep", "ensemble_seeds", "segment", "judge_scores", "vocabulary", "jobs"});
  PipelineConfig c;
  try {
    if (root.contains("images")) {
      for (const auto& p : root["images"]) c.images.emplace_back(p.get<std::string>());
    }
    if (root.contains("mask")) c.mask = root["mask"].get<std::string>();
    if (root.contains("findings")) c.findings = root["findings"].get<std::string>();
    if (root.contains("modality")) c.modality = root["modality"].get<std::string>();
    if (root.contains("output_dir")) c.output_dir = root["output_dir"].get<std::string>();
    if (root.contains("judge_scores")) c.judge_scores = root["judge_scores"].get<std::string>();
    if (root.contains("vocabulary")) c.vocabulary = root["vocabulary"].get<std::string>();
    if (root.contains("jobs")) c.jobs = static_cast<unsigned>(count(root["jobs"], "jobs"));
    if (root.contains("ensemble_seeds")) c.ensemble_seeds = root["ensemble_seeds"].get<std::vector<std::uint64_t>>();

    if (root.contains("attack")) {
      const json& a = root["attack"];
      check_keys(a, "attack", {"epsilon", "step", "iterations", "k", "seed", "num_edits", "n_crops", "lambda_attn",
                               "lambda_lm", "sign_mode", "crop_scale", "crop_out_side", "seed_rounds",
                               "seed_pgd_steps", "seed_tolerance"});
      AttackConfig& ac = c.attack;
      if (a.contains("epsilon")) ac.epsilon = num(a["epsilon"], "epsilon");
      if (a.contains("step")) ac.step = num(a["step"], "step");
      if (a.contains("iterations")) ac.iterations = count(a["iterations"], "iterations");
      if (a.contains("k")) ac.k = count(a["k"], "k");
      if (a.contains("seed")) ac.seed = a["seed"].get<std::uint64_t>();
      if (a.contains("num_edits")) ac.num_edits = count(a["num_edits"], "num_edits");
      if (a.contains("n_crops")) ac.weights.n_crops = count(a["n_crops"], "n_crops");
      if (a.contains("lambda_attn")) ac.weights.lambda_attn = num(a["lambda_attn"], "lambda_attn");
      if (a.contains("lambda_lm")) ac.weights.lambda_lm = num(a["lambda_lm"], "lambda_lm");
      if (a.contains("sign_mode")) {
        const auto s = a["sign_mode"].get<std::string>();
        if (s == "as_written") ac.weights.sign_mode = SignMode::as_written;
        else if (s == "disrupt") ac.weights.sign_mode = SignMode::disrupt;
        else throw ContractError("config: sign_mode must be as_written or disrupt");
      }
      if (a.contains("crop_scale")) {
        const auto s = num_list(a["crop_scale"], "crop_scale");
        if (s.size() != 2) throw ContractError("config: crop_scale must be [lo, hi]");
        ac.crops.scale_lo = s[0];
        ac.crops.scale_hi = s[1];
      }
      if (a.contains("crop_out_side")) ac.crops.out_side = count(a["crop_out_side"], "crop_out_side");
      if (a.contains("seed_rounds")) ac.seed_rounds = count(a["seed_rounds"], "seed_rounds");
      if (a.contains("seed_pgd_steps")) ac.seed_pgd_steps = count(a["seed_pgd_steps"], "seed_pgd_steps");
      if (a.contains("seed_tolerance")) ac.seed_tolerance = num(a["seed_tolerance"], "seed_tolerance");
    }
    if (root.contains("metrics")) {
      const json& m = root["metrics"];
      check_keys(m, "metrics", {"alpha", "beta", "epsilon", "mode"});
      if (m.contains("alpha")) c.metrics.mas_alpha = num(m["alpha"], "alpha");
      if (m.contains("beta")) c.metrics.mas_beta = num(m["beta"], "beta");
      if (m.contains("epsilon")) c.metrics.mas_epsilon = num(m["epsilon"], "epsilon");
      if (m.contains("mode")) c.metrics.mas_mode = parse_mas_mode(m["mode"].get<std::string>());
    }
    if (root.contains("defenses")) {
      for (const auto& d : root["defenses"]) c.defenses.push_back(parse_defense(d));
    }
    if (root.contains("sweep")) {
      const json& s = root["sweep"];
      check_keys(s, "sweep", {"epsilon", "k", "iterations", "lambda_attn", "alpha_weight"});
      for (SweepAxis a : {SweepAxis::epsilon, SweepAxis::k, SweepAxis::iterations, SweepAxis::lambda_attn,
                          SweepAxis::alpha_weight}) {
        const std::string key(to_string(a));
        if (s.contains(key)) c.sweep.values(a) = num_list(s[key], key);
      }
    }
    if (root.contains("segment")) {
      const json& s = root["segment"];
      check_keys(s, "segment", {"threshold", "min_component"});
      if (s.contains("threshold")) c.segment_threshold = num(s["threshold"], "threshold");
      if (s.contains("min_component")) c.segment_min_component = num(s["min_component"], "min_component");
    }
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  PipelineConfig c = parse_config(read_file(path));
  // Relative paths in a config file are relative to the file.
  const fs::path base = path.parent_path();
  auto rebase = [&](fs::path& p) {
    if (p.is_relative()) p = base / p;
  };
  for (auto& p : c.images) rebase(p);
  if (c.mask) rebase(*c.mask);
  if (c.judge_scores) rebase(*c.judge_scores);
  if (c.vocabulary) rebase(*c.vocabulary);
  rebase(c.output_dir);
  return c;
}

std::string canonical_json(const PipelineConfig& c) {
  json j;
  j["images"] = json::array();
  for (const auto& p : c.images) j["images"].push_back(p.filename().string());
  j["mask"] = c.mask ? json(c.mask->filename().string()) : json(nullptr);
  j["findings"] = c.findings;
  j["modality"] = c.modality;
  const AttackConfig& a = c.attack;
  j["attack"] = {{"epsilon", a.epsilon},
                 {"step", a.step},
                 {"iterations", a.iterations},
                 {"k", a.k},
                 {"seed", a.seed},
                 {"num_edits", a.num_edits},
                 {"n_crops", a.weights.n_crops},
                 {"lambda_attn", a.weights.lambda_attn},
                 {"lambda_lm", a.weights.lambda_lm},
                 {"sign_mode", a.weights.sign_mode == SignMode::as_written ? "as_written" : "disrupt"},
                 {"crop_scale", {a.crops.scale_lo, a.crops.scale_hi}},
                 {"crop_out_side", a.crops.out_side},
                 {"seed_rounds", a.seed_rounds},
                 {"seed_pgd_steps", a.seed_pgd_steps},
                 {"seed_tolerance", a.seed_tolerance}};
  j["metrics"] = {{"alpha", c.metrics.mas_alpha},
                  {"beta", c.metrics.mas_beta},
                  {"epsilon", c.metrics.mas_epsilon},
                  {"mode", std::string(to_string(c.metrics.mas_mode))}};
  j["defenses"] = json::array();
  for (const auto& d : c.defenses) {
    j["defenses"].push_back({{"kind", std::string(to_string(d.kind))},
                             {"sigma", d.sigma},
                             {"bits", d.bits},
                             {"down_factor", d.down_factor},
                             {"seed", d.seed}});
  }
  j["ensemble_seeds"] = c.ensemble_seeds;
  j["segment"] = {{"threshold", c.segment_threshold}, {"min_component", c.segment_min_component}};
  j["judge_scores"] = c.judge_scores ? json(c.judge_scores->filename().string()) : json(nullptr);
  j["vocabulary"] = c.vocabulary ? json(c.vocabulary->filename().string()) : json(nullptr);
  return j.dump();
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const PipelineConfig& config) { return fnv1a_hex(canonical_json(config)); }

// --- Report -------------------------------------------------------------------

std::string report_header() {
  return "config_hash,image_id,modality,mtr,avg_sim,mas,judge,clean_findings,adversarial_findings,"
         "best_iteration,best_l_final,eval_l_loc_clean,eval_l_loc,a_bg_before,a_bg_after,max_abs_delta,"
         "off_support_nonzero,adversarial_checksum";
}

ReportWriter::ReportWriter(fs::path dir) : dir_(std::move(dir)) {}

void ReportWriter::append(const ImageOutcome& o, const std::string& hash) {
  std::lock_guard lock(mu_);
  const bool fresh = !fs::exists(csv_path()) || fs::file_size(csv_path()) == 0;
  std::ofstream csv(csv_path(), std::ios::binary | std::ios::app);
  std::ofstream jl(jsonl_path(), std::ios::binary | std::ios::app);
  if (!csv || !jl) throw IoError("cannot append to report in " + dir_.string());
  if (fresh) csv << report_header() << "\n";

  const auto& r = o.record;
  const auto& a = o.attack;
  std::string clean_text, adv_text;
  for (std::size_t id : o.clean_findings.ids) clean_text += (clean_text.empty() ? "" : " ") + std::to_string(id);
  for (std::size_t id : o.adversarial_findings.ids) adv_text += (adv_text.empty() ? "" : " ") + std::to_string(id);

  csv << hash << ',' << csv_field(r.image_id) << ',' << csv_field(r.modality) << ',' << fmt(r.mtr) << ','
      << fmt(r.avg_sim) << ',' << fmt(r.mas) << ',' << to_string(r.code) << ',' << clean_text << ',' << adv_text
      << ',' << a.best_iteration << ',' << fmt(a.best_l_final) << ',' << fmt(a.eval_l_loc_clean) << ','
      << fmt(a.eval_l_loc) << ',' << fmt(a.attention_before.a_bg) << ',' << fmt(a.attention_after.a_bg) << ','
      << fmt(a.audit.max_abs_delta) << ',' << a.audit.off_support_nonzero << ',' << o.adversarial_checksum << "\n";

  json j = {{"config_hash", hash},
            {"image_id", r.image_id},
            {"modality", r.modality},
            {"mtr", r.mtr},
            {"avg_sim", r.avg_sim},
            {"mas", r.mas},
            {"judge", std::string(to_string(r.code))},
            {"clean_findings", o.clean_findings.ids},
            {"adversarial_findings", o.adversarial_findings.ids},
            {"best_iteration", a.best_iteration},
            {"best_l_final", a.best_l_final},
            {"eval_l_loc_clean", a.eval_l_loc_clean},
            {"eval_l_loc", a.eval_l_loc},
            {"a_bg_before", a.attention_before.a_bg},
            {"a_bg_after", a.attention_after.a_bg},
            {"max_abs_delta", a.audit.max_abs_delta},
            {"off_support_nonzero", a.audit.off_support_nonzero},
            {"adversarial_checksum", o.adversarial_checksum}};
  j["defenses"] = json::array();
  for (const auto& d : o.defenses) {
    j["defenses"].push_back({{"kind", std::string(to_string(d.config.kind))},
                             {"avg_sim", d.avg_sim},
                             {"a_bg", d.a_bg},
                             {"l_loc", d.l_loc}});
  }
  jl << j.dump() << "\n";
}

// --- Visualizations -----------------------------------------------------------

Image delta_heatmap(const Perturbation& delta, std::size_t height, std::size_t width, double epsilon) {
  if (!(epsilon > 0.0)) throw ContractError("delta_heatmap: epsilon must be > 0");
  const std::size_t plane = height * width;
  if (delta.delta.size() != plane * delta.channels) throw ContractError("delta_heatmap: size mismatch");
  Image out(height, width, 1);
  for (std::size_t c = 0; c < delta.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      out.pixels[i] = std::max(out.pixels[i], std::min(1.0, std::abs(delta.delta[c * plane + i]) / epsilon));
    }
  }
  return out;
}

Image attention_image(const SurrogateEnsemble& ens, const Image& image, const TokenSeq& tokens) {
  const FusionOutput f = fuse(ens, image, tokens);
  const std::size_t g = ens.dims.grid();
  auto up = resample_plane(f.spatial_map.data, ResampleWindow::full(g, g, image.height, image.width));
  const double hi = *std::max_element(up.begin(), up.end());
  for (double& v : up) v = hi > 0.0 ? std::clamp(v / hi, 0.0, 1.0) : 0.0;
  return Image(image.height, image.width, 1, std::move(up));
}

// --- Pipeline -----------------------------------------------------------------

namespace {

struct ArtifactGuard {
  std::vector<fs::path> files;
  bool committed = false;
  ~ArtifactGuard() {
    if (committed) return;
    std::error_code ec;
    for (const auto& f : files) fs::remove(f, ec);
  }
};

void write_trace(const AttackResult& a, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << "iteration,l_loc,l_attn,l_final,a_fg,a_bg,best_l_final\n";
  auto row = [&](std::size_t it, const TraceRow& r) {
    f << it << ',' << fmt(r.l_loc) << ',' << fmt(r.l_attn) << ',' << fmt(r.l_final) << ',' << fmt(r.a_fg) << ','
      << fmt(r.a_bg) << ',' << fmt(r.best_l_final) << "\n";
  };
  for (std::size_t i = 0; i < a.trace.size(); ++i) row(i, a.trace[i]);
  row(a.trace.size(), a.last_iterate);
}

Vocabulary load_vocab(const PipelineConfig& c) {
  return c.vocabulary ? load_vocabulary(*c.vocabulary) : default_vocabulary();
}

}  // namespace

ImageOutcome run_image(const PipelineConfig& config, const SurrogateEnsemble& ens, const Vocabulary& vocab,
                       const fs::path& image_path, const ProgressFn& progress) {
  auto note = [&](const std::string& stage) {
    if (progress) progress(image_path.stem().string() + ": " + stage);
  };
  ImageOutcome out;
  out.image_id = image_path.stem().string();
  ArtifactGuard guard;
  const AttackConfig& ac = config.attack;

  note("load");
  const Image clean = in_stage("load", [&] {
    Image img = load_pnm(image_path);
    img.validate();
    return img;
  });

  note("findings");
  in_stage("findings", [&] {
    out.clean_findings = vocab.tokenize(config.findings);
    out.clean_findings.validate(vocab.size());
    SplitMix64 rng(derive_seed(ac.seed, kFindingsSalt));
    out.adversarial_findings = generate_adversarial_findings(out.clean_findings, vocab, ac.num_edits, rng);
  });

  note("seed");
  const SeedStageResult seed = in_stage("seed", [&] {
    MultimodalSeed s = build_multimodal_seed(out.adversarial_findings, vocab, clean.height, clean.width);
    for (auto& w : s.warnings) out.warnings.push_back("seed: " + w);
    if (clean.channels == 3) {
      Image rgb(s.image.height, s.image.width, 3);
      for (std::size_t c = 0; c < 3; ++c) {
        std::copy(s.image.pixels.begin(), s.image.pixels.end(), rgb.pixels.begin() + c * s.image.plane_size());
      }
      s.image = std::move(rgb);
    }
    return optimize_seed_alternating(ens, s, {clean, out.clean_findings}, out.adversarial_findings, ac);
  });

  note("segment");
  const BinaryMask foreground = in_stage("segment", [&] {
    if (!config.mask) return heuristic_foreground_mask(clean, config.segment_threshold, config.segment_min_component);
    BinaryMask m = load_mask_pnm(*config.mask);
    if (m.height != clean.height || m.width != clean.width) {
      throw ContractError("mask is " + std::to_string(m.height) + "x" + std::to_string(m.width) + ", image is " +
                          std::to_string(clean.height) + "x" + std::to_string(clean.width));
    }
    const std::size_t on = m.popcount();
    if (on == 0) throw SegmentationError(SegmentationError::Kind::empty_foreground, "mask file has no foreground");
    if (on == m.bits.size()) {
      throw SegmentationError(SegmentationError::Kind::full_foreground, "mask file has no background");
    }
    return m;
  });

  note("patches");
  const BinaryMask support = in_stage("patches", [&] {
    std::vector<std::string> warnings;
    out.patches = top_k_squares(foreground.complement(), ac.k, &warnings);
    for (auto& w : warnings) out.warnings.push_back("patches: " + w);
    if (out.patches.squares.empty()) throw ContractError("no background square available");
    return squares_to_mask(out.patches, clean.height, clean.width);
  });

  note("attack");
  out.attack = in_stage("attack", [&] {
    return run_focusleak_attack(ens, clean, support, seed.image, seed.tokens, ac);
  });

  note("defend");
  in_stage("defend", [&] {
    for (const DefenseConfig& d : config.defenses) {
      const Image defended = apply_defense(out.attack.adversarial, d);
      DefenseOutcome o;
      o.config = d;
      const Image pair[] = {clean};
      const Image adv[] = {defended};
      o.avg_sim = avg_sim(ens, pair, adv);
      o.a_bg = attention_masses(ens, defended, seed.tokens, support).a_bg;
      SplitMix64 rng(derive_seed(ac.seed, kDefenseEvalSalt));
      o.l_loc = local_alignment_loss(ens, defended, seed.image, rng, ac.weights.n_crops, ac.crops);
      out.defenses.push_back(o);
    }
  });

  note("evaluate");
  in_stage("evaluate", [&] {
    const JudgeResult judged = mtr_rule_judge(out.clean_findings, out.adversarial_findings, vocab);
    EvalRecord& r = out.record;
    r.image_id = out.image_id;
    r.modality = config.modality;
    r.code = judged.code;
    r.mtr = judged.score;
    if (config.judge_scores) {
      const auto external = load_judge_scores(*config.judge_scores);
      if (auto it = external.find(out.image_id); it != external.end()) r.mtr = it->second;
    }
    const Image orig[] = {clean};
    const Image adv[] = {out.attack.adversarial};
    r.avg_sim = avg_sim(ens, orig, adv);
    r.mas = mas(r.mtr, std::max(r.avg_sim, 0.0), config.metrics);
  });

  note("write");
  in_stage("write", [&] {
    fs::create_directories(config.output_dir);
    const std::string ext = clean.channels == 3 ? ".ppm" : ".pgm";
    auto save = [&](const Image& img, const std::string& suffix) {
      const fs::path p = config.output_dir / (out.image_id + suffix);
      guard.files.push_back(p);
      save_pnm(img, p);
      out.artifacts.push_back(p);
    };
    const auto bytes = encode_pnm(out.attack.adversarial);
    out.adversarial_checksum = fnv1a_hex({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
    save(out.attack.adversarial, "_adv" + ext);
    save(seed.image, "_target" + ext);
    save(delta_heatmap(out.attack.delta, clean.height, clean.width, ac.epsilon), "_delta.pgm");
    save(attention_image(ens, clean, seed.tokens), "_attn_before.pgm");
    save(attention_image(ens, out.attack.adversarial, seed.tokens), "_attn_after.pgm");
    const fs::path trace = config.output_dir / (out.image_id + "_trace.csv");
    guard.files.push_back(trace);
    write_trace(out.attack, trace);
    out.artifacts.push_back(trace);
  });

  guard.committed = true;
  return out;
}

PipelineSummary run_pipeline(const PipelineConfig& config, const ProgressFn& progress) {
  config.validate();
  if (config.images.empty()) throw ContractError("config: no input images");
  for (const auto& p : config.images) {
    if (!fs::exists(p)) throw IoError("input image not found: " + p.string());
  }
  if (config.mask && !fs::exists(*config.mask)) throw IoError("mask file not found: " + config.mask->string());
  if (config.judge_scores && !fs::exists(*config.judge_scores)) {
    throw IoError("judge score file not found: " + config.judge_scores->string());
  }
  const Vocabulary vocab = load_vocab(config);
  const SurrogateEnsemble ens = build_ensemble(config.ensemble_seeds);

  PipelineSummary summary;
  summary.config_hash = config_hash(config);
  summary.outcomes.resize(config.images.size());
  try {
    parallel_for(config.images.size(), config.jobs, [&](std::size_t i) {
      summary.outcomes[i] = run_image(config, ens, vocab, config.images[i], progress);
    });
  } catch (...) {
    std::error_code ec;
    for (const auto& o : summary.outcomes) {
      for (const auto& f : o.artifacts) fs::remove(f, ec);
    }
    throw;
  }

  ReportWriter writer(config.output_dir);
  std::vector<EvalRecord> records;
  for (const auto& o : summary.outcomes) {
    writer.append(o, summary.config_hash);
    records.push_back(o.record);
  }
  summary.aggregate = aggregate(records, config.metrics);
  summary.report_checksum = fnv1a_hex(read_file(writer.csv_path()));
  return summary;
}

SweepResult run_sweep(const PipelineConfig& config, SweepAxis axis, const ProgressFn& progress) {
  config.validate();
  if (config.images.empty()) throw ContractError("config: no input images");
  if (!fs::exists(config.images.front())) throw IoError("input image not found: " + config.images.front().string());
  SweepResult result{axis, {}, {}, {}};
  std::vector<double> values;
  for (double v : config.sweep.values(axis)) {
    if (std::find(values.begin(), values.end(), v) != values.end()) {
      result.warnings.push_back("duplicate " + std::string(to_string(axis)) + " value " + fmt(v) + " ignored");
      continue;
    }
    values.push_back(v);
  }
  if (values.empty()) throw ContractError("sweep: no values for axis " + std::string(to_string(axis)));

  const Vocabulary vocab = load_vocab(config);
  const SurrogateEnsemble ens = build_ensemble(config.ensemble_seeds);
  const fs::path sweep_dir = config.output_dir / ("sweep_" + std::string(to_string(axis)));
  result.rows.resize(values.size());

  parallel_for(values.size(), config.jobs, [&](std::size_t i) {
    SweepRow& row = result.rows[i];
    row.axis_value = values[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      PipelineConfig c = config;
      c.images = {config.images.front()};
      c.output_dir = sweep_dir / ("row" + std::to_string(i));
      const double v = values[i];
      auto as_count = [&] {
        if (!(v >= 1.0) || v != std::floor(v)) throw ContractError("axis value " + fmt(v) + " is not a count >= 1");
        return static_cast<std::size_t>(v);
      };
      switch (axis) {
        case SweepAxis::epsilon:
          c.attack.epsilon = v;
          c.attack.step = std::min(c.attack.step, v);
          break;
        case SweepAxis::k: c.attack.k = as_count(); break;
        case SweepAxis::iterations: c.attack.iterations = as_count(); break;
        case SweepAxis::lambda_attn: c.attack.weights.lambda_attn = v; break;
        case SweepAxis::alpha_weight: c.attack.step = v / 255.0; break;
      }
      c.validate();
      const ImageOutcome o = run_image(c, ens, vocab, c.images.front(), progress);
      ReportWriter(c.output_dir).append(o, config_hash(c));
      row.mtr = o.record.mtr;
      row.avg_sim = o.record.avg_sim;
      row.mas = o.record.mas;
    } catch (const StageError& e) {
      row.error = e.stage();
    } catch (const std::exception& e) {
      row.error = "config";
    }
    row.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });

  fs::create_directories(config.output_dir);
  result.csv = config.output_dir / ("sweep_" + std::string(to_string(axis)) + ".csv");
  std::ofstream f(result.csv, std::ios::binary);
  if (!f) throw IoError("cannot write " + result.csv.string());
  f << "axis_value,mtr,avg_sim,mas,runtime_ms,error\n";
  for (const auto& r : result.rows) {
    f << fmt(r.axis_value) << ',' << fmt(r.mtr) << ',' << fmt(r.avg_sim) << ',' << fmt(r.mas) << ','
      << fmt(r.runtime_ms) << ',' << r.error << "\n";
  }
  return result;
}

AggregateReport summarize_report(const fs::path& jsonl, const MetricConfig& config) {
  std::ifstream f(jsonl, std::ios::binary);
  if (!f) throw IoError("cannot open report " + jsonl.string());
  std::vector<EvalRecord> records;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(f, line)) {
    const std::size_t start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      EvalRecord r;
      r.image_id = j.at("image_id").get<std::string>();
      r.modality = j.value("modality", std::string());
      r.mtr = j.at("mtr").get<double>();
      r.avg_sim = j.at("avg_sim").get<double>();
      r.mas = j.at("mas").get<double>();
      records.push_back(r);
    } catch (const json::exception& e) {
      throw ParseError(std::string("report: ") + e.what(), start);
    }
  }
  return aggregate(records, config);
}

}  // namespace focusleak
