// bpm: command line front end for the benchmark.
//
//   bpm gen-stimuli --property all --seed 7 --out stimuli [--assets scenes/]
//   bpm validate    --stimuli stimuli --model models/resnet
//   bpm effects     --stimuli stimuli --model models/resnet --model-id resnet --out effects.csv
//   bpm score       --effects effects.csv --reference brain.ref --out report/
//   bpm embed       --effects effects.csv --reference brain.ref --groups groups.csv --out report/
//   bpm report      (score + embed)
//   bpm all         --config run.json
//
// Exit status: 0 ok, 1 hard error, 2 finished with soft failures.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bpm/activation_store.hpp"
#include "bpm/pipeline.hpp"
#include "bpm/stimulus.hpp"
#include "synthetic_model.hpp"

namespace fs = std::filesystem;
using namespace bpm;

namespace {

std::set<PropertyId> parse_property_list(const std::vector<std::string>& names) {
  std::set<PropertyId> out;
  for (const auto& n : names) {
    if (n == "all") {
      out.insert(all_properties().begin(), all_properties().end());
      continue;
    }
    const auto id = parse_property(n);
    if (!id) throw Error(ErrorCode::InvalidConfig, "unknown property '" + n + "'");
    out.insert(*id);
  }
  return out;
}

PenaltyForm parse_penalty(const std::string& s) {
  if (s == "corrected") return PenaltyForm::Corrected;
  if (s == "printed") return PenaltyForm::Printed;
  throw Error(ErrorCode::InvalidConfig, "penalty must be 'corrected' or 'printed'");
}

DistanceMetric parse_metric_or_throw(const std::string& s) {
  const auto m = parse_metric(s);
  if (!m) throw Error(ErrorCode::InvalidConfig, "unknown metric '" + s + "'");
  return *m;
}

void print_failures(const std::vector<PropertyFailure>& failures, const std::string& who) {
  for (const auto& f : failures) {
    std::fprintf(stderr, "warning: %s %s: %s\n", who.c_str(), std::string(property_name(f.property)).c_str(),
                 f.message.c_str());
  }
}

struct Options {
  // gen-stimuli
  std::vector<std::string> properties{"all"};
  std::uint64_t seed = 0;
  int canvas = 224;
  int count = 20;
  int background = 128;
  std::string out;
  std::string assets;
  // validate / effects
  std::string stimuli;
  std::string model;
  std::string model_id;
  std::string metric = "euclidean";
  double threshold = 1e-6;
  bool layerwise = false;
  // report
  std::vector<std::string> effects;
  std::string reference;
  std::string groups;
  double lambda = 2.0;
  std::string penalty = "corrected";
  // run
  std::string config;
  // synth
  int units = 64;
  int depth = 4;
  int toy_objects = 8;
};

int cmd_gen(const Options& o) {
  const auto props = parse_property_list(o.properties);
  int status = 0;
  nlohmann::ordered_json info;
  info["root_seed"] = o.seed;
  info["canvas_px"] = o.canvas;
  info["count"] = o.count;
  info["background_gray"] = o.background;
  info["weber_start"] = 16.0 * o.canvas / 224.0;
  for (PropertyId p : props) {
    StimulusSpec spec;
    spec.property = p;
    spec.canvas_px = o.canvas;
    spec.count = o.count;
    spec.background_gray = o.background;
    // bar series keeps its 224 px proportions on other canvases
    spec.weber_start = 16.0 * o.canvas / 224.0;
    spec.seed = property_seed(o.seed, p);
    if (!o.assets.empty()) spec.assets_dir = o.assets;
    const std::string name(property_name(p));
    if (p == PropertyId::SceneIncongruence && !spec.assets_dir) {
      std::fprintf(stderr, "warning: skipping %s: needs --assets (object cutouts and scenes)\n", name.c_str());
      if (props.size() == 1) throw Error(ErrorCode::MissingAssets, "scene_incongruence needs --assets");
      status = 2;
      continue;
    }
    const auto set = generate_stimulus_set(spec);
    write_stimulus_set(set, o.out);
    info["properties"][name] = {{"seed", spec.seed}, {"stimuli", set.images.size()}};
    std::printf("%-26s %4zu stimuli\n", name.c_str(), set.images.size());
  }
  write_text_file(fs::path(o.out) / "generation.json", info.dump(2) + "\n");
  return status;
}

int cmd_validate(const Options& o) {
  int bad = 0;
  for (PropertyId p : all_properties()) {
    const std::string name(property_name(p));
    const auto manifest = fs::path(o.stimuli) / name / "manifest.tsv";
    if (!fs::exists(manifest)) continue;
    try {
      const auto set = load_manifest(manifest);
      std::string note = std::to_string(set.manifest.size()) + " stimuli";
      if (!o.model.empty()) {
        const auto dir = fs::path(o.model) / name;
        if (!fs::exists(dir / "meta")) {
          note += ", no container";
        } else {
          align(read_container(dir), set);
          note += ", container aligned";
        }
      }
      std::printf("ok    %-26s %s\n", name.c_str(), note.c_str());
    } catch (const Error& e) {
      std::printf("FAIL  %-26s %s\n", name.c_str(), e.what());
      ++bad;
    }
  }
  return bad ? 1 : 0;
}

ScoringConfig scoring_from(const Options& o) {
  ScoringConfig cfg;
  cfg.lambda = o.lambda;
  cfg.distance_metric = parse_metric_or_throw(o.metric);
  cfg.active_unit_threshold = o.threshold;
  cfg.property_subset = parse_property_list(o.properties);
  cfg.penalty = parse_penalty(o.penalty);
  return cfg;
}

int cmd_effects(const Options& o) {
  const auto cfg = scoring_from(o);
  std::vector<std::string> warnings;
  const auto stimuli = load_stimulus_manifests(o.stimuli, cfg, warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const std::string id = o.model_id.empty() ? fs::path(o.model).filename().string() : o.model_id;
  const auto effects = compute_model_effects({id, o.model}, stimuli, cfg, o.layerwise);
  std::vector<EffectVector> rows{effects.final_layer.vector};
  bool soft = !effects.final_layer.failures.empty();
  print_failures(effects.final_layer.failures, id);
  for (const auto& l : effects.layers) {
    rows.push_back(l.vector);
    print_failures(l.failures, id + "@" + *l.vector.layer_tag());
    soft = soft || !l.failures.empty();
  }
  write_effect_vectors(o.out, rows);
  std::printf("%s: %zu/%zu properties measured -> %s\n", id.c_str(), effects.final_layer.vector.present_count(),
              cfg.property_subset.size(), o.out.c_str());
  return soft ? 2 : 0;
}

int finish(const BenchmarkReport& r, const fs::path& out, unsigned parts = kReportAll) {
  emit_report(r, out, parts);
  if (parts & kReportScores) std::cout << format_ranking_table(r.ranking);
  for (const auto& c : r.clustering) {
    std::printf("clustering %-16s DB %.4f  strength %.4f  (%zu models)\n", c.grouping.c_str(), c.davies_bouldin,
                c.strength, c.n_models);
  }
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("report written to %s\n", out.string().c_str());
  return r.failures.empty() ? 0 : 2;
}

int cmd_report(const Options& o, unsigned parts) {
  const auto cfg = scoring_from(o);
  const auto ref = read_brain_reference(o.reference);
  std::vector<EffectVector> finals;
  std::map<std::string, std::vector<EffectVector>> layers;
  for (const auto& path : o.effects) {
    for (auto& v : read_effect_vectors(path)) {
      if (v.layer_tag() && !v.layer_tag()->empty()) {
        layers[v.model_id()].push_back(std::move(v));
      } else {
        finals.push_back(std::move(v));
      }
    }
  }
  const auto groupings = o.groups.empty() ? decltype(read_groupings(o.groups)){} : read_groupings(o.groups);
  auto report = assemble_report(std::move(finals), std::move(layers), ref, cfg, groupings);
  report.root_seed = o.seed;
  return finish(report, o.out, parts);
}

int cmd_run(const Options& o, const CLI::App& sub) {
  RunConfig cfg = read_run_config(o.config);
  if (sub.count("--out")) cfg.report_dir = o.out;
  if (sub.count("--stimuli")) cfg.stimulus_dir = o.stimuli;
  if (sub.count("--reference")) cfg.reference_path = o.reference;
  if (sub.count("--groups")) cfg.groupings = read_groupings(o.groups);
  if (sub.count("--seed")) cfg.root_seed = o.seed;
  if (sub.count("--threshold")) cfg.scoring.active_unit_threshold = o.threshold;
  if (sub.count("--properties")) cfg.scoring.property_subset = parse_property_list(o.properties);
  if (sub.count("--lambda")) cfg.scoring.lambda = o.lambda;
  if (sub.count("--penalty")) cfg.scoring.penalty = parse_penalty(o.penalty);
  if (sub.count("--metric")) cfg.scoring.distance_metric = parse_metric_or_throw(o.metric);
  if (sub.count("--layerwise")) cfg.layerwise = o.layerwise;
  const auto report = run_benchmark(cfg);
  for (const auto& f : report.failures) {
    std::fprintf(stderr, "warning: %s%s%s %s: %s\n", f.model_id.c_str(), f.layer_tag.empty() ? "" : "@",
                 f.layer_tag.c_str(), std::string(property_name(f.property)).c_str(), f.message.c_str());
  }
  return finish(report, cfg.report_dir);
}

int cmd_synth(const Options& o) {
  if (!o.assets.empty()) {
    synth::write_toy_scene_assets(o.assets, o.toy_objects, o.seed);
    std::printf("toy scene assets -> %s\n", o.assets.c_str());
    if (o.stimuli.empty()) return 0;
  }
  synth::SyntheticModel m;
  m.model_id = o.model_id.empty() ? fs::path(o.out).filename().string() : o.model_id;
  m.seed = o.seed;
  m.units = o.units;
  m.depth = o.depth;
  m.layerwise = o.layerwise;
  const int n = synth::write_synthetic_model(m, o.stimuli, o.out);
  std::printf("%s: %d containers -> %s\n", m.model_id.c_str(), n, o.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brain-like property benchmark for vision models"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-stimuli", "Generate procedural stimulus sets");
  gen->add_option("--property", o.properties, "Property names or 'all'")->delimiter(',');
  gen->add_option("--seed", o.seed, "Root seed");
  gen->add_option("--canvas", o.canvas, "Canvas size in pixels");
  gen->add_option("--count", o.count, "Groups / shapes per property");
  gen->add_option("--background", o.background, "Background gray level");
  gen->add_option("--assets", o.assets, "Scene asset directory (assets.tsv)");
  gen->add_option("--out", o.out, "Output directory")->required();

  auto* val = app.add_subcommand("validate", "Check manifests, images and container alignment");
  val->add_option("--stimuli", o.stimuli, "Stimulus directory")->required();
  val->add_option("--model", o.model, "Model container directory");

  auto* eff = app.add_subcommand("effects", "Compute effect strengths for one model");
  eff->add_option("--stimuli", o.stimuli, "Stimulus directory")->required();
  eff->add_option("--model", o.model, "Model container directory")->required();
  eff->add_option("--model-id", o.model_id, "Model id (default: directory name)");
  eff->add_option("--out", o.out, "Effects CSV")->required();
  eff->add_option("--metric", o.metric, "euclidean | cityblock | one_minus_pearson");
  eff->add_option("--threshold", o.threshold, "Active unit threshold");
  eff->add_option("--properties", o.properties, "Property subset")->delimiter(',');
  eff->add_flag("--layerwise", o.layerwise, "Also compute layers/<depth>/ containers");

  auto add_scoring = [&](CLI::App* sub, const std::string& what) {
    sub->add_option("--effects", o.effects, "Effects CSV files")->required()->delimiter(',');
    sub->add_option("--reference", o.reference, "Brain reference file")->required();
    sub->add_option("--out", o.out, what)->required();
    sub->add_option("--groups", o.groups, "Groupings CSV (model_id,<grouping>...)");
    sub->add_option("--lambda", o.lambda, "Penalty weight for absent properties");
    sub->add_option("--penalty", o.penalty, "corrected | printed");
    sub->add_option("--properties", o.properties, "Property subset")->delimiter(',');
    sub->add_option("--seed", o.seed, "Root seed to record in the summary");
  };
  auto* score = app.add_subcommand("score", "BPM, agreement and L1 ranking of effect vectors");
  add_scoring(score, "Report directory");
  auto* embed = app.add_subcommand("embed", "PCA embedding, clustering strength and layer trajectories");
  add_scoring(embed, "Report directory");
  auto* rep = app.add_subcommand("report", "score + embed");
  add_scoring(rep, "Report directory");

  auto* run = app.add_subcommand("all", "Full run from a JSON configuration");
  run->alias("run");
  run->add_option("--config", o.config, "Run configuration")->required();
  run->add_option("--out", o.out, "Override report directory");
  run->add_option("--stimuli", o.stimuli, "Override stimulus directory");
  run->add_option("--reference", o.reference, "Override brain reference");
  run->add_option("--groups", o.groups, "Override groupings (CSV)");
  run->add_option("--seed", o.seed, "Override recorded root seed");
  run->add_option("--threshold", o.threshold, "Override active unit threshold");
  run->add_option("--properties", o.properties, "Override property subset")->delimiter(',');
  run->add_option("--lambda", o.lambda, "Override lambda");
  run->add_option("--penalty", o.penalty, "Override penalty form");
  run->add_option("--metric", o.metric, "Override distance metric");
  run->add_flag("--layerwise", o.layerwise, "Layerwise analysis");

  auto* tmpl = app.add_subcommand("reference-template", "Print an empty brain reference file");

  auto* syn = app.add_subcommand("synth", "Write a random-feature demo model (or toy scene assets)");
  syn->add_option("--stimuli", o.stimuli, "Stimulus directory");
  syn->add_option("--out", o.out, "Model directory");
  syn->add_option("--model-id", o.model_id, "Model id");
  syn->add_option("--seed", o.seed, "Weight seed");
  syn->add_option("--units", o.units, "Units per layer");
  syn->add_option("--depth", o.depth, "Hidden layers");
  syn->add_flag("--layerwise", o.layerwise, "Also write layers/<depth>/");
  syn->add_option("--toy-assets", o.assets, "Write toy scene assets to this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(o);
    if (*val) return cmd_validate(o);
    if (*eff) return cmd_effects(o);
    if (*score) return cmd_report(o, kReportScores);
    if (*embed) return cmd_report(o, kReportAnalysis);
    if (*rep) return cmd_report(o, kReportAll);
    if (*run) return cmd_run(o, *run);
    if (*tmpl) {
      std::cout << brain_reference_template();
      return 0;
    }
    if (*syn) return cmd_synth(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
