#include "bpm/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <set>
#include <thread>

#include "json.hpp"

namespace bpm {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// configuration

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string penalty_name(PenaltyForm f) { return f == PenaltyForm::Corrected ? "corrected" : "printed"; }

}  // namespace

RunConfig read_run_config(const fs::path& path) {
  const auto text = read_text_file(path);
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  RunConfig cfg;
  try {
    cfg.stimulus_dir = resolve(base, j.at("stimuli").get<std::string>());
    cfg.reference_path = resolve(base, j.at("reference").get<std::string>());
    cfg.report_dir = resolve(base, j.value("output", std::string("report")));
    for (const auto& [id, dir] : j.at("models").items()) {
      cfg.models.push_back({id, resolve(base, dir.get<std::string>())});
    }
    cfg.layerwise = j.value("layerwise", false);
    cfg.root_seed = j.value("root_seed", std::uint64_t{0});
    cfg.workers = j.value("workers", 0u);
    if (j.contains("scoring")) {
      const auto& s = j["scoring"];
      cfg.scoring.lambda = s.value("lambda", cfg.scoring.lambda);
      cfg.scoring.active_unit_threshold = s.value("active_unit_threshold", cfg.scoring.active_unit_threshold);
      if (s.contains("distance_metric")) {
        const auto m = parse_metric(s["distance_metric"].get<std::string>());
        if (!m) throw Error(ErrorCode::InvalidConfig, "unknown distance_metric");
        cfg.scoring.distance_metric = *m;
      }
      if (s.contains("penalty")) {
        const auto p = s["penalty"].get<std::string>();
        if (p != "corrected" && p != "printed") throw Error(ErrorCode::InvalidConfig, "penalty must be corrected|printed");
        cfg.scoring.penalty = p == "corrected" ? PenaltyForm::Corrected : PenaltyForm::Printed;
      }
      if (s.contains("properties")) {
        cfg.scoring.property_subset.clear();
        for (const auto& name : s["properties"]) {
          const auto id = parse_property(name.get<std::string>());
          if (!id) throw Error(ErrorCode::InvalidConfig, "unknown property " + name.dump());
          cfg.scoring.property_subset.insert(*id);
        }
      }
    }
    if (j.contains("groupings")) {
      for (const auto& [grouping, members] : j["groupings"].items()) {
        for (const auto& [model, label] : members.items()) cfg.groupings[grouping][model] = label.get<std::string>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return cfg;
}

void validate_run_config(const RunConfig& cfg) {
  auto need = [](const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw Error(ErrorCode::InvalidConfig, what + " does not exist: " + p.string());
  };
  need(cfg.stimulus_dir, "stimulus directory");
  need(cfg.reference_path, "brain reference");
  if (cfg.models.empty()) throw Error(ErrorCode::InvalidConfig, "no models configured");
  for (const auto& m : cfg.models) need(m.dir, "container directory for " + m.model_id);
  validate_config(cfg.scoring, read_brain_reference(cfg.reference_path));
}

std::map<std::string, std::map<std::string, std::string>> read_groupings(const fs::path& path) {
  std::map<std::string, std::map<std::string, std::string>> out;
  auto lines = split(read_text_file(path), '\n');
  if (lines.empty()) return out;
  const auto header = split(trim(lines[0]), ',');
  if (header.empty() || header[0] != "model_id") throw Error(ErrorCode::ParseError, "groupings header must start with model_id");
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto line = trim(lines[r]);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw Error(ErrorCode::ParseError, "groupings row " + std::to_string(r + 1));
    for (std::size_t c = 1; c < f.size(); ++c) out[header[c]][f[0]] = std::string(trim(f[c]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// effect computation

std::map<PropertyId, StimulusSet> load_stimulus_manifests(const fs::path& stimulus_dir, const ScoringConfig& cfg,
                                                          std::vector<std::string>& warnings) {
  std::map<PropertyId, StimulusSet> out;
  for (PropertyId p : cfg.property_subset) {
    const auto manifest = stimulus_dir / std::string(property_name(p)) / "manifest.tsv";
    if (!fs::exists(manifest)) {
      warnings.push_back("no stimulus manifest for " + std::string(property_name(p)));
      continue;
    }
    try {
      out.emplace(p, load_manifest(manifest));
    } catch (const Error& e) {
      warnings.push_back(std::string(property_name(p)) + ": " + e.what());
    }
  }
  return out;
}

namespace {

EffectComputation effects_from_dir(const std::string& model_id, const std::optional<std::string>& tag,
                                   const fs::path& dir, const std::map<PropertyId, StimulusSet>& stimuli,
                                   const ScoringConfig& cfg) {
  std::map<PropertyId, PropertyInput> owned;
  std::vector<PropertyFailure> load_failures;
  for (PropertyId p : cfg.property_subset) {
    const auto set = stimuli.find(p);
    const auto cdir = dir / std::string(property_name(p));
    if (set == stimuli.end()) {
      load_failures.push_back({p, ErrorCode::MissingStimulus, "no stimulus manifest for this property"});
      continue;
    }
    if (!fs::exists(cdir / "meta")) continue;  // reported as MissingContainer below
    try {
      owned.emplace(p, PropertyInput{read_container(cdir), set->second});
    } catch (const Error& e) {
      load_failures.push_back({p, e.code(), e.what()});
    }
  }
  std::map<PropertyId, const PropertyInput*> inputs;
  for (const auto& [p, in] : owned) inputs[p] = &in;

  ScoringConfig remaining = cfg;
  for (const auto& f : load_failures) remaining.property_subset.erase(f.property);
  EffectComputation result = compute_effect_vector(model_id, tag, inputs, remaining);
  result.failures.insert(result.failures.end(), load_failures.begin(), load_failures.end());
  std::sort(result.failures.begin(), result.failures.end(),
            [](const PropertyFailure& a, const PropertyFailure& b) { return a.property < b.property; });
  return result;
}

}  // namespace

ModelEffects compute_model_effects(const ModelSource& model, const std::map<PropertyId, StimulusSet>& stimuli,
                                   const ScoringConfig& cfg, bool layerwise) {
  ModelEffects out{effects_from_dir(model.model_id, std::nullopt, model.dir, stimuli, cfg), {}};
  const auto layers_dir = model.dir / "layers";
  if (layerwise && fs::is_directory(layers_dir)) {
    std::vector<std::string> tags;
    for (const auto& entry : fs::directory_iterator(layers_dir)) {
      if (entry.is_directory()) tags.push_back(entry.path().filename().string());
    }
    std::sort(tags.begin(), tags.end(), [](const std::string& a, const std::string& b) {
      const auto da = parse_depth_percentile(a), db = parse_depth_percentile(b);
      if (da && db && *da != *db) return *da < *db;
      return a < b;
    });
    // the scene protocol reads the classifier output, which has no per-layer dumps
    ScoringConfig layer_cfg = cfg;
    layer_cfg.property_subset.erase(PropertyId::SceneIncongruence);
    for (const auto& tag : tags) {
      out.layers.push_back(effects_from_dir(model.model_id, tag, layers_dir / tag, stimuli, layer_cfg));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// assembly

BenchmarkReport assemble_report(std::vector<EffectVector> effects, std::map<std::string, std::vector<EffectVector>> layers,
                                const BrainReference& ref, const ScoringConfig& cfg,
                                const std::map<std::string, std::map<std::string, std::string>>& groupings) {
  validate_config(cfg, ref);
  BenchmarkReport r;
  r.scoring = cfg;
  r.reference = ref;
  r.reference_provenance = ref.provenance;
  r.groupings = groupings;
  r.effects = std::move(effects);
  r.layer_effects = std::move(layers);

  std::vector<ScoreCard> cards;
  for (const auto& v : r.effects) {
    if (scored_properties(v, cfg).empty()) {
      r.warnings.push_back(v.model_id() + ": no scored properties, excluded from ranking");
      continue;
    }
    cards.push_back(score_model(v, ref, cfg));
  }
  r.ranking = rank_models(std::move(cards));

  if (r.effects.size() >= 2) {
    const std::vector<PropertyId> subset(cfg.property_subset.begin(), cfg.property_subset.end());
    const auto matrix = build_effect_matrix(r.effects, ref, subset);
    try {
      r.embedding = pca_embed(matrix);
      r.embedding_labels = matrix.labels;
    } catch (const Error& e) {
      r.warnings.push_back(std::string("embedding skipped: ") + e.what());
    }

    for (const auto& [grouping, members] : groupings) {
      std::vector<std::vector<double>> points;
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < r.effects.size(); ++i) {
        const auto it = members.find(r.effects[i].model_id());
        if (it == members.end()) continue;
        points.push_back(matrix.values[i]);
        labels.push_back(it->second);
      }
      try {
        const double db = davies_bouldin(points, labels);
        r.clustering.push_back({grouping, db, clustering_strength(db), points.size()});
      } catch (const Error& e) {
        r.warnings.push_back("clustering '" + grouping + "' skipped: " + e.what());
      }
    }
  } else {
    r.warnings.push_back("embedding skipped: needs at least 2 models");
  }

  if (r.embedding) {
    for (const auto& [model, vectors] : r.layer_effects) {
      if (vectors.empty()) continue;
      // columns a layer cannot provide are set to the embedding mean, i.e.
      // they do not move the projection
      std::vector<EffectVector> filled = vectors;
      std::set<std::string> imputed;
      for (auto& v : filled) {
        for (std::size_t j = 0; j < r.embedding->columns.size(); ++j) {
          const PropertyId p = r.embedding->columns[j];
          if (v.has(p)) continue;
          v.set(p, r.embedding->means[j]);
          imputed.insert(std::string(property_name(p)));
        }
      }
      if (!imputed.empty()) {
        std::string names;
        for (const auto& n : imputed) names += (names.empty() ? "" : ", ") + n;
        r.warnings.push_back(model + " trajectory: " + names + " not measured per layer, held at the embedding mean");
      }
      try {
        r.trajectories[model] = layer_trajectory(filled, *r.embedding);
      } catch (const Error& e) {
        r.warnings.push_back(model + " trajectory skipped: " + e.what());
      }
    }
  }
  return r;
}

BenchmarkReport run_benchmark(const RunConfig& cfg) {
  validate_run_config(cfg);
  const auto ref = read_brain_reference(cfg.reference_path);
  std::vector<std::string> warnings;
  const auto stimuli = load_stimulus_manifests(cfg.stimulus_dir, cfg.scoring, warnings);

  // models in parallel; results gathered in configuration order
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::max(1u, cfg.workers == 0 ? hw : cfg.workers);
  std::vector<std::optional<ModelEffects>> per_model(cfg.models.size());
  for (std::size_t start = 0; start < cfg.models.size(); start += workers) {
    std::vector<std::future<ModelEffects>> batch;
    const std::size_t end = std::min(cfg.models.size(), start + workers);
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, compute_model_effects, std::cref(cfg.models[i]),
                                 std::cref(stimuli), std::cref(cfg.scoring), cfg.layerwise));
    }
    for (std::size_t i = start; i < end; ++i) per_model[i] = batch[i - start].get();
  }

  std::vector<EffectVector> effects;
  std::map<std::string, std::vector<EffectVector>> layers;
  std::vector<SoftFailure> failures;
  for (const auto& slot : per_model) {
    const ModelEffects& m = *slot;
    effects.push_back(m.final_layer.vector);
    for (const auto& f : m.final_layer.failures) {
      failures.push_back({m.final_layer.vector.model_id(), "", f.property, f.code, f.message});
    }
    for (const auto& l : m.layers) {
      layers[l.vector.model_id()].push_back(l.vector);
      for (const auto& f : l.failures) {
        failures.push_back({l.vector.model_id(), l.vector.layer_tag().value_or(""), f.property, f.code, f.message});
      }
    }
  }

  auto report = assemble_report(std::move(effects), std::move(layers), ref, cfg.scoring, cfg.groupings);
  report.root_seed = cfg.root_seed;
  report.failures = std::move(failures);
  report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
  return report;
}

// ---------------------------------------------------------------------------
// emission

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool right = false) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return right ? fill + s : s + fill;
}

std::string group_of(const BenchmarkReport& r, const std::string& model) {
  if (r.groupings.empty()) return "";
  const auto& first = r.groupings.begin()->second;
  const auto it = first.find(model);
  return it == first.end() ? "" : it->second;
}

}  // namespace

std::string format_ranking_csv(const std::vector<RankedRow>& ranking) {
  std::string out = "rank,model_id,bpm,agreement,l1_similarity,n_scored\n";
  for (const auto& row : ranking) {
    out += std::to_string(row.rank) + "," + row.card.model_id + "," + format_double(row.card.bpm) + "," +
           std::to_string(row.card.agreement) + "," + format_double(row.card.l1_similarity) + "," +
           std::to_string(row.card.n_scored) + "\n";
  }
  return out;
}

std::string format_ranking_table(const std::vector<RankedRow>& ranking) {
  std::size_t name_w = std::string("Model").size();
  for (const auto& row : ranking) name_w = std::max(name_w, row.card.model_id.size());
  std::string out = pad("Rank", 5, true) + "  " + pad("Model", name_w) + "  " + pad("BPM", 7, true) + "  " +
                    pad("Agreement", 9, true) + "  " + pad("L1 Similarity", 13, true) + "\n";
  for (const auto& row : ranking) {
    out += pad(std::to_string(row.rank), 5, true) + "  " + pad(row.card.model_id, name_w) + "  " +
           pad(fixed(row.card.bpm), 7, true) + "  " +
           pad(std::to_string(row.card.agreement) + "/" + std::to_string(row.card.n_scored), 9, true) + "  " +
           pad(fixed(row.card.l1_similarity), 13, true) + "\n";
  }
  return out;
}

std::string format_presence_csv(const std::vector<EffectVector>& effects) {
  std::string out = "model_id";
  for (PropertyId p : all_properties()) out += "," + std::string(property_name(p));
  out += "\n";
  for (const auto& v : effects) {
    out += v.model_id();
    for (const auto& present : binarize(v)) out += present ? (*present ? ",1" : ",0") : ",";
    out += "\n";
  }
  return out;
}

std::string format_presence_table(const std::vector<EffectVector>& effects) {
  // one column per property, numbered in property order; '#' present, '.' absent, ' ' missing
  std::size_t name_w = std::string("Model").size();
  for (const auto& v : effects) name_w = std::max(name_w, v.model_id().size());
  std::string out;
  for (PropertyId p : all_properties()) {
    out += "# " + pad(std::to_string(property_index(p) + 1), 2, true) + " " + std::string(property_name(p)) + "\n";
  }
  out += pad("Model", name_w) + " ";
  for (std::size_t i = 1; i <= kPropertyCount; ++i) out += pad(std::to_string(i), 3, true);
  out += "\n";
  for (const auto& v : effects) {
    out += pad(v.model_id(), name_w) + " ";
    for (const auto& present : binarize(v)) out += present ? (*present ? "  #" : "  .") : "   ";
    out += "\n";
  }
  return out;
}

void emit_report(const BenchmarkReport& r, const fs::path& dir, unsigned parts) {
  fs::create_directories(dir);

  std::vector<EffectVector> all_effects = r.effects;
  for (const auto& [model, vectors] : r.layer_effects) all_effects.insert(all_effects.end(), vectors.begin(), vectors.end());
  write_effect_vectors(dir / "effects.csv", all_effects);

  if (parts & kReportScores) {
    write_text_file(dir / "ranking.csv", format_ranking_csv(r.ranking));
    write_text_file(dir / "ranking.txt", format_ranking_table(r.ranking));
    write_text_file(dir / "presence.csv", format_presence_csv(r.effects));
    write_text_file(dir / "presence.txt", format_presence_table(r.effects));
  }

  if (parts & kReportScores) {
    std::string out = "model_id";
    for (PropertyId p : all_properties()) out += "," + std::string(property_name(p));
    out += "\n";
    for (const auto& row : r.ranking) {
      out += row.card.model_id;
      for (const auto& d : row.card.distance) out += "," + (d ? format_double(*d) : std::string());
      out += "\n";
    }
    write_text_file(dir / "distances.csv", out);
  }

  if (parts & kReportAnalysis) {
    std::string out = "label,pc1,pc2,group,depth_percentile\n";
    if (r.embedding) {
      for (std::size_t i = 0; i < r.embedding_labels.size(); ++i) {
        const auto& label = r.embedding_labels[i];
        const bool brain = i + 1 == r.embedding_labels.size();
        out += label + "," + format_double(r.embedding->coordinates[i].pc1) + "," +
               format_double(r.embedding->coordinates[i].pc2) + "," + (brain ? "brain" : group_of(r, label)) + ",\n";
      }
      for (const auto& [model, path] : r.trajectories) {
        for (const auto& pt : path) {
          out += model + "@" + pt.layer_tag + "," + format_double(pt.coords.pc1) + "," + format_double(pt.coords.pc2) +
                 "," + group_of(r, model) + "," + format_double(pt.depth_percentile) + "\n";
        }
      }
    }
    write_text_file(dir / "embedding.csv", out);
  }

  if (parts & kReportAnalysis) {
    std::string out = "model_id,layer_tag,depth_percentile,pc1,pc2,marker\n";
    for (const auto& [model, path] : r.trajectories) {
      for (const auto& pt : path) {
        out += model + "," + pt.layer_tag + "," + format_double(pt.depth_percentile) + "," +
               format_double(pt.coords.pc1) + "," + format_double(pt.coords.pc2) + "," +
               (pt.first ? "first" : pt.last ? "last" : "") + "\n";
      }
    }
    write_text_file(dir / "trajectories.csv", out);
  }

  if (parts & kReportAnalysis) {
    std::string out = "grouping,n_models,davies_bouldin,clustering_strength\n";
    for (const auto& c : r.clustering) {
      out += c.grouping + "," + std::to_string(c.n_models) + "," + format_double(c.davies_bouldin) + "," +
             format_double(c.strength) + "\n";
    }
    write_text_file(dir / "clustering.csv", out);
  }

  {
    std::string out = "model_id,layer_tag,property,error,message\n";
    for (const auto& f : r.failures) {
      std::string msg = f.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out += f.model_id + "," + f.layer_tag + "," + std::string(property_name(f.property)) + "," +
             std::string(to_string(f.code)) + "," + msg + "\n";
    }
    write_text_file(dir / "failures.csv", out);
  }

  ordered_json summary;
  summary["root_seed"] = r.root_seed;
  summary["lambda"] = r.scoring.lambda;
  summary["penalty"] = penalty_name(r.scoring.penalty);
  summary["distance_metric"] = std::string(metric_name(r.scoring.distance_metric));
  summary["active_unit_threshold"] = r.scoring.active_unit_threshold;
  summary["properties"] = ordered_json::array();
  for (PropertyId p : r.scoring.property_subset) summary["properties"].push_back(std::string(property_name(p)));
  summary["reference_provenance"] = r.reference_provenance;
  summary["models"] = ordered_json::array();
  for (const auto& row : r.ranking) {
    summary["models"].push_back({{"rank", row.rank},
                                 {"model_id", row.card.model_id},
                                 {"bpm", row.card.bpm},
                                 {"agreement", row.card.agreement},
                                 {"l1_similarity", row.card.l1_similarity},
                                 {"n_scored", row.card.n_scored}});
  }
  if (r.embedding) {
    summary["embedding"]["columns"] = ordered_json::array();
    for (PropertyId p : r.embedding->columns) summary["embedding"]["columns"].push_back(std::string(property_name(p)));
    summary["embedding"]["explained_variance_ratio"] = r.embedding->explained_variance_ratio;
    summary["embedding"]["loadings"] = r.embedding->basis;
    summary["embedding"]["means"] = r.embedding->means;
  }
  summary["soft_failures"] = r.failures.size();
  summary["warnings"] = r.warnings;
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace bpm
