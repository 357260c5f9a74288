// mlfa: keyword-spotting workbench. Subcommands: synth, train, eval, ablate,
// align. JSON config files mirror the library config structs; command-line
// flags override config-file values; every run is deterministic per seed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlfa/datakit.hpp"
#include "mlfa/dsp.hpp"
#include "mlfa/errors.hpp"
#include "mlfa/evalkit.hpp"
#include "mlfa/model.hpp"
#include "mlfa/trainkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw mlfa::IoError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw mlfa::BadConfig("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw mlfa::BadConfig("config root must be a JSON object: " + path);
  return j;
}

template <typename T>
T config_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw mlfa::BadConfig("config key '" + key + "' has the wrong type");
  }
}

/// Keys mirror loss::FaConfig fields.
void apply_fa_config(const json& j, mlfa::loss::FaConfig& fa) {
  for (const auto& [key, v] : j.items()) {
    if (key == "gamma")
      fa.gamma = config_as<double>(v, key);
    else if (key == "delta")
      fa.delta = config_as<double>(v, key);
    else if (key == "alpha")
      fa.alpha = config_as<double>(v, key);
    else if (key == "lambda")
      fa.lambda = config_as<double>(v, key);
    else if (key == "epsilon")
      fa.epsilon = config_as<double>(v, key);
    else
      throw mlfa::BadConfig("unknown config key: fa." + key);
  }
}

/// Keys mirror train::TrainConfig fields.
void apply_train_config(const json& j, mlfa::train::TrainConfig& cfg) {
  for (const auto& [key, v] : j.items()) {
    if (key == "epochs")
      cfg.epochs = config_as<int>(v, key);
    else if (key == "learning_rate")
      cfg.learning_rate = config_as<double>(v, key);
    else if (key == "batch_size")
      cfg.batch_size = config_as<int>(v, key);
    else if (key == "ucl_minibatch")
      cfg.ucl_minibatch = config_as<int>(v, key);
    else if (key == "seed")
      cfg.seed = config_as<uint64_t>(v, key);
    else if (key == "use_pcl")
      cfg.use_pcl = config_as<bool>(v, key);
    else if (key == "use_ucl")
      cfg.use_ucl = config_as<bool>(v, key);
    else if (key == "use_fa")
      cfg.use_fa = config_as<bool>(v, key);
    else if (key == "fa") {
      if (!v.is_object()) throw mlfa::BadConfig("config key 'fa' must be an object");
      apply_fa_config(v, cfg.fa);
    } else {
      throw mlfa::BadConfig("unknown config key: " + key);
    }
  }
}

/// Keys mirror data::SynthSpec fields.
void apply_synth_config(const json& j, mlfa::data::SynthSpec& spec) {
  for (const auto& [key, v] : j.items()) {
    if (key == "keywords")
      spec.keywords = config_as<std::vector<std::string>>(v, key);
    else if (key == "phoneme_ms_min")
      spec.phoneme_ms_min = config_as<double>(v, key);
    else if (key == "phoneme_ms_max")
      spec.phoneme_ms_max = config_as<double>(v, key);
    else if (key == "snr_db")
      spec.snr_db = config_as<double>(v, key);
    else if (key == "clip_ms")
      spec.clip_ms = config_as<int>(v, key);
    else if (key == "seed")
      spec.seed = config_as<uint64_t>(v, key);
    else
      throw mlfa::BadConfig("unknown config key: " + key);
  }
}

std::vector<std::string> read_keyword_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw mlfa::IoError("cannot open keyword file: " + path);
  std::vector<std::string> kws;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto end = line.find_last_not_of(" \t");
    kws.push_back(line.substr(start, end - start + 1));
  }
  return kws;
}

void report_metrics(const mlfa::eval::MetricReport& r, std::ostream& os) {
  os << "auc=" << (r.has_auc ? std::to_string(r.auc) : "n/a")
     << " eer=" << (r.has_auc ? std::to_string(r.eer) : "n/a")
     << " far@" << r.threshold << "=" << (r.has_far ? std::to_string(r.far_at_threshold) : "n/a")
     << " acc_n=" << (r.has_acc ? std::to_string(r.acc_n) : "n/a") << " (" << r.n_pos
     << " pos, " << r.n_neg << " neg)\n";
}

/// Score a dataset with a model, fill in closed-set accuracy, write scores CSV
/// + metrics JSON, and return the report.
mlfa::eval::MetricReport evaluate_dataset(const mlfa::model::System& sys,
                                          const mlfa::data::Dataset& ds, double threshold,
                                          const std::string& scores_path,
                                          const std::string& metrics_path) {
  const mlfa::Matrix all = mlfa::eval::score_all_pairs(sys, ds);
  std::vector<mlfa::eval::TrialScore> scores;
  scores.reserve(ds.trials.size());
  for (const auto& t : ds.trials)
    scores.push_back({ds.clip_ids[t.clip], ds.keywords[t.kw], all(t.clip, t.kw), t.match});

  auto report = mlfa::eval::compute_metrics(scores, threshold);
  const auto groups = mlfa::eval::candidate_groups(all, ds);
  if (!groups.empty() && ds.keywords.size() >= 2) {
    report.has_acc = true;
    report.acc_n = mlfa::eval::acc_n(groups);
    report.n_groups = static_cast<int>(groups.size());
  }
  if (!scores_path.empty()) mlfa::eval::write_scores_csv(scores_path, scores);
  if (!metrics_path.empty()) mlfa::eval::write_metrics_json(report, metrics_path);
  return report;
}

void emit_figures(const mlfa::model::System& sys, const mlfa::data::Dataset& ds,
                  const std::string& dir, int max_clips) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw mlfa::IoError("cannot create figure dir: " + dir);

  // Cosine similarity of pooled audio embeddings, one clip per keyword.
  std::vector<int> sample;
  for (int k = 0; k < static_cast<int>(ds.keywords.size()); ++k) {
    for (int c = 0; c < static_cast<int>(ds.clip_ids.size()); ++c) {
      if (ds.clip_kw[c] == k) {
        sample.push_back(c);
        break;
      }
    }
    if (static_cast<int>(sample.size()) >= max_clips) break;
  }
  if (sample.size() >= 2) {
    mlfa::Matrix pooled(static_cast<int>(sample.size()), sys.cfg.emb_dim);
    std::vector<std::string> labels;
    for (size_t i = 0; i < sample.size(); ++i) {
      const mlfa::Matrix e = mlfa::eval::pooled_audio_embedding(sys, ds.clip_logmel[sample[i]]);
      for (int c = 0; c < e.cols(); ++c) pooled(static_cast<int>(i), c) = e(0, c);
      labels.push_back(ds.clip_ids[sample[i]]);
    }
    mlfa::eval::emit_similarity_matrix(mlfa::eval::cosine_matrix(pooled, pooled), labels,
                                       dir + "/similarity");
  }

  // Phoneme-to-frame attention for the first matched trial.
  for (const auto& t : ds.trials) {
    if (t.match != 1) continue;
    const auto& ids = ds.keyword_phonemes[t.kw];
    const mlfa::Matrix attn = mlfa::model::attention_for_pair(sys, ds.clip_logmel[t.clip], ids);
    std::vector<std::string> phon;
    for (int id : ids) phon.push_back(mlfa::data::phoneme_name(id));
    mlfa::eval::emit_alignment_heatmap(attn, phon, dir + "/alignment");
    break;
  }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct TrainFlags {
  std::string corpus;
  std::string config_path;
  std::string out = "model.ckpt";
  std::string log_path = "train_log.jsonl";
  int epochs = 0;
  double lr = 0.0;
  int batch = 0;
  uint64_t seed = 0;
};

void add_train_overrides(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file (TrainConfig keys)");
  cmd->add_option("--epochs", f.epochs, "override: training epochs");
  cmd->add_option("--lr", f.lr, "override: Adam learning rate");
  cmd->add_option("--batch", f.batch, "override: batch size");
  cmd->add_option("--seed", f.seed, "override: master seed");
}

mlfa::train::TrainConfig resolve_train_config(const CLI::App* cmd, const TrainFlags& f) {
  mlfa::train::TrainConfig cfg;
  if (!f.config_path.empty()) apply_train_config(load_config_file(f.config_path), cfg);
  if (cmd->count("--epochs")) cfg.epochs = f.epochs;
  if (cmd->count("--lr")) cfg.learning_rate = f.lr;
  if (cmd->count("--batch")) cfg.batch_size = f.batch;
  if (cmd->count("--seed")) cfg.seed = f.seed;
  return cfg;
}

mlfa::train::TrainResult run_training(const mlfa::train::TrainConfig& cfg,
                                      const mlfa::data::Dataset& ds, const std::string& ckpt_path,
                                      const std::string& log_path) {
  std::ofstream log(log_path);
  if (!log) throw mlfa::IoError("cannot write log: " + log_path);
  auto result = mlfa::train::train(cfg, ds, {}, &log);
  mlfa::train::save_checkpoint(result.checkpoint, ckpt_path);
  std::cout << "parameters: " << mlfa::train::total_param_count(result.checkpoint) << "\n";
  if (!result.epoch_log.empty())
    std::cout << "final loss: " << result.epoch_log.back().l_total << "\n";
  std::cout << "checkpoint: " << ckpt_path << "\n";
  return result;
}

int cmd_synth(const CLI::App* cmd, const std::string& out_dir, const std::string& config_path,
              const std::string& keyword_file, int n_per_kw, double neg_ratio, double hard_frac,
              uint64_t seed, double snr_db) {
  mlfa::data::SynthSpec spec;
  if (!config_path.empty()) apply_synth_config(load_config_file(config_path), spec);
  if (!keyword_file.empty()) spec.keywords = read_keyword_file(keyword_file);
  if (spec.keywords.empty()) spec.keywords = mlfa::data::default_keywords();
  if (cmd->count("--seed")) spec.seed = seed;
  if (cmd->count("--snr-db")) spec.snr_db = snr_db;

  mlfa::data::write_corpus(out_dir, spec, n_per_kw, neg_ratio, hard_frac,
                           mlfa::data::Lexicon::builtin());
  const auto trials = mlfa::data::read_trials_csv(out_dir + "/trials.csv");
  std::cout << "corpus: " << out_dir << " (" << spec.keywords.size() << " keywords, "
            << trials.size() << " trials)\n";
  return 0;
}

int cmd_train(const CLI::App* cmd, const TrainFlags& f) {
  const auto cfg = resolve_train_config(cmd, f);
  const auto ds = mlfa::data::load_corpus(f.corpus);
  run_training(cfg, ds, f.out, f.log_path);
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& trials_path,
             const std::string& scores_in, double threshold, const std::string& out_dir,
             int max_figure_clips) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw mlfa::IoError("cannot create output dir: " + out_dir);

  if (!scores_in.empty()) {
    // Re-score nothing: compute metrics straight from a score file.
    const auto scores = mlfa::eval::read_scores_csv(scores_in);
    const auto report = mlfa::eval::compute_metrics(scores, threshold);
    mlfa::eval::write_metrics_json(report, out_dir + "/metrics.json");
    report_metrics(report, std::cout);
    return 0;
  }

  const auto sys =
      mlfa::train::system_from_checkpoint(mlfa::train::load_checkpoint(ckpt_path));
  const auto ds = mlfa::data::load_corpus(fs::path(trials_path).parent_path().string());
  const auto report = evaluate_dataset(sys, ds, threshold, out_dir + "/scores.csv",
                                       out_dir + "/metrics.json");
  emit_figures(sys, ds, out_dir + "/figures", max_figure_clips);
  report_metrics(report, std::cout);
  return 0;
}

int cmd_ablate(const CLI::App* cmd, const TrainFlags& f, const std::string& drop,
               const std::string& out_dir, double threshold) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw mlfa::IoError("cannot create output dir: " + out_dir);

  auto full_cfg = resolve_train_config(cmd, f);
  full_cfg.use_pcl = full_cfg.use_ucl = full_cfg.use_fa = true;
  auto variant_cfg = full_cfg;  // identical seeds and schedule
  if (drop == "pcl")
    variant_cfg.use_pcl = false;
  else if (drop == "ucl")
    variant_cfg.use_ucl = false;
  else
    variant_cfg.use_fa = false;

  const auto ds = mlfa::data::load_corpus(f.corpus);
  std::cout << "== full model ==\n";
  auto full = run_training(full_cfg, ds, out_dir + "/full.ckpt", out_dir + "/full_log.jsonl");
  std::cout << "== without " << drop << " ==\n";
  auto variant = run_training(variant_cfg, ds, out_dir + "/drop_" + drop + ".ckpt",
                              out_dir + "/drop_" + drop + "_log.jsonl");

  const auto full_sys = mlfa::train::system_from_checkpoint(full.checkpoint);
  const auto variant_sys = mlfa::train::system_from_checkpoint(variant.checkpoint);
  const auto full_report = evaluate_dataset(full_sys, ds, threshold, out_dir + "/full_scores.csv",
                                            out_dir + "/full_metrics.json");
  const auto variant_report =
      evaluate_dataset(variant_sys, ds, threshold, out_dir + "/drop_" + drop + "_scores.csv",
                       out_dir + "/drop_" + drop + "_metrics.json");
  std::cout << "full:     ";
  report_metrics(full_report, std::cout);
  std::cout << "w/o " << drop << ":  ";
  report_metrics(variant_report, std::cout);
  return 0;
}

int cmd_align(const std::string& ckpt_path, const std::string& wav_path,
              const std::string& keyword, const std::string& lexicon_path,
              const std::string& out_base) {
  const auto sys =
      mlfa::train::system_from_checkpoint(mlfa::train::load_checkpoint(ckpt_path));
  const mlfa::data::Lexicon lex = lexicon_path.empty()
                                      ? mlfa::data::Lexicon::builtin()
                                      : mlfa::data::Lexicon::from_file(lexicon_path);
  const auto ids = mlfa::data::to_phonemes(keyword, lex);
  const auto wave = mlfa::data::load_wav(wav_path);
  const auto mel = mlfa::dsp::compute_logmel(wave, sys.cfg.n_mels);
  const mlfa::Matrix attn = mlfa::model::attention_for_pair(sys, mel.frames, ids);
  std::vector<std::string> phon;
  for (int id : ids) phon.push_back(mlfa::data::phoneme_name(id));
  mlfa::eval::emit_alignment_heatmap(attn, phon, out_base);
  std::cout << "alignment: " << out_base << ".csv " << out_base << ".svg\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlfa: zero-shot keyword spotting workbench"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic corpus");
  std::string synth_out, synth_config, keyword_file;
  int n_per_kw = 20;
  double neg_ratio = 1.0, hard_frac = 0.5, snr_db = 20.0;
  uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "output corpus directory")->required();
  synth->add_option("--config", synth_config, "JSON config file (SynthSpec keys)");
  synth->add_option("--keywords", keyword_file, "keyword list file (one per line)");
  synth->add_option("--n-per-kw", n_per_kw, "clips per keyword");
  synth->add_option("--neg-ratio", neg_ratio, "negative trials per positive");
  synth->add_option("--hard-neg-frac", hard_frac, "fraction of confusable negatives");
  synth->add_option("--seed", synth_seed, "override: corpus seed");
  synth->add_option("--snr-db", snr_db, "override: signal-to-noise ratio (dB)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  TrainFlags tf;
  train_cmd->add_option("--corpus", tf.corpus, "corpus directory")->required();
  train_cmd->add_option("--out", tf.out, "checkpoint output path");
  train_cmd->add_option("--log", tf.log_path, "JSON-lines loss log path");
  add_train_overrides(train_cmd, tf);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score trials and report metrics");
  std::string eval_ckpt, eval_trials, eval_scores_in, eval_out = "eval_out";
  double threshold = 0.5;
  int max_figure_clips = 8;
  eval_cmd->add_option("--ckpt", eval_ckpt, "model checkpoint");
  eval_cmd->add_option("--trials", eval_trials, "trials.csv inside a corpus directory");
  eval_cmd->add_option("--scores-in", eval_scores_in, "precomputed score CSV (skips the model)");
  eval_cmd->add_option("--threshold", threshold, "operating threshold for FAR");
  eval_cmd->add_option("--out", eval_out, "output directory");
  eval_cmd->add_option("--max-figure-clips", max_figure_clips, "similarity matrix size cap");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train full and dropped-term variants");
  TrainFlags af;
  std::string drop, ablate_out = "ablate_out";
  double ablate_threshold = 0.5;
  ablate->add_option("--corpus", af.corpus, "corpus directory")->required();
  ablate->add_option("--drop", drop, "loss term to drop")
      ->required()
      ->check(CLI::IsMember({"pcl", "ucl", "fa"}));
  ablate->add_option("--out", ablate_out, "output directory");
  ablate->add_option("--threshold", ablate_threshold, "operating threshold for FAR");
  add_train_overrides(ablate, af);

  // align
  auto* align = app.add_subcommand("align", "Emit a phoneme-to-frame attention heatmap");
  std::string align_ckpt, align_wav, align_kw, align_lex, align_out = "alignment";
  align->add_option("--ckpt", align_ckpt, "model checkpoint")->required();
  align->add_option("--wav", align_wav, "input WAV file")->required();
  align->add_option("--keyword", align_kw, "keyword text or /P1 P2 .../ phonemes")->required();
  align->add_option("--lexicon", align_lex, "lexicon file (default: builtin)");
  align->add_option("--out", align_out, "output path base (.csv/.svg appended)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return cmd_synth(synth, synth_out, synth_config, keyword_file, n_per_kw, neg_ratio,
                       hard_frac, synth_seed, snr_db);
    if (train_cmd->parsed()) return cmd_train(train_cmd, tf);
    if (eval_cmd->parsed()) {
      if (eval_scores_in.empty() && (eval_ckpt.empty() || eval_trials.empty()))
        throw mlfa::BadConfig("eval needs --ckpt and --trials (or --scores-in)");
      return cmd_eval(eval_ckpt, eval_trials, eval_scores_in, threshold, eval_out,
                      max_figure_clips);
    }
    if (ablate->parsed()) return cmd_ablate(ablate, af, drop, ablate_out, ablate_threshold);
    if (align->parsed()) return cmd_align(align_ckpt, align_wav, align_kw, align_lex, align_out);
  } catch (const mlfa::Error& e) {
    std::cerr << e.what() << "\n";  // what() is already "ErrorName: detail"
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "Error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
