#include "tadner/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "tadner/checkpoint.hpp"
#include "tadner/config.hpp"
#include "tadner/episodes.hpp"
#include "tadner/eval.hpp"
#include "tadner/pipeline.hpp"
#include "tadner/synthetic.hpp"
#include "tadner/training.hpp"

namespace tadner::cli {

namespace fs = std::filesystem;

namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
  const char* env = std::getenv("TADNER_LOG");
  if (!env) return Level::Warn;
  const std::string v(env);
  if (v == "error") return Level::Error;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err), level_(log_level()) {}
  void info(const std::string& msg) const { emit(Level::Info, "info", msg); }
  void warn(const std::string& msg) const { emit(Level::Warn, "warn", msg); }
  void debug(const std::string& msg) const { emit(Level::Debug, "debug", msg); }

 private:
  void emit(Level l, const char* tag, const std::string& msg) const {
    if (l <= level_) err_ << "[" << tag << "] " << msg << "\n";
  }
  std::ostream& err_;
  Level level_;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

fs::path checkpoint_file(const std::string& path) {
  require_file(path, "checkpoint");
  return fs::is_directory(path) ? fs::path(path) / "model.tadc" : fs::path(path);
}

// Config precedence: --config, then the config saved next to the checkpoint, then defaults.
RunConfig load_config(const std::string& config_path, const std::string& checkpoint_path) {
  if (!config_path.empty()) {
    require_file(config_path, "config");
    return RunConfig::load(config_path);
  }
  if (!checkpoint_path.empty() && fs::is_directory(checkpoint_path) &&
      fs::exists(fs::path(checkpoint_path) / "config.json")) {
    return RunConfig::load(fs::path(checkpoint_path) / "config.json");
  }
  return RunConfig{};
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> beta;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::string type_names;
  bool no_filter = false;
  bool no_type_names = false;
  bool no_span_finetune = false;
  bool no_type_finetune = false;
  bool zero_shot = false;
  bool literal_adaptation = false;

  void add_to(CLI::App* app, bool training) {
    app->add_option("--seed", seed, "Seed for all randomness");
    app->add_option("--type-names", type_names, "Builtin type-name map or JSON path");
    if (training) {
      app->add_option("--epochs", epochs, "Source training epochs");
      app->add_option("--lr", learning_rate, "Source training learning rate");
      return;
    }
    app->add_option("--workers", workers, "Episodes evaluated in parallel");
    app->add_option("--beta", beta, "Consecutive loss rises that stop fine-tuning");
    app->add_flag("--no-filter", no_filter, "Disable type-aware span filtering");
    app->add_flag("--no-type-names", no_type_names, "Replace type names with random vectors");
    app->add_flag("--no-span-finetune", no_span_finetune, "Skip span fine-tuning");
    app->add_flag("--no-type-finetune", no_type_finetune, "Skip type fine-tuning");
    app->add_flag("--zero-shot", zero_shot, "Use type names as prototypes, no support set");
    app->add_flag("--literal-adaptation", literal_adaptation,
                  "Fine-tune types on the ratio loss without the log");
  }

  void apply(RunConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (beta) cfg.finetune.beta = *beta;
    if (epochs) cfg.optimizer.epochs = *epochs;
    if (learning_rate) cfg.optimizer.learning_rate = *learning_rate;
    if (!type_names.empty()) {
      cfg.type_names = resolve_type_names(type_names);
      cfg.type_names_source = type_names;
    }
    cfg.ablations.no_filter |= no_filter;
    cfg.ablations.no_type_names |= no_type_names;
    cfg.ablations.no_span_finetune |= no_span_finetune;
    cfg.ablations.no_type_finetune |= no_type_finetune;
    cfg.zero_shot |= zero_shot;
    cfg.literal_adaptation |= literal_adaptation;
    cfg.validate();
  }
};

std::vector<LabeledSentence> read_corpus(const std::string& path, TaggingScheme scheme, const Log& log) {
  require_file(path, "data");
  ParseStats stats;
  auto sentences = read_conll_file(path, scheme, {}, &stats);
  if (stats.repaired_tags > 0) {
    log.warn(path + ": repaired " + std::to_string(stats.repaired_tags) + " ill-formed tags");
  }
  return sentences;
}

int train_source(const std::string& data, const std::string& config_path, const std::string& out_dir,
                 const Overrides& overrides, std::ostream& out, const Log& log) {
  RunConfig cfg = load_config(config_path, "");
  overrides.apply(cfg);
  const std::string source_path = data.empty() ? cfg.data.source : data;
  auto corpus = read_corpus(source_path, cfg.scheme, log);
  if (out_dir.empty()) throw UsageError("missing --out directory");

  std::vector<LabeledSentence> vocab_corpus = corpus;
  for (const auto& extra : cfg.vocab_files) {
    auto more = read_corpus(extra, cfg.scheme, log);
    vocab_corpus.insert(vocab_corpus.end(), more.begin(), more.end());
  }
  const auto vocab = build_vocabulary(vocab_corpus, cfg.type_names);
  log.info("training on " + std::to_string(corpus.size()) + " sentences, vocabulary " +
           std::to_string(vocab.size()));

  SourceTrainingReport report;
  const auto models = train_source_models(cfg, corpus, vocab, &report);
  fs::create_directories(out_dir);
  save_checkpoint(models, fs::path(out_dir) / "model.tadc", cfg.precomputed);
  cfg.data.source = source_path;
  write_text(fs::path(out_dir) / "config.json", cfg.to_json());
  nlohmann::ordered_json curves;
  curves["span_loss"] = report.span.step_losses;
  curves["type_loss"] = report.type.step_losses;
  write_text(fs::path(out_dir) / "train_log.json", curves.dump(1) + "\n");
  out << "wrote " << (fs::path(out_dir) / "model.tadc").string() << "\n";
  return kOk;
}

int evaluate(const std::string& checkpoints, const std::string& episodes_path,
             const std::string& config_path, const std::string& report_path,
             const std::string& predictions_path, const Overrides& overrides, std::ostream& out,
             const Log& log) {
  RunConfig cfg = load_config(config_path, checkpoints);
  overrides.apply(cfg);
  const auto models = load_checkpoint(checkpoint_file(checkpoints));
  const std::string ep_path = episodes_path.empty() ? cfg.data.episodes : episodes_path;
  require_file(ep_path, "episodes");
  const auto episodes = load_episodes(ep_path);
  if (episodes.empty()) throw Error(Errc::EmptyCorpus, "episode file " + ep_path + " has no episodes");
  if (report_path.empty()) throw UsageError("missing --report path");

  SourceModels run_models = models;
  if (!overrides.type_names.empty()) run_models.names.map = cfg.type_names;
  const auto batch = evaluate_episodes(run_models, episodes, make_pipeline_config(cfg), cfg.workers);
  for (const auto& f : batch.failures) {
    log.warn("episode " + std::to_string(f.index) + " failed: " + f.message);
  }
  write_text(report_path, report_to_json(batch.report));
  if (!predictions_path.empty()) {
    std::string lines;
    for (const auto& ep : batch.episodes) {
      if (!ep) continue;
      for (const auto& s : ep->sentences) lines += prediction_to_json_line(s) + "\n";
    }
    write_text(predictions_path, lines);
  }
  out << report_to_table(batch.report);
  return batch.failures.size() == episodes.size() ? kInsufficient : kOk;
}

int sample_episodes(const std::string& data, std::size_t n_way, std::size_t k_shot, std::size_t count,
                    std::uint64_t seed, const std::string& out_path, const std::string& scheme_text,
                    const std::string& protocol_text, std::size_t query_k, std::ostream& out,
                    const Log& log) {
  const auto scheme = parse_scheme(scheme_text);
  auto dataset = read_corpus(data, scheme, log);
  if (out_path.empty()) throw UsageError("missing --out path");
  SamplingConfig sc;
  sc.n_way = n_way;
  sc.k_shot = k_shot;
  sc.seed = seed;
  sc.query_k = query_k;
  if (protocol_text == "dataset_level") sc.protocol = Protocol::DatasetLevel;
  else if (protocol_text != "episode_level") throw UsageError("unknown protocol " + protocol_text);

  std::vector<Episode> episodes;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, i));
    if (sc.protocol == Protocol::EpisodeLevel) {
      episodes.push_back(sample_episode(dataset, sc, rng));
      continue;
    }
    // Dataset level: a sampled support set, tested on every other sentence.
    Episode ep;
    ep.scheme = scheme;
    ep.types = collect_labels(dataset);
    ep.support = sample_support_set(dataset, sc, rng);
    std::multiset<std::vector<std::string>> used;
    for (const auto& s : ep.support) used.insert(s.tokens);
    for (const auto& s : dataset) {
      auto it = used.find(s.tokens);
      if (it != used.end()) used.erase(it);
      else ep.query.push_back(s);
    }
    episodes.push_back(std::move(ep));
  }
  save_episodes(episodes, out_path);
  out << "wrote " << episodes.size() << " episodes to " << out_path << "\n";
  return kOk;
}

std::vector<LabeledSentence> read_input(const std::string& path, bool text, TaggingScheme scheme,
                                        const Log& log) {
  if (!text) return read_corpus(path, scheme, log);
  require_file(path, "input");
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path);
  std::vector<LabeledSentence> out;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = split_words(line);
    if (tokens.empty()) continue;
    out.push_back(make_sentence(std::move(tokens), {}, scheme));
  }
  return out;
}

int predict(const std::string& checkpoints, const std::string& support_path,
            const std::string& input_path, const std::string& out_path, const std::string& config_path,
            bool text_input, const std::vector<std::string>& types_arg, const Overrides& overrides,
            std::ostream& out, const Log& log) {
  RunConfig cfg = load_config(config_path, checkpoints);
  overrides.apply(cfg);
  SourceModels models = load_checkpoint(checkpoint_file(checkpoints));
  if (!overrides.type_names.empty()) models.names.map = cfg.type_names;
  if (out_path.empty()) throw UsageError("missing --out path");

  std::vector<LabeledSentence> support;
  if (!cfg.zero_shot) support = read_corpus(support_path, cfg.scheme, log);
  LabelSet types = types_arg.empty() ? collect_labels(support) : LabelSet(types_arg);
  if (types.empty()) throw UsageError("no target types: give --types or a labelled support set");

  const auto input = read_input(input_path, text_input, cfg.scheme, log);
  auto pcfg = make_pipeline_config(cfg);
  const auto adapted = adapt(models, support, types, pcfg);
  std::string lines;
  for (const auto& sentence : input) {
    SentencePrediction p;
    p.tokens = sentence.tokens;
    p.predicted = predict_sentence(adapted, sentence.tokens);
    for (auto& g : spans_from_tags(sentence)) {
      if (g.entity_type) p.gold.push_back(std::move(g));
    }
    lines += prediction_to_json_line(p) + "\n";
  }
  write_text(out_path, lines);
  out << "wrote " << input.size() << " predictions to " << out_path << "\n";
  return kOk;
}

int generate_synthetic(const std::string& out_dir, std::uint64_t seed, std::size_t source_sentences,
                       std::size_t target_sentences, std::ostream& out) {
  if (out_dir.empty()) throw UsageError("missing --out directory");
  SyntheticSpec spec;
  spec.type_words = {6, 6, 6, 6, 1, 1};
  spec.trigger_words = 1;
  spec.closer_words = 1;
  SyntheticCorpus gen(spec);
  Rng rng(seed);
  const std::vector<std::size_t> source_types{0, 1, 2, 3}, target_types{4, 5};
  const auto source = gen.sentences(source_sentences, rng, source_types);
  const auto target = gen.sentences(target_sentences, rng, target_types);
  const auto distractor = gen.sentences(target_sentences, rng, target_types, source_types);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_text(dir / "source.conll", serialize_conll(source));
  write_text(dir / "target.conll", serialize_conll(target));
  write_text(dir / "target_distractors.conll", serialize_conll(distractor));
  write_text(dir / "names.json", gen.names().to_json() + "\n");
  out << "wrote synthetic corpora to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidConfig:
    case Errc::FrozenEncoder:
      return kConfig;
    case Errc::InsufficientData:
    case Errc::EmptySupport:
    case Errc::MissingTypeInSupport:
      return kInsufficient;
    case Errc::NonFiniteLoss:
    case Errc::DegenerateDenominator:
      return kNumeric;
    case Errc::IoError:
      return kIo;
    default:
      return kData;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot named entity recognition with type-aware prototypes", "tadner"};
  app.require_subcommand(1);
  const Log log(err);

  std::string data, config, out_path, checkpoints, episodes, report, predictions, support, input;
  std::string scheme = "IO", protocol = "episode_level";
  std::size_t n_way = 2, k_shot = 1, count = 10, query_k = 0;
  std::size_t source_sentences = 400, target_sentences = 60;
  std::uint64_t seed = 0;
  bool text_input = false;
  std::vector<std::string> types;
  Overrides train_ov, eval_ov, predict_ov;

  auto* train = app.add_subcommand("train-source", "Train the span detector and type encoder");
  train->add_option("--data", data, "CoNLL source corpus");
  train->add_option("--config", config, "Run config (JSON)");
  train->add_option("--out", out_path, "Output directory");
  train_ov.add_to(train, true);

  auto* eval = app.add_subcommand("evaluate", "Adapt to every episode and score its query set");
  eval->add_option("--checkpoints", checkpoints, "Checkpoint directory or file")->required();
  eval->add_option("--episodes", episodes, "Episode JSONL");
  eval->add_option("--config", config, "Run config (JSON)");
  eval->add_option("--report", report, "Report JSON output");
  eval->add_option("--predictions", predictions, "Optional predictions JSONL output");
  eval_ov.add_to(eval, false);

  auto* sample = app.add_subcommand("sample-episodes", "Sample N-way K-shot episodes");
  sample->add_option("--data", data, "CoNLL corpus");
  sample->add_option("--n-way", n_way, "Types per episode");
  sample->add_option("--k-shot", k_shot, "Mentions per type in the support set");
  sample->add_option("--query-k", query_k, "Mentions per type in the query set (default k)");
  sample->add_option("--count", count, "Number of episodes");
  sample->add_option("--seed", seed, "Sampling seed");
  sample->add_option("--out", out_path, "Episode JSONL output");
  sample->add_option("--scheme", scheme, "IO, BIO or BIOES");
  sample->add_option("--protocol", protocol, "episode_level or dataset_level");

  auto* pred = app.add_subcommand("predict", "Label sentences after adapting to a support set");
  pred->add_option("--checkpoints", checkpoints, "Checkpoint directory or file")->required();
  pred->add_option("--support", support, "CoNLL support set");
  pred->add_option("--input", input, "CoNLL sentences (or plain text with --text)");
  pred->add_option("--out", out_path, "Predictions JSONL output");
  pred->add_option("--config", config, "Run config (JSON)");
  pred->add_option("--types", types, "Target types (default: types in the support set)");
  pred->add_flag("--text", text_input, "Input is one whitespace-tokenized sentence per line");
  predict_ov.add_to(pred, false);

  auto* gen = app.add_subcommand("generate-synthetic", "Write a toy corpus with separable types");
  gen->add_option("--out", out_path, "Output directory")->required();
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--source-sentences", source_sentences, "Source corpus size");
  gen->add_option("--target-sentences", target_sentences, "Target corpus size");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*train) return train_source(data, config, out_path, train_ov, out, log);
    if (*eval) return evaluate(checkpoints, episodes, config, report, predictions, eval_ov, out, log);
    if (*sample) {
      return sample_episodes(data, n_way, k_shot, count, seed, out_path, scheme, protocol, query_k,
                             out, log);
    }
    if (*pred) {
      return predict(checkpoints, support, input, out_path, config, text_input, types, predict_ov,
                     out, log);
    }
    if (*gen) return generate_synthetic(out_path, seed, source_sentences, target_sentences, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace tadner::cli
