// Command-line workflow for the dual pointer network relation extractor:
// synthetic data generation, training, evaluation, prediction, ablation,
// gradient checking.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpn/evaluation.hpp"
#include "dpn/gradcheck_suite.hpp"
#include "dpn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpn;

namespace {

// Exit codes: 0 success, 1 usage error, 2 data/model incompatibility,
// 3 numeric failure.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::uint64_t resolve_seed(std::uint64_t configured) {
  if (const char* env = std::getenv("DPN_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("DPN_SEED is not an integer: '" + std::string(env) + "'");
    }
  }
  return configured;
}

void echo_config(const FullConfig& cfg) {
  std::cout << "# resolved configuration\n" << render_config(cfg) << "\n";
}

std::map<std::string, double> parse_mix(const std::string& text) {
  std::map<std::string, double> mix;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--mix expects name=fraction pairs, got '" + item + "'");
    try {
      mix[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("--mix fraction is not a number in '" + item + "'");
    }
  }
  if (mix.empty()) throw ConfigError("--mix is empty");
  return mix;
}

json stats_to_json(const CorpusStats& stats) {
  json j;
  j["sentences"] = stats.sentences;
  j["triples"] = stats.triples;
  j["overlap"] = {{"normal", stats.normal}, {"seo", stats.seo}, {"epo", stats.epo}};
  j["coverage_mean"] = stats.coverage_mean;
  j["patterns"] = stats.pattern_counts;
  return j;
}

int cmd_synth(const std::string& out_dir, Index sentences, std::uint64_t seed,
              const std::string& mix, Index vocab_size, Index relations,
              Index max_entities) {
  SynthSpec spec;
  spec.n_sentences = sentences;
  spec.vocab_size = vocab_size;
  spec.max_entities = max_entities;
  spec.seed = resolve_seed(seed);
  for (Index r = 0; r < relations; ++r) spec.relations.push_back("rel_" + std::to_string(r));
  spec.pattern_mix = parse_mix(mix);

  std::cout << "# synth: sentences=" << sentences << " vocab_size=" << vocab_size
            << " relations=" << relations << " max_entities=" << max_entities
            << " mix=" << mix << "\nseed = " << spec.seed << "\n";

  auto corpus = generate_synthetic(spec);
  fs::create_directories(out_dir);
  save_corpus(out_dir + "/corpus.jsonl", corpus);
  atomic_write_file(out_dir + "/stats.json", stats_to_json(corpus_stats(corpus)).dump(2) + "\n");
  if (!corpus.empty()) save_vocab(out_dir + "/vocab.json", build_vocabs(corpus));
  std::cout << "wrote " << corpus.size() << " sentences to " << out_dir << "/corpus.jsonl\n";
  return 0;
}

FullConfig load_cli_config(const std::string& config_path, const std::string& attn,
                           const std::string& dual) {
  FullConfig cfg;
  if (!config_path.empty()) cfg = parse_config_file(config_path);
  if (!attn.empty()) cfg.attn = attention_from_name(attn);
  if (!dual.empty()) {
    if (dual != "true" && dual != "false")
      throw ConfigError("--dual expects true|false, got '" + dual + "'");
    cfg.dual = dual == "true";
  }
  cfg.train.seed = resolve_seed(cfg.train.seed);
  cfg.validate();
  return cfg;
}

int cmd_train(const std::string& config_path, const std::string& train_path,
              const std::string& dev_path, const std::string& out_dir,
              const std::string& glove, const std::string& attn, const std::string& dual) {
  FullConfig cfg = load_cli_config(config_path, attn, dual);
  echo_config(cfg);
  std::cout << "seed = " << cfg.train.seed << "\n";

  auto train_set = load_corpus(train_path);
  std::vector<Example> dev_set;
  if (!dev_path.empty()) dev_set = load_corpus(dev_path);
  auto vocab = build_vocabs(train_set, cfg.train.min_count);

  auto result = train(train_set, dev_set, cfg, vocab, nullptr, &std::cout, glove);

  fs::create_directories(out_dir);
  save_vocab(out_dir + "/vocab.json", vocab);
  save_checkpoint(out_dir + "/model.ckpt", result.best);
  atomic_write_file(out_dir + "/history.csv", history_csv(result.history));
  std::cout << "best epoch " << result.best_epoch << "; wrote " << out_dir
            << "/model.ckpt\n";
  return 0;
}

std::pair<Model<float>, Vocab> load_model_bundle(const std::string& model_path) {
  auto ckpt = load_checkpoint(model_path);
  const fs::path vocab_path = fs::path(model_path).parent_path() / "vocab.json";
  auto vocab = load_vocab(vocab_path.string());
  auto model = model_from_checkpoint(ckpt, vocab);
  return {std::move(model), std::move(vocab)};
}

void print_report(const EvalReport& report) {
  std::cout << "gold " << report.counts.gold << "  predicted " << report.counts.predicted
            << "  correct " << report.counts.correct << "\n";
  std::cout << "precision " << report.precision << "  recall " << report.recall
            << "  f1 " << report.f1 << "\n";
  std::cout << "mean forward-only recall ceiling " << report.mean_forward_ceiling << "\n";
  for (const auto& [label, c] : report.per_overlap)
    std::cout << "  overlap " << label << ": gold " << c.gold << " predicted "
              << c.predicted << " correct " << c.correct << " f1 " << c.f1() << "\n";
  for (const auto& [label, c] : report.per_relation)
    std::cout << "  relation " << label << ": gold " << c.gold << " predicted "
              << c.predicted << " correct " << c.correct << " f1 " << c.f1() << "\n";
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& report_path) {
  auto [model, vocab] = load_model_bundle(model_path);
  std::cout << "# eval: model=" << model_path << " attention=" << attention_name(model.attn)
            << " dual=" << (model.dual ? "true" : "false") << "\n";
  auto data = load_corpus(data_path, &vocab);
  auto report = evaluate_model(model, data, vocab);
  print_report(report);
  if (!report_path.empty()) {
    atomic_write_file(report_path, eval_report_json(report));
    std::cout << "wrote " << report_path << "\n";
  }
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input_path,
                const std::string& out_path) {
  auto [model, vocab] = load_model_bundle(model_path);
  std::cout << "# predict: model=" << model_path << " input=" << input_path << "\n";
  auto data = load_corpus(input_path, &vocab);
  std::ostringstream os;
  for (const auto& ex : data) {
    auto triples = predict_sentence(model, ex, vocab);
    json j;
    j["tokens"] = ex.tokens;
    j["entities"] = json::array();
    for (const auto& e : ex.entities)
      j["entities"].push_back({{"start", e.start}, {"end", e.end}, {"type", e.type}});
    j["triples"] = json::array();
    for (const auto& t : triples)
      j["triples"].push_back({{"subject", t.subject},
                              {"relation", t.relation},
                              {"object", t.object},
                              {"confidence", t.confidence},
                              {"source", t.source}});
    os << j.dump() << '\n';
  }
  atomic_write_file(out_path, os.str());
  std::cout << "wrote predictions for " << data.size() << " sentences to " << out_path
            << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data_dir,
               const std::string& out_dir) {
  FullConfig base = load_cli_config(config_path, "", "");
  echo_config(base);
  std::cout << "seed = " << base.train.seed << "\n";

  auto train_set = load_corpus(data_dir + "/train.jsonl");
  auto dev_set = load_corpus(data_dir + "/dev.jsonl");
  auto test_set = load_corpus(data_dir + "/test.jsonl");
  auto vocab = build_vocabs(train_set, base.train.min_count);

  struct Variant {
    const char* label;
    AttentionKind attn;
    bool dual;
  };
  const Variant variants[] = {{"single/forward-only", AttentionKind::kSingle, false},
                              {"single/dual", AttentionKind::kSingle, true},
                              {"multi/forward-only", AttentionKind::kMulti, false},
                              {"multi/dual", AttentionKind::kMulti, true}};

  std::vector<AblationRow> rows;
  fs::create_directories(out_dir);
  for (const auto& variant : variants) {
    FullConfig cfg = base;
    cfg.attn = variant.attn;
    cfg.dual = variant.dual;
    std::cout << "== training " << variant.label << "\n";
    auto result = train(train_set, dev_set, cfg, vocab, nullptr, &std::cout);
    auto model = model_from_checkpoint(result.best, vocab);
    rows.push_back({variant.label, evaluate_model(model, test_set, vocab)});

    std::string slug = variant.label;
    for (auto& c : slug)
      if (c == '/') c = '_';
    fs::create_directories(out_dir + "/" + slug);
    save_vocab(out_dir + "/" + slug + "/vocab.json", vocab);
    save_checkpoint(out_dir + "/" + slug + "/model.ckpt", result.best);
  }

  const auto table = format_ablation_table(rows, base.train.seed);
  std::cout << table;
  atomic_write_file(out_dir + "/ablation.txt", table);
  atomic_write_file(out_dir + "/ablation.json", ablation_report_json(rows, base.train.seed));
  std::cout << "wrote " << out_dir << "/ablation.{txt,json}\n";
  return 0;
}

int cmd_gradcheck() {
  std::cout << "# gradcheck: tolerance 1e-4, eps 1e-5, 64-bit\n";
  auto suite = run_gradcheck_suite();
  for (const auto& line : suite.lines)
    std::cout << (line.pass ? "PASS " : "FAIL ") << line.name << "  max rel err "
              << line.max_rel_err << "\n";
  std::cout << (suite.all_pass ? "all checks passed\n" : "gradient check FAILED\n");
  return suite.all_pass ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual pointer network for multiple-relation extraction"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_out = "synth_out", synth_mix = "normal=1.0";
  Index synth_sentences = 300, synth_vocab = 60, synth_relations = 5, synth_max_ent = 3;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--sentences", synth_sentences, "number of sentences");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--mix", synth_mix,
                    "pattern mix, e.g. normal=0.5,seo_1_to_n=0.25,seo_n_to_1=0.25");
  synth->add_option("--vocab-size", synth_vocab, "lexicon size (>= 20)");
  synth->add_option("--relations", synth_relations, "number of relation labels");
  synth->add_option("--max-entities", synth_max_ent, "max entities per sentence");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string train_config, train_train, train_dev, train_out = "run",
              train_glove, train_attn, train_dual;
  train_cmd->add_option("--config", train_config, "key=value config file");
  train_cmd->add_option("--train", train_train, "training corpus (jsonl)")->required();
  train_cmd->add_option("--dev", train_dev,
                        "dev corpus for early stopping (omit to train max_epochs)");
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--glove", train_glove, "pretrained word vectors (text)");
  train_cmd->add_option("--attn", train_attn, "pointer attention: single|multi");
  train_cmd->add_option("--dual", train_dual,
                        "true|false; false trains the forward decoder only "
                        "(loss renormalized to alpha*position + (1-alpha)*relation)");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_model, eval_data, eval_report;
  eval_cmd->add_option("--model", eval_model, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval_data, "corpus with gold triples")->required();
  eval_cmd->add_option("--report", eval_report, "write machine-readable JSON here");

  auto* predict_cmd = app.add_subcommand("predict", "extract triples");
  std::string pred_model, pred_input, pred_out;
  predict_cmd->add_option("--model", pred_model, "checkpoint path")->required();
  predict_cmd->add_option("--input", pred_input, "corpus (triples optional)")->required();
  predict_cmd->add_option("--out", pred_out, "output jsonl")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare the 4-variant grid");
  std::string abl_config, abl_data, abl_out;
  ablate_cmd->add_option("--config", abl_config, "key=value config file");
  ablate_cmd->add_option("--data-dir", abl_data,
                         "directory holding train.jsonl, dev.jsonl, test.jsonl")
      ->required();
  ablate_cmd->add_option("--out", abl_out, "output directory")->required();

  app.add_subcommand("gradcheck", "finite-difference check of every op and the full model");

  try {
    app.parse(argc, argv);
    if (synth->parsed())
      return cmd_synth(synth_out, synth_sentences, synth_seed, synth_mix, synth_vocab,
                       synth_relations, synth_max_ent);
    if (train_cmd->parsed())
      return cmd_train(train_config, train_train, train_dev, train_out, train_glove,
                       train_attn, train_dual);
    if (eval_cmd->parsed()) return cmd_eval(eval_model, eval_data, eval_report);
    if (predict_cmd->parsed()) return cmd_predict(pred_model, pred_input, pred_out);
    if (ablate_cmd->parsed()) return cmd_ablate(abl_config, abl_data, abl_out);
    return cmd_gradcheck();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
