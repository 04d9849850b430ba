// Command-line front end: synth -> train -> encode -> index-build -> retrieve / eval / serve.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "skillmatch/checkpoint.hpp"
#include "skillmatch/corpus.hpp"
#include "skillmatch/embeddings.hpp"
#include "skillmatch/evaluation.hpp"
#include "skillmatch/index.hpp"
#include "skillmatch/retrieval.hpp"
#include "skillmatch/server.hpp"
#include "skillmatch/synth.hpp"
#include "skillmatch/trainer.hpp"

using namespace skillmatch;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct SplitFlags {
  double test_fraction = 0.2;
  double val_ratio = 0.2;
  std::uint64_t seed = 7;
  std::int64_t cutoff = 0;  // 0: derived from test_fraction

  void add(CLI::App* app) {
    app->add_option("--test-fraction", test_fraction, "Share of interactions (latest first) held out for test")
        ->capture_default_str();
    app->add_option("--val-ratio", val_ratio, "Validation share of the pre-cutoff interactions")->capture_default_str();
    app->add_option("--split-seed", seed, "Seed of the train/validation shuffle")->capture_default_str();
    app->add_option("--cutoff", cutoff, "Explicit test cutoff timestamp (overrides --test-fraction)");
  }

  CorpusSplit make(const Corpus& corpus) const {
    const auto c = cutoff != 0 ? cutoff : cutoff_for_test_fraction(corpus, test_fraction);
    return temporal_split(corpus, c, val_ratio, seed);
  }
};

std::shared_ptr<Backbone> make_backbone(const Checkpoint& model, const std::string& backbone_file) {
  if (!backbone_file.empty()) return PrecomputedBackbone::load(backbone_file, model.backbone.d_model);
  return model.make_backbone();
}

std::vector<std::size_t> parse_k_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto k = std::stoul(item);
    if (k == 0) throw CLI::ValidationError("--k", "k values must be >= 1");
    out.push_back(k);
  }
  if (out.empty()) throw CLI::ValidationError("--k", "empty k list");
  return out;
}

Filter parse_filters(const std::vector<std::string>& specs) {
  Filter f;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--filter", "expected key=value[|value...]");
    std::vector<std::string> values;
    std::stringstream ss(spec.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, '|')) values.push_back(v);
    f.where(spec.substr(0, eq), std::move(values));
  }
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tower skill-match retrieval: synthetic data, training, indexing, evaluation and serving"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus (JSONL)");
  std::string synth_config, synth_out;
  std::uint64_t synth_seed = 1;
  bool synth_latent = false;
  std::optional<int> synth_freelancers, synth_projects, synth_categories, synth_languages;
  synth->add_option("--config", synth_config, "SynthConfig JSON file")->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output corpus path")->required();
  synth->add_option("--freelancers", synth_freelancers, "Override n_freelancers");
  synth->add_option("--projects", synth_projects, "Override n_projects");
  synth->add_option("--categories", synth_categories, "Override n_categories");
  synth->add_option("--languages", synth_languages, "Override n_languages");
  synth->add_flag("--latent", synth_latent, "Write every document in the shared latent vocabulary");
  auto* synth_dump = synth->add_flag("--print-config", "Print the effective configuration and exit");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train both towers and write a checkpoint");
  std::string train_corpus, train_out, train_history, train_config, train_loss = "infonce", train_backbone_file;
  std::optional<std::size_t> train_epochs, train_max_steps;
  std::optional<double> train_lr, train_tau, train_margin;
  std::optional<std::string> train_optimizer;
  std::uint64_t train_seed = 1;
  BackboneConfig bb_config;
  HeadConfig head_config;
  SplitFlags train_split;
  train_cmd->add_option("--corpus", train_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Checkpoint output path")->required();
  train_cmd->add_option("--history", train_history, "Per-step loss CSV");
  train_cmd->add_option("--config", train_config, "TrainConfig JSON (flags take precedence)")->check(CLI::ExistingFile);
  train_cmd->add_option("--loss", train_loss, "infonce | triplet (selects the preset)")
      ->check(CLI::IsMember({"infonce", "triplet", "dual_a_info_nce", "dual_a_triplets"}))
      ->capture_default_str();
  train_cmd->add_option("--epochs", train_epochs, "Epochs (0 writes the untrained towers)");
  train_cmd->add_option("--max-steps", train_max_steps, "Stop after this many steps");
  train_cmd->add_option("--lr", train_lr, "Learning rate");
  train_cmd->add_option("--optimizer", train_optimizer, "adam | sgd")->check(CLI::IsMember({"adam", "sgd"}));
  train_cmd->add_option("--tau", train_tau, "InfoNCE temperature");
  train_cmd->add_option("--margin", train_margin, "Triplet margin");
  train_cmd->add_option("--seed", train_seed, "Seed for initialization and batch sampling")->capture_default_str();
  train_cmd->add_option("--d-model", bb_config.d_model, "Embedding width")->capture_default_str();
  train_cmd->add_option("--backbone-layers", bb_config.n_layers, "Frozen backbone blocks")->capture_default_str();
  train_cmd->add_option("--backbone-seed", bb_config.seed, "Frozen backbone seed")->capture_default_str();
  train_cmd->add_option("--head-layers", head_config.n_layers, "Trainable head blocks")->capture_default_str();
  train_cmd->add_option("--backbone-file", train_backbone_file, "Precomputed token embeddings instead of the stub");
  train_split.add(train_cmd);

  // encode
  auto* encode_cmd = app.add_subcommand("encode", "Encode one side of a corpus into an embeddings file");
  std::string enc_corpus, enc_model, enc_out, enc_side = "profiles", enc_subset = "all", enc_backbone_file;
  SplitFlags enc_split;
  encode_cmd->add_option("--corpus", enc_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  encode_cmd->add_option("--model", enc_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  encode_cmd->add_option("--out", enc_out, "Embeddings JSONL output")->required();
  encode_cmd->add_option("--side", enc_side, "profiles | proposals")
      ->check(CLI::IsMember({"profiles", "proposals"}))
      ->capture_default_str();
  encode_cmd->add_option("--subset", enc_subset, "all | train | validation | test (documents referenced by the part)")
      ->check(CLI::IsMember({"all", "train", "validation", "test"}))
      ->capture_default_str();
  encode_cmd->add_option("--backbone-file", enc_backbone_file, "Precomputed token embeddings");
  enc_split.add(encode_cmd);

  // index-build
  auto* index_cmd = app.add_subcommand("index-build", "Build a vector index from an embeddings file");
  std::string idx_embeddings, idx_out, idx_metric;
  HnswParams hnsw;
  index_cmd->add_option("--embeddings", idx_embeddings, "Embeddings JSONL")->required()->check(CLI::ExistingFile);
  index_cmd->add_option("--out", idx_out, "Index output path")->required();
  index_cmd->add_option("--metric", idx_metric, "cosine | euclidean (default from the embeddings normalization)")
      ->check(CLI::IsMember({"cosine", "euclidean"}));
  index_cmd->add_option("--m", hnsw.m, "HNSW M")->capture_default_str();
  index_cmd->add_option("--ef-construction", hnsw.ef_construction, "HNSW ef_construction")->capture_default_str();
  index_cmd->add_option("--ef-search", hnsw.ef_search, "HNSW ef_search")->capture_default_str();

  // retrieve
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Encode a document on the fly and print the top-k profiles");
  std::string ret_model, ret_index, ret_doc, ret_mode = "exact", ret_backbone_file;
  std::size_t ret_k = 10;
  std::vector<std::string> ret_filters;
  retrieve_cmd->add_option("--model", ret_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--index", ret_index, "Index file")->required()->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--proposal,--document", ret_doc, "Document JSON file, or a retrieve request JSON")
      ->required()
      ->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--k", ret_k, "Number of results")->check(CLI::PositiveNumber)->capture_default_str();
  retrieve_cmd->add_option("--filter", ret_filters, "Tag filter key=value[|value...]; repeatable");
  retrieve_cmd->add_option("--mode", ret_mode, "exact | approximate")
      ->check(CLI::IsMember({"exact", "approximate"}))
      ->capture_default_str();
  retrieve_cmd->add_option("--backbone-file", ret_backbone_file, "Precomputed token embeddings");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  std::string ev_corpus, ev_model, ev_out, ev_table, ev_k = "10,100", ev_mode = "exact", ev_backbone_file;
  SplitFlags ev_split;
  eval_cmd->add_option("--corpus", ev_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--model", ev_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev_out, "EvalReport JSON output (stdout table only when omitted)");
  eval_cmd->add_option("--table", ev_table, "Also write the text table here");
  eval_cmd->add_option("--k", ev_k, "Comma-separated k values")->capture_default_str();
  eval_cmd->add_option("--mode", ev_mode, "exact | approximate k-NN")
      ->check(CLI::IsMember({"exact", "approximate"}))
      ->capture_default_str();
  eval_cmd->add_option("--backbone-file", ev_backbone_file, "Precomputed token embeddings");
  ev_split.add(eval_cmd);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service: POST /encode, POST /retrieve, GET /healthz");
  std::string sv_model, sv_index, sv_host = "127.0.0.1", sv_backbone_file;
  int sv_port = 8080;
  serve_cmd->add_option("--model", sv_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--index", sv_index, "Index file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", sv_host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", sv_port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535))->capture_default_str();
  serve_cmd->add_option("--backbone-file", sv_backbone_file, "Precomputed token embeddings");

  // export-embeddings
  auto* export_cmd = app.add_subcommand("export-embeddings", "Write embeddings as id,category,language,vector CSV");
  std::string ex_embeddings, ex_out;
  export_cmd->add_option("--embeddings", ex_embeddings, "Embeddings JSONL")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", ex_out, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return 2;
  }

  try {
    if (*synth) {
      SynthConfig config = synth_config.empty() ? SynthConfig{} : load_synth_config(synth_config);
      if (synth_freelancers) config.n_freelancers = *synth_freelancers;
      if (synth_projects) config.n_projects = *synth_projects;
      if (synth_categories) config.n_categories = *synth_categories;
      if (synth_languages) config.n_languages = *synth_languages;
      if (synth_latent) config.render_dialects = false;
      config.validate();
      if (*synth_dump) {
        std::cout << synth_config_to_json(config) << '\n';
        return 0;
      }
      const auto corpus = generate_synthetic(config, synth_seed);
      save_corpus(corpus, synth_out);
      std::cerr << "wrote " << corpus.profiles().size() << " profiles, " << corpus.proposals().size()
                << " proposals, " << corpus.interactions().size() << " interactions to " << synth_out << '\n';
      return 0;
    }

    if (*train_cmd) {
      const auto corpus = load_corpus(train_corpus);
      const auto split = train_split.make(corpus);
      TrainConfig config = TrainConfig::preset(parse_loss_kind(train_loss));
      if (!train_config.empty()) config = train_config_from_json(read_file(train_config), config);
      if (train_epochs) config.epochs = *train_epochs;
      if (train_max_steps) config.max_steps = *train_max_steps;
      if (train_lr) config.optimizer.learning_rate = *train_lr;
      if (train_optimizer) config.optimizer.kind = parse_optimizer_kind(*train_optimizer);
      if (train_tau) config.tau = *train_tau;
      if (train_margin) config.margin = *train_margin;
      if (train_cmd->count("--seed")) config.seed = train_seed;
      head_config.d_model = bb_config.d_model;
      head_config.ff_dim = 4 * bb_config.d_model;
      bb_config.ff_dim = 4 * bb_config.d_model;
      auto initial = init_checkpoint(bb_config, corpus.lexicon(), corpus.registry(), head_config, config.loss,
                                     config.seed);
      const auto backbone = make_backbone(initial, train_backbone_file);
      std::cerr << "train: " << split.train.interactions.size() << " train / " << split.validation.interactions.size()
                << " validation / " << split.test.interactions.size() << " test interactions\n";
      const auto result = train(corpus, split, config, std::move(initial), *backbone, [](const HistoryRow& row) {
        if (row.step % 25 == 0) std::cerr << "step " << row.step << " epoch " << row.epoch << " loss " << row.loss << '\n';
      });
      for (const auto& w : std::set<std::string>(result.warnings.begin(), result.warnings.end())) {
        std::cerr << "warning: " << w << '\n';
      }
      for (const auto& e : result.epochs) {
        std::cerr << "epoch " << e.epoch << ": train loss " << e.train_loss << ", validation loss "
                  << (e.validation_loss ? std::to_string(*e.validation_loss) : std::string("n/a")) << ", steps "
                  << e.steps << '\n';
      }
      save_checkpoint(result.model, train_out);
      if (!train_history.empty()) write_history_csv(result.history, train_history);
      std::cerr << "wrote " << train_out << " (best epoch " << result.best_epoch << ")\n";
      return 0;
    }

    if (*encode_cmd) {
      const auto corpus = load_corpus(enc_corpus);
      const auto model = load_checkpoint(enc_model);
      const auto backbone = make_backbone(model, enc_backbone_file);
      EmbeddingFile file;
      file.kind = enc_side == "profiles" ? DocumentKind::profile : DocumentKind::proposal;
      file.normalization = model.normalization;
      file.dim = model.backbone.d_model;
      std::vector<const Document*> docs;
      if (enc_subset == "all") {
        for (const auto& d : file.kind == DocumentKind::profile ? corpus.profiles() : corpus.proposals()) {
          docs.push_back(&d);
        }
      } else {
        const auto split = enc_split.make(corpus);
        const SplitPart& part = enc_subset == "train" ? split.train
                                : enc_subset == "validation" ? split.validation
                                                             : split.test;
        const auto& ids = file.kind == DocumentKind::profile ? part.freelancer_ids : part.project_ids;
        for (const auto& id : ids) {
          docs.push_back(file.kind == DocumentKind::profile ? &corpus.profile_at(id) : &corpus.proposal_at(id));
        }
      }
      for (const auto* d : docs) file.embeddings.push_back(model.encode(*d, *backbone));
      write_embeddings(file, enc_out);
      std::cerr << "wrote " << file.embeddings.size() << " embeddings to " << enc_out << '\n';
      return 0;
    }

    if (*index_cmd) {
      const auto file = read_embeddings(idx_embeddings);
      const IndexMetric metric = !idx_metric.empty() ? parse_index_metric(idx_metric)
                                 : file.normalization == Normalization::l2 ? IndexMetric::cosine
                                                                          : IndexMetric::euclidean;
      std::vector<IndexedVector> vectors;
      for (const auto& e : file.embeddings) {
        vectors.push_back({e.doc_id, e.vector, {{"category", e.category}, {"language", e.language}}});
      }
      const VectorIndex index(std::move(vectors), metric, hnsw);
      index.save(idx_out);
      std::cerr << "indexed " << index.size() << " vectors (" << to_string(metric) << ") into " << idx_out << '\n';
      return 0;
    }

    if (*retrieve_cmd) {
      const auto model = load_checkpoint(ret_model);
      std::shared_ptr<const Backbone> backbone = make_backbone(model, ret_backbone_file);
      std::shared_ptr<const VectorIndex> index = VectorIndex::load(ret_index);
      const Retriever retriever(model, backbone, index);
      const auto text = read_file(ret_doc);
      RetrieveRequest request;
      const auto parsed = nlohmann::json::parse(text);
      if (parsed.contains("document")) {
        request = parse_retrieve_request(text, model.registry);
      } else {
        request.document = parse_encode_request(text, model.registry);
      }
      if (retrieve_cmd->count("--k") || !parsed.contains("k")) request.k = ret_k;
      if (!ret_filters.empty()) request.filter = parse_filters(ret_filters);
      if (retrieve_cmd->count("--mode") || !parsed.contains("mode")) request.mode = parse_search_mode(ret_mode);
      std::cout << hits_to_json(retriever.retrieve(request)) << '\n';
      return 0;
    }

    if (*eval_cmd) {
      const auto corpus = load_corpus(ev_corpus);
      const auto model = load_checkpoint(ev_model);
      const auto backbone = make_backbone(model, ev_backbone_file);
      const auto split = ev_split.make(corpus);
      EvalConfig config;
      config.k_list = parse_k_list(ev_k);
      config.search = parse_search_mode(ev_mode);
      const auto report = evaluate(corpus, split.test, model, *backbone, config);
      const auto table = report_to_table(report);
      std::cout << table;
      if (!ev_out.empty()) write_file(ev_out, report_to_json(report) + "\n");
      if (!ev_table.empty()) write_file(ev_table, table);
      return 0;
    }

    if (*serve_cmd) {
      const auto model = load_checkpoint(sv_model);
      std::shared_ptr<const Backbone> backbone = make_backbone(model, sv_backbone_file);
      std::shared_ptr<const VectorIndex> index = VectorIndex::load(sv_index);
      auto retriever = std::make_shared<const Retriever>(model, backbone, index);
      Server server(retriever);
      const int port = server.bind(sv_host, sv_port);
      if (port < 0) throw std::runtime_error("cannot bind " + sv_host + ":" + std::to_string(sv_port));
      std::cout << "listening on " << sv_host << ":" << port << std::endl;
      return server.serve() ? 0 : 1;
    }

    if (*export_cmd) {
      const auto file = read_embeddings(ex_embeddings);
      write_embeddings_csv(file, ex_out);
      std::cerr << "wrote " << file.embeddings.size() << " rows to " << ex_out << '\n';
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
