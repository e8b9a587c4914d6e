// Command-line front end: corpus generation, preprocessing, embedding
// training and evaluation, NER and relation models, scoring, and the
// end-to-end pipeline. Exit codes: 0 success, 2 config error, 3 data error,
// 4 numeric failure.

#include <CLI11.hpp>
#include <iostream>

#include "medner/io.hpp"
#include "medner/pipeline.hpp"

using namespace medner;

namespace {

constexpr const char* kVersion = "medner 0.1.0";

struct GlobalOpts {
  std::uint64_t seed = 42;
  int threads = 1;
  int precision = 32;
};

std::vector<AnnotatedDocument> load_normalized(const fs::path& dir,
                                               std::map<std::string, SentenceMap>* maps) {
  auto raw = read_corpus_dir(dir);
  std::vector<AnnotatedDocument> docs;
  for (auto& d : raw) {
    if (maps) (*maps)[d.doc_id] = split_sentences(d);
    docs.push_back(normalize_tokens(d));
  }
  return docs;
}

NerConfig ner_config_from(const std::string& arch, const std::string& config_path, int dim) {
  NerConfig nc = PipelineConfig::default_arch(ner_arch_from_name(arch));
  nc.m = dim;
  if (!config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigInvalid("bad ner config json: " + std::string(e.what()));
    }
    detail::apply_ner_overrides(nc, j);
  }
  nc.validate();
  return nc;
}

RelConfig rel_config_from(const std::string& arch, const std::string& attention,
                          const std::string& config_path, int dim) {
  RelConfig rc = rel_arch_from_name(arch) == RelArch::Seq2Seq
                     ? RelConfig::seq2seq()
                     : RelConfig::encdec(attention_from_name(attention));
  rc.m = dim;
  if (!config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigInvalid("bad rel config json: " + std::string(e.what()));
    }
    detail::apply_rel_overrides(rc, j);
  }
  rc.validate();
  return rc;
}

// predicted spans -> per-token code grid, for pipeline-mode relation inputs
std::vector<std::vector<int>> grid_from_predictions(const AnnotatedDocument& doc,
                                                    const std::vector<PredictedSpan>& spans) {
  std::vector<std::vector<int>> grid;
  for (const auto& line : doc.lines) grid.emplace_back(line.size(), 0);
  for (const auto& ps : spans) {
    if (!doc.span_in_bounds(ps.span)) continue;
    for (int t = ps.span.start; t <= ps.span.end; ++t) {
      int& cell = grid[static_cast<std::size_t>(ps.span.line - 1)][static_cast<std::size_t>(t)];
      if (cell == 0 || field_code(ps.label) < cell) cell = field_code(ps.label);
    }
  }
  return grid;
}

int run(int argc, char** argv) {
  CLI::App app{"Clinical NER and relation extraction toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "master random seed");
  app.add_option("--threads", g.threads, "worker threads for independent jobs");
  app.add_option("--precision", g.precision, "training float width")
      ->check(CLI::IsMember({32, 64}));

  // ---- gen-synthetic ---------------------------------------------------------
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic look-alike corpus");
  std::string gen_out, gen_config;
  int gen_annotated = -1, gen_unannotated = -1;
  gen->add_option("--out", gen_out, "output corpus directory")->required();
  gen->add_option("--config", gen_config, "generator config json");
  gen->add_option("--annotated", gen_annotated, "annotated document count");
  gen->add_option("--unannotated", gen_unannotated, "unannotated document count");
  gen->callback([&] {
    GeneratorConfig gc;
    if (!gen_config.empty())
      detail::apply_generator_overrides(gc, nlohmann::json::parse(read_file(gen_config)));
    if (gen_annotated >= 0) gc.annotated_docs = gen_annotated;
    if (gen_unannotated >= 0) gc.unannotated_docs = gen_unannotated;
    auto corpus = gen_synthetic(gc, g.seed);
    write_corpus_dir(gen_out, corpus.annotated);
    write_corpus_dir(gen_out, corpus.unannotated);
    std::cout << "wrote " << corpus.annotated.size() << " annotated and "
              << corpus.unannotated.size() << " unannotated documents to " << gen_out << "\n";
  });

  // ---- preprocess -------------------------------------------------------------
  auto* pre = app.add_subcommand("preprocess", "normalize a corpus directory");
  std::string pre_in, pre_out, pre_report;
  pre->add_option("--in", pre_in, "input corpus directory")->required();
  pre->add_option("--out", pre_out, "output corpus directory")->required();
  pre->add_option("--vocab-report", pre_report, "token statistics json");
  pre->callback([&] {
    auto docs = read_corpus_dir(pre_in);
    std::vector<AnnotatedDocument> normalized;
    for (const auto& d : docs) normalized.push_back(normalize_tokens(d));
    write_corpus_dir(pre_out, normalized);
    if (!pre_report.empty()) {
      std::set<std::string> types;
      long tokens = 0;
      for (const auto& d : normalized)
        for (const auto& line : d.lines)
          for (const auto& tok : line) {
            types.insert(tok);
            ++tokens;
          }
      nlohmann::json j;
      j["documents"] = normalized.size();
      j["tokens"] = tokens;
      j["token_types"] = types.size();
      write_file(pre_report, j.dump(2) + "\n");
    }
    std::cout << "preprocessed " << normalized.size() << " documents into " << pre_out << "\n";
  });

  // ---- train-embeddings ----------------------------------------------------------
  auto* temb = app.add_subcommand("train-embeddings", "train CBOW or CSG embeddings");
  std::string temb_algo = "cbow", temb_in, temb_train, temb_out;
  EmbedTrainConfig ecfg;
  temb->add_option("--algo", temb_algo, "cbow or csg")->check(CLI::IsMember({"cbow", "csg"}));
  temb->add_option("--in", temb_in, "embedding-training corpus directory")->required();
  temb->add_option("--train-dir", temb_train,
                   "model-train corpus directory (vocabulary; CBOW also trains on it)");
  temb->add_option("--out", temb_out, "output embeddings text file")->required();
  temb->add_option("--dim", ecfg.dim, "embedding dimension");
  temb->add_option("--epochs", ecfg.epochs, "training epochs");
  temb->add_option("--negatives", ecfg.negatives, "negative samples (0 = full softmax)");
  temb->add_option("--lr0", ecfg.lr0, "initial learning rate");
  temb->add_option("--lr-min", ecfg.lr_min, "final learning rate");
  bool uniform_init = false;
  temb->add_flag("--uniform-init", uniform_init, "uniform +/-0.5/m init instead of Gaussian(0,1)");
  temb->callback([&] {
    std::map<std::string, SentenceMap> maps;
    auto emb_docs = load_normalized(temb_in, &maps);
    std::vector<AnnotatedDocument> train_docs;
    if (!temb_train.empty()) train_docs = load_normalized(temb_train, &maps);
    auto vocab = build_vocab(emb_docs, train_docs);
    std::vector<AnnotatedDocument> window_docs = emb_docs;
    if (temb_algo == "cbow")
      window_docs.insert(window_docs.end(), train_docs.begin(), train_docs.end());
    std::vector<SentenceMap> wmaps;
    for (const auto& d : window_docs) wmaps.push_back(maps.at(d.doc_id));
    auto windows = make_windows(window_docs, wmaps, vocab);
    ecfg.paper_init = !uniform_init;
    ecfg.seed = g.seed;
    auto E = temb_algo == "cbow" ? train_cbow(windows, vocab, ecfg)
                                 : train_csg(windows, vocab, ecfg);
    set_unk_to_mean(E);
    save_embeddings(E, vocab, temb_out);
    std::cout << "trained " << temb_algo << " embeddings on " << windows.size() << " windows ("
              << vocab.size() << " tokens) -> " << temb_out << "\n";
  });

  // ---- eval-embeddings -------------------------------------------------------------
  auto* eval_emb = app.add_subcommand("eval-embeddings", "intrinsic / extrinsic evaluation");
  bool intrinsic = false, extrinsic = false;
  std::string ee_cbow, ee_csg, ee_train, ee_report, ee_tsne_out, ee_sweep;
  SweepConfig sweep_cfg;
  TsneConfig tsne_cfg;
  int tsne_max_points = 150;
  eval_emb->add_flag("--intrinsic", intrinsic, "AED/ACS and t-SNE");
  eval_emb->add_flag("--extrinsic", extrinsic, "context-free classifier sweep");
  eval_emb->add_option("--cbow", ee_cbow, "CBOW embeddings file")->required();
  eval_emb->add_option("--csg", ee_csg, "CSG embeddings file")->required();
  eval_emb->add_option("--train-dir", ee_train, "annotated training corpus")->required();
  eval_emb->add_option("--report", ee_report, "output csv")->required();
  eval_emb->add_option("--tsne-out", ee_tsne_out, "t-SNE coordinates csv");
  eval_emb->add_option("--perplexity", tsne_cfg.perplexity, "t-SNE perplexity");
  eval_emb->add_option("--iters", tsne_cfg.iters, "t-SNE iterations");
  eval_emb->add_option("--max-points", tsne_max_points, "t-SNE point cap");
  eval_emb->add_option("--sweep", ee_sweep, "sweep grid json (defaults to the full grid)");
  eval_emb->add_option("--n-train", sweep_cfg.n_train, "sweep training words");
  eval_emb->add_option("--n-test", sweep_cfg.n_test, "sweep test words");
  eval_emb->callback([&] {
    if (intrinsic == extrinsic)
      throw ConfigInvalid("pass exactly one of --intrinsic / --extrinsic");
    auto cbow = load_embeddings(ee_cbow, EmbedAlgo::Cbow);
    auto csg = load_embeddings(ee_csg, EmbedAlgo::Csg);
    auto train_docs = load_normalized(ee_train, nullptr);
    auto partition = build_class_partition(train_docs, cbow.vocab);
    if (intrinsic) {
      write_file(ee_report, intrinsic_report_csv(intrinsic_eval(cbow.matrix, csg.matrix, partition)));
      if (!ee_tsne_out.empty()) {
        std::vector<int> ids;
        std::vector<std::string> fields;
        std::set<int> seen;
        for (FieldLabel f : all_fields())
          for (int id : partition.field_tokens.at(f))
            if (seen.insert(id).second) {
              ids.push_back(id);
              fields.push_back(field_name(f));
            }
        for (int id : partition.none_tokens) {
          if (static_cast<int>(ids.size()) >= tsne_max_points) break;
          if (seen.insert(id).second) {
            ids.push_back(id);
            fields.push_back("none");
          }
        }
        Tensor<double> X({static_cast<std::int64_t>(ids.size()), cbow.matrix.dim});
        for (std::size_t i = 0; i < ids.size(); ++i)
          for (int jj = 0; jj < cbow.matrix.dim; ++jj)
            X.at(static_cast<std::int64_t>(i), jj) = cbow.matrix.row(ids[i])[jj];
        tsne_cfg.seed = g.seed;
        auto result = tsne_project(X, tsne_cfg);
        std::vector<std::string> tokens;
        for (int id : ids) tokens.push_back(cbow.vocab.token(id));
        write_file(ee_tsne_out, tsne_csv(tokens, fields, result.coords));
      }
    } else {
      auto points = default_sweep();
      if (!ee_sweep.empty()) {
        points.clear();
        for (const auto& pj : nlohmann::json::parse(read_file(ee_sweep))) {
          SweepPoint p;
          p.algorithm = pj.at("algorithm").get<std::string>() == "csg" ? EmbedAlgo::Csg
                                                                        : EmbedAlgo::Cbow;
          p.layers = pj.at("layers").get<int>();
          p.activation = activation_from_name(pj.at("activation").get<std::string>());
          p.dropout = pj.at("dropout").get<double>();
          p.lr = pj.at("lr").get<double>();
          points.push_back(p);
        }
      }
      sweep_cfg.threads = g.threads;
      auto report = extrinsic_sweep(cbow.matrix, csg.matrix, partition, points, sweep_cfg, g.seed);
      write_file(ee_report, sweep_report_csv(report));
    }
    std::cout << "wrote " << ee_report << "\n";
  });

  // ---- train-ner ----------------------------------------------------------------
  auto* tner = app.add_subcommand("train-ner", "train a term classification model");
  std::string tn_arch, tn_config, tn_emb, tn_train, tn_out;
  tner->add_option("--arch", tn_arch, "cf-ffn | ca-ffn | rnn")->required();
  tner->add_option("--config", tn_config, "config json overriding the architecture defaults");
  tner->add_option("--embeddings", tn_emb, "embeddings text file")->required();
  tner->add_option("--train-dir", tn_train, "annotated training corpus")->required();
  tner->add_option("--out", tn_out, "output checkpoint")->required();
  tner->callback([&] {
    auto loaded = load_embeddings(tn_emb, EmbedAlgo::Cbow);
    std::map<std::string, SentenceMap> maps;
    auto docs = load_normalized(tn_train, &maps);
    std::vector<SentenceMap> doc_maps;
    for (const auto& d : docs) doc_maps.push_back(maps.at(d.doc_id));
    auto nc = ner_config_from(tn_arch, tn_config, loaded.matrix.dim);
    if (g.precision == 64) {
      NerSystem<double> system(nc, loaded.matrix, loaded.vocab, g.seed);
      system.train(docs, doc_maps, g.seed);
      system.save(tn_out, g.seed);
    } else {
      NerSystem<float> system(nc, loaded.matrix, loaded.vocab, g.seed);
      system.train(docs, doc_maps, g.seed);
      system.save(tn_out, g.seed);
    }
    std::cout << "trained " << tn_arch << " on " << docs.size() << " documents -> " << tn_out
              << "\n";
  });

  // ---- predict -------------------------------------------------------------------
  auto* pred = app.add_subcommand("predict", "write predicted spans for a corpus");
  std::string pd_model, pd_in, pd_out;
  pred->add_option("--model", pd_model, "ner checkpoint")->required();
  pred->add_option("--in", pd_in, "corpus directory")->required();
  pred->add_option("--out", pd_out, "predictions jsonl")->required();
  pred->callback([&] {
    auto system = NerSystem<float>::load(pd_model);
    std::map<std::string, SentenceMap> maps;
    auto docs = load_normalized(pd_in, &maps);
    std::vector<std::vector<PredictedSpan>> per_doc(docs.size());
    parallel_for(docs.size(), g.threads, [&](std::size_t i) {
      per_doc[i] = system.predict_spans(docs[i], maps.at(docs[i].doc_id));
    });
    std::vector<std::pair<std::string, PredictedSpan>> rows;
    for (std::size_t i = 0; i < docs.size(); ++i)
      for (const auto& ps : per_doc[i]) rows.emplace_back(docs[i].doc_id, ps);
    write_predictions(pd_out, rows);
    std::cout << "wrote " << rows.size() << " spans to " << pd_out << "\n";
  });

  // ---- evaluate ------------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "score predictions or relations against gold");
  std::string ev_gold, ev_pred, ev_rel, ev_lookup, ev_report, ev_name = "model";
  ev->add_option("--gold", ev_gold, "gold corpus directory")->required();
  ev->add_option("--pred", ev_pred, "predictions jsonl (term extraction)");
  ev->add_option("--relations", ev_rel, "relations jsonl (relation extraction)");
  ev->add_option("--lookup-dir", ev_lookup, "training corpus for the field lookup");
  ev->add_option("--report", ev_report, "output csv")->required();
  ev->add_option("--model-name", ev_name, "tag used in the report rows");
  ev->callback([&] {
    if (ev_pred.empty() == ev_rel.empty())
      throw ConfigInvalid("pass exactly one of --pred / --relations");
    auto gold_docs = load_normalized(ev_gold, nullptr);
    std::map<std::string, const AnnotatedDocument*> by_id;
    for (const auto& d : gold_docs) by_id[d.doc_id] = &d;

    ConfusionCounts total;
    if (!ev_pred.empty()) {
      std::map<std::string, std::vector<LabeledSpan>> spans;
      for (const auto& [doc_id, ps] : read_predictions(ev_pred)) {
        if (!by_id.count(doc_id))
          throw DocumentMismatch("prediction references unknown document " + doc_id);
        spans[doc_id].push_back({ps.label, ps.span});
      }
      for (const auto& d : gold_docs) {
        auto it = spans.find(d.doc_id);
        total.add(score_tokens(d, it == spans.end() ? std::vector<LabeledSpan>{} : it->second));
      }
    } else {
      auto lookup_docs = ev_lookup.empty() ? gold_docs : load_normalized(ev_lookup, nullptr);
      auto lookup = build_field_lookup(lookup_docs);
      std::map<std::string, std::map<std::size_t, ExtractedRelations>> grouped;
      for (const auto& row : read_relations(ev_rel)) {
        if (!by_id.count(row.doc_id))
          throw DocumentMismatch("relation references unknown document " + row.doc_id);
        auto& ex = grouped[row.doc_id][row.entry_index];
        if (row.generated) {
          ex.generated = true;
          ex.tokens.insert(ex.tokens.end(), row.tokens.begin(), row.tokens.end());
        } else {
          FieldLabel f = FieldLabel::None;
          for (FieldLabel fl : all_fields())
            if (row.field == field_name(fl)) f = fl;
          if (f == FieldLabel::None) throw MalformedHeader("bad field in relations: " + row.field);
          auto& toks = ex.tagged[f];
          toks.insert(toks.end(), row.tokens.begin(), row.tokens.end());
        }
      }
      for (const auto& d : gold_docs) {
        auto git = grouped.find(d.doc_id);
        std::vector<const Entry*> entries;
        std::vector<ExtractedRelations> extracted;
        for (std::size_t ei = 0; ei < d.entries.size(); ++ei) {
          entries.push_back(&d.entries[ei]);
          ExtractedRelations ex;
          if (git != grouped.end()) {
            auto eit = git->second.find(ei);
            if (eit != git->second.end()) ex = eit->second;
          }
          extracted.push_back(std::move(ex));
        }
        total.add(score_relations(d, entries, extracted, lookup));
      }
    }
    write_file(ev_report, f1_report_csv(ev_name, total));
    std::cout << "wrote " << ev_report << "\n";
  });

  // ---- train-rel -----------------------------------------------------------------
  auto* trel = app.add_subcommand("train-rel", "train a relation extraction model");
  std::string tr_arch, tr_attention = "bahdanau", tr_config, tr_emb, tr_train, tr_out;
  trel->add_option("--arch", tr_arch, "seq2seq | encdec")->required();
  trel->add_option("--attention", tr_attention, "bahdanau | luong (encdec)");
  trel->add_option("--config", tr_config, "config json overriding the defaults");
  trel->add_option("--embeddings", tr_emb, "embeddings text file")->required();
  trel->add_option("--train-dir", tr_train, "annotated training corpus")->required();
  trel->add_option("--out", tr_out, "output checkpoint")->required();
  trel->callback([&] {
    auto loaded = load_embeddings(tr_emb, EmbedAlgo::Cbow);
    auto docs = load_normalized(tr_train, nullptr);
    auto rc = rel_config_from(tr_arch, tr_attention, tr_config, loaded.matrix.dim);
    auto instances = build_rel_instances(docs, loaded.vocab, rc.half_lines);
    if (instances.empty()) throw NoPositiveInstances("no annotated entries in " + tr_train);
    if (rc.arch == RelArch::Seq2Seq) {
      if (g.precision == 64) {
        Seq2SeqTagger<double> model(rc, loaded.matrix.weights.cast<double>(), g.seed);
        model.train(instances, g.seed);
        save_rel_model(model, loaded.matrix.weights.cast<double>(), loaded.vocab, tr_out, g.seed);
      } else {
        Seq2SeqTagger<float> model(rc, loaded.matrix.weights, g.seed);
        model.train(instances, g.seed);
        save_rel_model(model, loaded.matrix.weights, loaded.vocab, tr_out, g.seed);
      }
    } else {
      if (g.precision == 64) {
        EncDecModel<double> model(rc, loaded.matrix.weights.cast<double>(), g.seed);
        model.train(instances, g.seed);
        save_rel_model(model, loaded.matrix.weights.cast<double>(), loaded.vocab, tr_out, g.seed);
      } else {
        EncDecModel<float> model(rc, loaded.matrix.weights, g.seed);
        model.train(instances, g.seed);
        save_rel_model(model, loaded.matrix.weights, loaded.vocab, tr_out, g.seed);
      }
    }
    std::cout << "trained " << tr_arch << " on " << instances.size() << " entries -> " << tr_out
              << "\n";
  });

  // ---- extract-rel ---------------------------------------------------------------
  auto* xrel = app.add_subcommand("extract-rel", "extract related terms for annotated entries");
  std::string xr_model, xr_in, xr_entries, xr_out, xr_codes = "gold", xr_pred;
  xrel->add_option("--model", xr_model, "relation checkpoint")->required();
  xrel->add_option("--in", xr_in, "corpus directory with entries")->required();
  xrel->add_option("--entries", xr_entries, "entries jsonl filter (doc_id, entry)");
  xrel->add_option("--out", xr_out, "relations jsonl")->required();
  xrel->add_option("--codes", xr_codes, "known entity codes: gold | pred")
      ->check(CLI::IsMember({"gold", "pred"}));
  xrel->add_option("--pred", xr_pred, "predictions jsonl (with --codes pred)");
  xrel->callback([&] {
    auto loaded = load_rel_model(xr_model);
    auto docs = load_normalized(xr_in, nullptr);

    std::vector<std::vector<std::vector<int>>> code_grids;
    const std::vector<std::vector<std::vector<int>>>* grids = nullptr;
    if (xr_codes == "pred") {
      if (xr_pred.empty()) throw ConfigInvalid("--codes pred needs --pred");
      std::map<std::string, std::vector<PredictedSpan>> by_doc;
      for (const auto& [doc_id, ps] : read_predictions(xr_pred)) by_doc[doc_id].push_back(ps);
      for (const auto& d : docs) code_grids.push_back(grid_from_predictions(d, by_doc[d.doc_id]));
      grids = &code_grids;
    }
    auto instances = build_rel_instances(docs, loaded.vocab, loaded.cfg.half_lines, grids);

    if (!xr_entries.empty()) {
      std::set<std::pair<std::string, std::size_t>> keep;
      std::ifstream is(xr_entries);
      if (!is) throw ConfigInvalid("cannot open entries: " + xr_entries);
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        keep.emplace(j.at("doc_id").get<std::string>(), j.at("entry").get<std::size_t>());
      }
      std::vector<RelInstance> filtered;
      for (auto& inst : instances)
        if (keep.count({docs[inst.doc_index].doc_id, inst.entry_index}))
          filtered.push_back(std::move(inst));
      instances = std::move(filtered);
    }

    std::vector<RelationRow> rows;
    for (const auto& inst : instances) {
      const auto& doc = docs[inst.doc_index];
      const auto& entry = doc.entries[inst.entry_index];
      if (loaded.cfg.arch == RelArch::Seq2Seq) {
        auto ex = extract_tagged(*loaded.tagger, inst, loaded.vocab);
        for (const auto& [f, toks] : ex.tagged)
          rows.push_back({doc.doc_id, inst.entry_index, entry.medication.spans[0], field_name(f),
                          toks, false});
      } else {
        // bare generated tokens; the evaluator attributes fields against gold
        auto ex = extract_generated(*loaded.encdec, inst, loaded.vocab);
        rows.push_back({doc.doc_id, inst.entry_index, entry.medication.spans[0], "generated",
                        ex.tokens, true});
      }
    }
    write_relations(xr_out, rows);
    std::cout << "wrote " << rows.size() << " relation rows to " << xr_out << "\n";
  });

  // ---- run-pipeline ---------------------------------------------------------------
  auto* runp = app.add_subcommand("run-pipeline", "run every stage from a config file");
  std::string rp_config, rp_out;
  runp->add_option("--config", rp_config, "pipeline config json")->required();
  runp->add_option("--out", rp_out, "override out_dir");
  runp->callback([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(rp_config));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigInvalid("bad pipeline config: " + std::string(e.what()));
    }
    auto cfg = pipeline_config_from_json(j);
    if (!rp_out.empty()) cfg.out_dir = rp_out;
    if (app.count("--seed")) cfg.seed = g.seed;
    if (app.count("--threads")) cfg.threads = g.threads;
    auto result = run_pipeline(cfg);
    std::cout << "pipeline finished; " << result.reports.size() << " reports under "
              << result.out.string() << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::Config: return 2;
      case ErrorKind::Data: return 3;
      case ErrorKind::Numeric: return 4;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
