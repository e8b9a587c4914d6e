#pragma once

#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "medner/embed_eval.hpp"
#include "medner/io.hpp"
#include "medner/ner.hpp"
#include "medner/rel.hpp"
#include "medner/synthetic.hpp"
#include "medner/tsne.hpp"

namespace medner {

struct RelJob {
  std::string name;  // seq2seq | encdec-bahdanau | encdec-luong
  RelConfig cfg;
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  int threads = 1;
  std::string out_dir;

  bool synthetic = true;
  GeneratorConfig generator;
  std::vector<std::pair<int, std::string>> corpus_dirs;  // (year, path)

  SplitSizes split{40, 8, 8};

  EmbedTrainConfig embeddings;

  bool tsne_enabled = true;
  TsneConfig tsne;
  int tsne_max_points = 150;

  bool sweep_enabled = false;
  SweepConfig sweep;
  std::vector<SweepPoint> sweep_points = default_sweep();

  EmbedAlgo ner_embeddings = EmbedAlgo::Cbow;
  std::vector<NerConfig> ner_archs;

  bool rel_enabled = true;
  std::vector<RelJob> rel_jobs;

  static NerConfig default_arch(NerArch arch) {
    switch (arch) {
      case NerArch::ContextFree: return NerConfig::context_free();
      case NerArch::ContextAware: return NerConfig::context_aware();
      case NerArch::Rnn: return NerConfig::rnn();
    }
    throw ConfigInvalid("bad arch");
  }

  void validate() const {
    if (out_dir.empty()) throw ConfigInvalid("out_dir is required");
    if (!synthetic) {
      if (corpus_dirs.empty()) throw ConfigInvalid("corpus.dirs is empty");
      for (const auto& [year, dir] : corpus_dirs)
        if (!fs::is_directory(dir)) throw ConfigInvalid("corpus directory missing: " + dir);
    }
    for (const auto& nc : ner_archs) {
      nc.validate();
      if (nc.m != embeddings.dim)
        throw ConfigInvalid("ner embedding dim must match the trained embeddings");
    }
    for (const auto& job : rel_jobs) {
      job.cfg.validate();
      if (job.cfg.m != embeddings.dim)
        throw ConfigInvalid("rel embedding dim must match the trained embeddings");
    }
  }
};

namespace detail {

inline void apply_ner_overrides(NerConfig& nc, const nlohmann::json& j) {
  if (j.contains("w")) nc.w = j.at("w").get<int>();
  if (j.contains("hidden")) nc.hidden = j.at("hidden").get<std::vector<int>>();
  if (j.contains("dropout")) nc.dropout = j.at("dropout").get<double>();
  if (j.contains("positive_proportion"))
    nc.positive_proportion = j.at("positive_proportion").get<double>();
  if (j.contains("epochs")) nc.epochs = j.at("epochs").get<int>();
  if (j.contains("lr")) nc.lr = j.at("lr").get<double>();
  if (j.contains("decay")) nc.decay = j.at("decay").get<double>();
  if (j.contains("batch")) nc.batch = j.at("batch").get<int>();
  if (j.contains("activation"))
    nc.activation = activation_from_name(j.at("activation").get<std::string>());
  if (j.contains("fine_tune_embeddings"))
    nc.fine_tune_embeddings = j.at("fine_tune_embeddings").get<bool>();
}

inline void apply_rel_overrides(RelConfig& rc, const nlohmann::json& j) {
  if (j.contains("gru_hidden")) rc.gru_hidden = j.at("gru_hidden").get<int>();
  if (j.contains("enc_hidden")) rc.enc_hidden = j.at("enc_hidden").get<int>();
  if (j.contains("attn_dim")) rc.attn_dim = j.at("attn_dim").get<int>();
  if (j.contains("epochs")) rc.epochs = j.at("epochs").get<int>();
  if (j.contains("lr")) rc.lr = j.at("lr").get<double>();
  if (j.contains("decay")) rc.decay = j.at("decay").get<double>();
  if (j.contains("clip")) rc.clip = j.at("clip").get<double>();
  if (j.contains("batch")) rc.batch = j.at("batch").get<int>();
  if (j.contains("half_lines")) rc.half_lines = j.at("half_lines").get<int>();
}

inline void apply_generator_overrides(GeneratorConfig& gc, const nlohmann::json& j) {
  if (j.contains("annotated_docs")) gc.annotated_docs = j.at("annotated_docs").get<int>();
  if (j.contains("unannotated_docs")) gc.unannotated_docs = j.at("unannotated_docs").get<int>();
  if (j.contains("min_entries_per_doc"))
    gc.min_entries_per_doc = j.at("min_entries_per_doc").get<int>();
  if (j.contains("max_entries_per_doc"))
    gc.max_entries_per_doc = j.at("max_entries_per_doc").get<int>();
  if (j.contains("min_filler_lines")) gc.min_filler_lines = j.at("min_filler_lines").get<int>();
  if (j.contains("max_filler_lines")) gc.max_filler_lines = j.at("max_filler_lines").get<int>();
  if (j.contains("field_proportions"))
    for (FieldLabel f : all_fields()) {
      if (f == FieldLabel::Medication) continue;
      const auto& fp = j.at("field_proportions");
      if (fp.contains(field_name(f))) gc.field_proportions[f] = fp.at(field_name(f)).get<double>();
    }
  if (j.contains("templates")) gc.templates = j.at("templates").get<std::vector<std::string>>();
  if (j.contains("drugs")) gc.drugs = j.at("drugs").get<std::vector<std::string>>();
  if (j.contains("doses")) gc.doses = j.at("doses").get<std::vector<std::string>>();
  if (j.contains("modes")) gc.modes = j.at("modes").get<std::vector<std::string>>();
  if (j.contains("frequencies"))
    gc.frequencies = j.at("frequencies").get<std::vector<std::string>>();
  if (j.contains("durations")) gc.durations = j.at("durations").get<std::vector<std::string>>();
  if (j.contains("reasons")) gc.reasons = j.at("reasons").get<std::vector<std::string>>();
}

}  // namespace detail

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  if (!j.contains("out_dir")) throw ConfigInvalid("config needs out_dir");
  cfg.out_dir = j.at("out_dir").get<std::string>();
  cfg.seed = j.value("seed", 42ull);
  cfg.threads = j.value("threads", 1);

  if (j.contains("corpus")) {
    const auto& c = j.at("corpus");
    if (c.contains("dirs")) {
      cfg.synthetic = false;
      for (const auto& d : c.at("dirs"))
        cfg.corpus_dirs.emplace_back(d.at("year").get<int>(), d.at("path").get<std::string>());
    } else if (c.contains("synthetic")) {
      detail::apply_generator_overrides(cfg.generator, c.at("synthetic"));
    }
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    cfg.split.model_train = s.value("model_train", cfg.split.model_train);
    cfg.split.validation = s.value("validation", cfg.split.validation);
    cfg.split.test = s.value("test", cfg.split.test);
  }
  if (j.contains("embeddings")) {
    const auto& e = j.at("embeddings");
    cfg.embeddings.dim = e.value("dim", cfg.embeddings.dim);
    cfg.embeddings.epochs = e.value("epochs", cfg.embeddings.epochs);
    cfg.embeddings.negatives = e.value("negatives", cfg.embeddings.negatives);
    cfg.embeddings.lr0 = e.value("lr0", cfg.embeddings.lr0);
    cfg.embeddings.lr_min = e.value("lr_min", cfg.embeddings.lr_min);
    cfg.embeddings.paper_init = e.value("paper_init", cfg.embeddings.paper_init);
  }
  if (j.contains("tsne")) {
    const auto& t = j.at("tsne");
    cfg.tsne_enabled = t.value("enabled", true);
    cfg.tsne.perplexity = t.value("perplexity", cfg.tsne.perplexity);
    cfg.tsne.iters = t.value("iters", cfg.tsne.iters);
    cfg.tsne_max_points = t.value("max_points", cfg.tsne_max_points);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    cfg.sweep_enabled = s.value("enabled", false);
    cfg.sweep.n_train = s.value("n_train", cfg.sweep.n_train);
    cfg.sweep.n_test = s.value("n_test", cfg.sweep.n_test);
    cfg.sweep.epochs = s.value("epochs", cfg.sweep.epochs);
  }
  const auto arch_names = j.contains("ner") && j.at("ner").contains("architectures")
                              ? j.at("ner").at("architectures").get<std::vector<std::string>>()
                              : std::vector<std::string>{"cf-ffn", "ca-ffn", "rnn"};
  if (j.contains("ner") && j.at("ner").contains("embeddings")) {
    const auto which = j.at("ner").at("embeddings").get<std::string>();
    if (which == "cbow")
      cfg.ner_embeddings = EmbedAlgo::Cbow;
    else if (which == "csg")
      cfg.ner_embeddings = EmbedAlgo::Csg;
    else
      throw ConfigInvalid("ner.embeddings must be cbow or csg");
  }
  for (const auto& name : arch_names) {
    NerConfig nc = PipelineConfig::default_arch(ner_arch_from_name(name));
    nc.m = cfg.embeddings.dim;
    if (j.contains("ner") && j.at("ner").contains(name))
      detail::apply_ner_overrides(nc, j.at("ner").at(name));
    cfg.ner_archs.push_back(nc);
  }
  cfg.rel_enabled = !j.contains("rel") || j.at("rel").value("enabled", true);
  const auto rel_names =
      j.contains("rel") && j.at("rel").contains("architectures")
          ? j.at("rel").at("architectures").get<std::vector<std::string>>()
          : std::vector<std::string>{"seq2seq", "encdec-bahdanau", "encdec-luong"};
  for (const auto& name : rel_names) {
    RelJob job;
    job.name = name;
    if (name == "seq2seq")
      job.cfg = RelConfig::seq2seq();
    else if (name == "encdec-bahdanau")
      job.cfg = RelConfig::encdec(AttentionKind::Bahdanau);
    else if (name == "encdec-luong")
      job.cfg = RelConfig::encdec(AttentionKind::Luong);
    else
      throw ConfigInvalid("unknown rel architecture: " + name);
    job.cfg.m = cfg.embeddings.dim;
    if (j.contains("rel") && j.at("rel").contains(name))
      detail::apply_rel_overrides(job.cfg, j.at("rel").at(name));
    else if (j.contains("rel"))
      detail::apply_rel_overrides(job.cfg, j.at("rel"));
    cfg.rel_jobs.push_back(job);
  }
  return cfg;
}

// ---- pipeline ---------------------------------------------------------------------

struct PipelineRun {
  fs::path out;
  std::vector<fs::path> reports;
};

namespace detail {

inline void write_manifest(const fs::path& dir, const std::string& stage,
                           const nlohmann::json& body) {
  nlohmann::json j = body;
  j["stage"] = stage;
  write_file(dir / "manifests" / (stage + ".json"), j.dump(2) + "\n");
}

}  // namespace detail

// Runs every stage under cfg.out_dir. All randomness flows from cfg.seed via
// named streams, and every report is written with fixed number formatting, so
// reruns with the same config are byte-identical.
inline PipelineRun run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  PipelineRun run;
  const fs::path out = cfg.out_dir;
  run.out = out;
  fs::create_directories(out);
  auto report_path = [&](const std::string& rel) {
    auto p = out / rel;
    run.reports.push_back(p);
    return p;
  };

  // -- corpus ------------------------------------------------------------------
  std::vector<std::pair<int, std::vector<AnnotatedDocument>>> corpora;
  if (cfg.synthetic) {
    auto corpus = gen_synthetic(cfg.generator, Rng::derive(cfg.seed, "pipeline/corpus"));
    std::vector<AnnotatedDocument> all = corpus.unannotated;
    all.insert(all.end(), corpus.annotated.begin(), corpus.annotated.end());
    for (auto& d : all) d.source_year = 0;
    corpora.emplace_back(0, std::move(all));
    write_corpus_dir(out / "corpus", corpora[0].second);
  } else {
    for (const auto& [year, dir] : cfg.corpus_dirs)
      corpora.emplace_back(year, read_corpus_dir(dir, year));
  }
  auto pool = dedup_pool(corpora);
  {
    nlohmann::json m;
    m["seed"] = cfg.seed;
    nlohmann::json years = nlohmann::json::array();
    for (const auto& y : pool.per_year)
      years.push_back({{"year", y.year},
                       {"total", y.total},
                       {"unique_unannotated", y.unique_unannotated},
                       {"unique_annotated", y.unique_annotated}});
    m["per_year"] = years;
    m["pool_size"] = pool.size();
    detail::write_manifest(out, "corpus", m);
  }

  // -- split --------------------------------------------------------------------
  auto split = split_corpus(pool, cfg.split, cfg.seed);
  {
    nlohmann::json s;
    s["embedding_train"] = split.embedding_train;
    s["model_train"] = split.model_train;
    s["validation"] = split.validation;
    s["test"] = split.test;
    write_file(out / "split.json", s.dump(2) + "\n");
    detail::write_manifest(out, "split",
                           {{"seed", cfg.seed},
                            {"sizes",
                             {{"model_train", cfg.split.model_train},
                              {"validation", cfg.split.validation},
                              {"test", cfg.split.test}}}});
  }

  // -- preprocess ----------------------------------------------------------------
  // sentence maps come from the raw text (the capital-letter rule needs case)
  std::map<std::string, AnnotatedDocument> norm_docs;
  std::map<std::string, SentenceMap> maps;
  std::vector<AnnotatedDocument> preprocessed_all;
  for (const auto* group : {&pool.unannotated, &pool.annotated})
    for (const auto& doc : *group) {
      maps[doc.doc_id] = split_sentences(doc);
      auto norm = normalize_tokens(doc);
      norm_docs[doc.doc_id] = norm;
      preprocessed_all.push_back(std::move(norm));
    }
  write_corpus_dir(out / "preprocessed", preprocessed_all);

  auto collect = [&](const std::vector<std::string>& ids) {
    std::vector<AnnotatedDocument> docs;
    for (const auto& id : ids) docs.push_back(norm_docs.at(id));
    return docs;
  };
  auto collect_maps = [&](const std::vector<AnnotatedDocument>& docs) {
    std::vector<SentenceMap> out_maps;
    for (const auto& d : docs) out_maps.push_back(maps.at(d.doc_id));
    return out_maps;
  };

  auto embedding_docs = collect(split.embedding_train);
  auto train_docs = collect(split.model_train);
  auto validation_docs = collect(split.validation);
  auto test_docs = collect(split.test);

  {
    std::string csv;
    for (const auto& [tag, docs] :
         std::vector<std::pair<std::string, const std::vector<AnnotatedDocument>*>>{
             {"train", &train_docs}, {"validation", &validation_docs}, {"test", &test_docs}}) {
      auto r = corpus_metrics(*docs);
      csv += "# " + tag + "\n" + metrics_report_csv(r);
      write_file(report_path("reports/corpus_metrics_" + tag + ".json"),
                 metrics_report_json(r).dump(2) + "\n");
    }
    write_file(report_path("reports/corpus_metrics.csv"), csv);
    write_file(report_path("reports/label_metrics.csv"), label_report_csv(label_metrics(train_docs)));
    detail::write_manifest(out, "preprocess", {{"documents", preprocessed_all.size()}});
  }

  // -- embeddings -----------------------------------------------------------------
  auto vocab = build_vocab(embedding_docs, train_docs);
  // CBOW reads embedding + train text, CSG reads the unannotated text only
  std::vector<AnnotatedDocument> cbow_docs = embedding_docs;
  cbow_docs.insert(cbow_docs.end(), train_docs.begin(), train_docs.end());
  auto cbow_windows = make_windows(cbow_docs, collect_maps(cbow_docs), vocab);
  auto csg_windows = make_windows(embedding_docs, collect_maps(embedding_docs), vocab);

  EmbedTrainConfig ecfg = cfg.embeddings;
  ecfg.seed = Rng::derive(cfg.seed, "pipeline/cbow");
  auto E_cbow = train_cbow(cbow_windows, vocab, ecfg);
  ecfg.seed = Rng::derive(cfg.seed, "pipeline/csg");
  auto E_csg = train_csg(csg_windows, vocab, ecfg);
  set_unk_to_mean(E_cbow);
  set_unk_to_mean(E_csg);
  save_embeddings(E_cbow, vocab, (out / "embeddings" / "cbow.txt").string());
  save_embeddings(E_csg, vocab, (out / "embeddings" / "csg.txt").string());
  {
    nlohmann::json m;
    m["vocabulary"] = vocab.size();
    m["cbow_windows"] = cbow_windows.size();
    m["csg_windows"] = csg_windows.size();
    m["oov_validation"] = oov_count(validation_docs, vocab);
    m["oov_test"] = oov_count(test_docs, vocab);
    m["cbow_epoch_loss"] = E_cbow.epoch_loss;
    m["csg_epoch_loss"] = E_csg.epoch_loss;
    detail::write_manifest(out, "embeddings", m);
    write_file(report_path("reports/vocab.json"), m.dump(2) + "\n");
  }

  // -- intrinsic evaluation ----------------------------------------------------------
  auto partition = build_class_partition(train_docs, vocab);
  write_file(report_path("reports/intrinsic.csv"),
             intrinsic_report_csv(intrinsic_eval(E_cbow, E_csg, partition)));

  if (cfg.tsne_enabled) {
    // annotated-class tokens first, then a deterministic slice of the rest
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
      if (static_cast<int>(ids.size()) >= cfg.tsne_max_points) break;
      if (seen.insert(id).second) {
        ids.push_back(id);
        fields.push_back("none");
      }
    }
    for (const auto& [algo, E] :
         std::vector<std::pair<std::string, const EmbeddingMatrix*>>{{"cbow", &E_cbow},
                                                                     {"csg", &E_csg}}) {
      Tensor<double> X({static_cast<std::int64_t>(ids.size()), E->dim});
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int jj = 0; jj < E->dim; ++jj)
          X.at(static_cast<std::int64_t>(i), jj) = E->row(ids[i])[jj];
      TsneConfig tcfg = cfg.tsne;
      tcfg.seed = Rng::derive(cfg.seed, "pipeline/tsne/" + algo);
      auto result = tsne_project(X, tcfg);
      std::vector<std::string> tokens;
      for (int id : ids) tokens.push_back(vocab.token(id));
      write_file(report_path("reports/tsne_" + algo + ".csv"),
                 tsne_csv(tokens, fields, result.coords));
    }
  }

  if (cfg.sweep_enabled) {
    SweepConfig scfg = cfg.sweep;
    scfg.threads = cfg.threads;
    auto report =
        extrinsic_sweep(E_cbow, E_csg, partition, cfg.sweep_points, scfg,
                        Rng::derive(cfg.seed, "pipeline/sweep"));
    write_file(report_path("reports/sweep.csv"), sweep_report_csv(report));
  }

  // -- term classification --------------------------------------------------------
  const EmbeddingMatrix& E_ner = cfg.ner_embeddings == EmbedAlgo::Cbow ? E_cbow : E_csg;
  auto train_maps = collect_maps(train_docs);
  std::string combined = "model,level,field,tp,fp,fn,precision,recall,f1\n";
  for (std::size_t ai = 0; ai < cfg.ner_archs.size(); ++ai) {
    const auto& nc = cfg.ner_archs[ai];
    const std::string name = ner_arch_name(nc.arch);
    NerSystem<float> system(nc, E_ner, vocab,
                            Rng::derive(cfg.seed, "pipeline/ner", ai));
    auto stats = system.train(train_docs, train_maps, Rng::derive(cfg.seed, "pipeline/ner-train", ai));
    system.save((out / "models" / (name + ".bin")).string(), cfg.seed);

    std::vector<std::pair<std::string, PredictedSpan>> rows;
    ConfusionCounts total;
    std::vector<std::vector<PredictedSpan>> per_doc(test_docs.size());
    parallel_for(test_docs.size(), cfg.threads, [&](std::size_t di) {
      per_doc[di] = system.predict_spans(test_docs[di], maps.at(test_docs[di].doc_id));
    });
    for (std::size_t di = 0; di < test_docs.size(); ++di) {
      std::vector<LabeledSpan> spans;
      for (const auto& ps : per_doc[di]) {
        rows.emplace_back(test_docs[di].doc_id, ps);
        spans.push_back({ps.label, ps.span});
      }
      total.add(score_tokens(test_docs[di], spans));
    }
    write_predictions(out / "predictions" / (name + ".jsonl"), rows);
    auto csv = f1_report_csv(name, total);
    write_file(report_path("reports/ner_" + name + ".csv"), csv);
    combined += csv.substr(csv.find('\n') + 1);
    nlohmann::json m;
    m["arch"] = name;
    for (const auto& [tag, st] : stats) m["epoch_loss"][tag] = st.epoch_loss;
    detail::write_manifest(out, "ner-" + name, m);
  }
  write_file(report_path("reports/ner_scores.csv"), combined);

  // -- relation extraction -----------------------------------------------------------
  if (cfg.rel_enabled) {
    auto lookup = build_field_lookup(train_docs);
    auto rel_train = build_rel_instances(train_docs, vocab, 2);
    auto rel_test = build_rel_instances(test_docs, vocab, 2);
    std::string rel_combined = "model,level,field,tp,fp,fn,precision,recall,f1\n";
    for (std::size_t ri = 0; ri < cfg.rel_jobs.size(); ++ri) {
      const auto& job = cfg.rel_jobs[ri];
      RelConfig rc = job.cfg;
      rc.half_lines = 2;
      std::vector<RelationRow> rows;
      std::map<std::string, std::vector<std::pair<const Entry*, ExtractedRelations>>> by_doc;
      if (rc.arch == RelArch::Seq2Seq) {
        Seq2SeqTagger<float> model(rc, E_ner.weights,
                                   Rng::derive(cfg.seed, "pipeline/rel", ri));
        model.train(rel_train, Rng::derive(cfg.seed, "pipeline/rel-train", ri));
        save_rel_model(model, E_ner.weights, vocab,
                       (out / "models" / (job.name + ".bin")).string(), cfg.seed);
        for (const auto& inst : rel_test) {
          const auto& doc = test_docs[inst.doc_index];
          const auto& entry = doc.entries[inst.entry_index];
          auto ex = extract_tagged(model, inst, vocab);
          for (const auto& [f, toks] : ex.tagged)
            rows.push_back({doc.doc_id, inst.entry_index, entry.medication.spans[0],
                            field_name(f), toks, false});
          by_doc[doc.doc_id].emplace_back(&entry, std::move(ex));
        }
      } else {
        EncDecModel<float> model(rc, E_ner.weights,
                                 Rng::derive(cfg.seed, "pipeline/rel", ri));
        model.train(rel_train, Rng::derive(cfg.seed, "pipeline/rel-train", ri));
        save_rel_model(model, E_ner.weights, vocab,
                       (out / "models" / (job.name + ".bin")).string(), cfg.seed);
        for (const auto& inst : rel_test) {
          const auto& doc = test_docs[inst.doc_index];
          const auto& entry = doc.entries[inst.entry_index];
          auto ex = extract_generated(model, inst, vocab);
          auto attributed = attribute_fields(ex.tokens, gold_related_tokens(doc, entry), lookup);
          for (const auto& [f, toks] : attributed)
            rows.push_back({doc.doc_id, inst.entry_index, entry.medication.spans[0],
                            field_name(f), toks, true});
          by_doc[doc.doc_id].emplace_back(&entry, std::move(ex));
        }
      }
      write_relations(out / "relations" / (job.name + ".jsonl"), rows);
      ConfusionCounts total;
      for (const auto& d : test_docs) {
        auto it = by_doc.find(d.doc_id);
        if (it == by_doc.end()) continue;
        std::vector<const Entry*> entries;
        std::vector<ExtractedRelations> extracted;
        for (auto& [entry, ex] : it->second) {
          entries.push_back(entry);
          extracted.push_back(ex);
        }
        total.add(score_relations(d, entries, extracted, lookup));
      }
      auto csv = f1_report_csv(job.name, total);
      write_file(report_path("reports/rel_" + job.name + ".csv"), csv);
      rel_combined += csv.substr(csv.find('\n') + 1);
    }
    write_file(report_path("reports/rel_scores.csv"), rel_combined);
  }

  // -- global manifest -----------------------------------------------------------------
  nlohmann::json manifest;
  manifest["seed"] = cfg.seed;
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& p : run.reports)
    outs.push_back({{"path", fs::relative(p, out).string()}, {"hash", file_hash(p)}});
  manifest["reports"] = outs;
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  return run;
}

}  // namespace medner
