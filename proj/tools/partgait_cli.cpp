#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "partgait/cliutil/schemas.hpp"
#include "partgait/data/sampler.hpp"
#include "partgait/data/synthetic.hpp"
#include "partgait/evalkit/extract.hpp"
#include "partgait/evalkit/report.hpp"
#include "partgait/finetune/trainer.hpp"
#include "partgait/pretrain/trainer.hpp"

namespace fs = std::filesystem;
using namespace partgait;

namespace {

struct run_paths {
  std::string root, checkpoints, logs, reports;
};

run_paths make_run_dir(const std::string& configured,
                       const std::string& command) {
  std::string root = configured;
  if (root.empty()) {
    if (const char* env = std::getenv("PARTGAIT_RUN_DIR"))
      root = std::string(env) + "/" + command;
    else
      root = command + "_run";
  }
  run_paths paths{root, root + "/checkpoints", root + "/logs",
                  root + "/reports"};
  std::error_code ec;
  for (const auto& dir :
       {paths.root, paths.checkpoints, paths.logs, paths.reports}) {
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create run directory " + dir);
  }
  return paths;
}

void echo_config(const cli::config_map& m, const run_paths& paths) {
  const std::string path = paths.root + "/config.echo";
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << cli::render_config(m);
}

// ---- commands ---------------------------------------------------------

int cmd_gen_data(const cli::config_map& m, const std::string& out_dir) {
  const auto spec = cli::corpus_spec_from_config(m);
  const auto manifest = data::generate_synthetic_corpus(spec, out_dir);
  std::cout << "generated " << manifest.num_sequences << " sequences under "
            << manifest.root_path << "\n";
  return 0;
}

std::string format_record(const pretrain::step_record& rec) {
  std::ostringstream os;
  os.precision(10);
  os << "step=" << rec.step << " lr=" << rec.lr << " ema_m=" << rec.ema_m
     << " loss=" << rec.loss;
  if (rec.has_diversity) os << " diversity=" << rec.diversity;
  return os.str();
}

int cmd_pretrain(const cli::config_map& m, const std::string& resume) {
  const auto cfg = cli::pretrain_from_config(m);
  const auto& manifest_path = cli::get_text(m, "data.manifest");
  if (manifest_path.empty())
    throw bad_config_error("data.manifest is required");
  const auto manifests = data::read_manifest_file(manifest_path);
  const auto pool = data::load_pool(manifests);

  const auto paths = make_run_dir(cli::get_text(m, "run.dir"), "pretrain");
  echo_config(m, paths);
  std::ofstream log(paths.logs + "/train.log",
                    resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw io_error("cannot open " + paths.logs + "/train.log");

  pretrain::pretrainer tr;
  tr.init(cfg);
  if (!resume.empty()) tr.load_checkpoint(resume);

  pretrain::run_options opt;
  opt.checkpoint_dir = paths.checkpoints;
  opt.checkpoint_every = cli::get_int(m, "train.checkpoint_every");
  opt.on_record = [&](const pretrain::step_record& rec) {
    const std::string line = format_record(rec);
    log << line << '\n';
    log.flush();
    std::cout << line << '\n';
  };
  pretrain::run_pretraining(tr, pool, opt);
  std::cout << "final checkpoint: " << paths.checkpoints << "/final.ckpt\n";
  return 0;
}

int cmd_finetune(const cli::config_map& m, const std::string& resume,
                 bool force_probe) {
  auto cfg = cli::finetune_from_config(m);
  if (force_probe) cfg.mode = finetune::tune_mode::linear_probe;
  const auto& corpus_root = cli::get_text(m, "data.corpus");
  if (corpus_root.empty()) throw bad_config_error("data.corpus is required");
  const auto corpus = data::scan_corpus(corpus_root);
  finetune::labeled_sampler sampler;
  sampler.init(corpus);

  const auto paths = make_run_dir(cli::get_text(m, "run.dir"),
                                  force_probe ? "probe" : "finetune");
  echo_config(m, paths);
  std::ofstream log(paths.logs + "/train.log",
                    resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw io_error("cannot open " + paths.logs + "/train.log");

  const int num_classes =
      cfg.task == finetune::task_kind::recognition
          ? sampler.num_subjects()
          : (cfg.task == finetune::task_kind::healthcare_multilabel
                 ? static_cast<int>(cfg.attributes.size())
                 : 2);

  finetune::finetuner<float> tr;
  const auto& ckpt = cli::get_text(m, "task.checkpoint");
  if (!ckpt.empty()) {
    const auto archive = model::tensor_archive::load(ckpt);
    tr.init(cfg, num_classes, &archive);
  } else {
    tr.init(cfg, num_classes, nullptr);
  }
  if (!resume.empty()) tr.restore(model::tensor_archive::load(resume));

  const int64_t checkpoint_every = cli::get_int(m, "train.checkpoint_every");
  while (tr.step_count < cfg.total_steps) {
    const auto batch =
        cfg.task == finetune::task_kind::recognition
            ? sampler.recognition_batch(cfg.subjects_p, cfg.clips_q,
                                        cfg.frames_j, tr.rng)
            : sampler.healthcare_batch(cfg.batch_b, cfg.frames_j,
                                       cfg.attributes, tr.rng);
    const auto rec = tr.step(batch);
    if (!std::isfinite(rec.loss))
      throw numerical_error("loss became non-finite at step " +
                            std::to_string(rec.step));
    std::ostringstream os;
    os.precision(10);
    os << "step=" << rec.step << " lr_factor=" << rec.lr_factor
       << " loss=" << rec.loss << " triplet=" << rec.triplet
       << " ce=" << rec.ce;
    log << os.str() << '\n';
    log.flush();
    std::cout << os.str() << '\n';
    if (checkpoint_every > 0 && tr.step_count % checkpoint_every == 0 &&
        tr.step_count < cfg.total_steps)
      tr.archive().save(
          pretrain::checkpoint_name(paths.checkpoints, tr.step_count));
  }
  tr.archive().save(paths.checkpoints + "/final.ckpt");
  std::cout << "final checkpoint: " << paths.checkpoints << "/final.ckpt\n";
  return 0;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

data::corpus_index filter_corpus(const data::corpus_index& corpus,
                                 const std::vector<std::string>& seq_names) {
  if (seq_names.empty()) return corpus;
  data::corpus_index out;
  out.root = corpus.root;
  out.labels = corpus.labels;
  for (const auto& seq : corpus.sequences) {
    const auto slash = seq.sequence_id.find('/');
    const std::string tail = seq.sequence_id.substr(slash + 1);
    for (const auto& want : seq_names)
      if (tail == want) {
        out.sequences.push_back(seq);
        break;
      }
  }
  return out;
}

evalkit::retrieval_block score_retrieval(const evalkit::embedding_set& probe,
                                         const evalkit::embedding_set& gallery,
                                         const std::vector<int>& rank_ks,
                                         bool allow_self_match) {
  const auto dist =
      evalkit::pairwise_distance(probe.embeddings, gallery.embeddings);
  const auto* probe_ids = allow_self_match ? nullptr : &probe.sequence_ids;
  const auto* gallery_ids = allow_self_match ? nullptr : &gallery.sequence_ids;
  evalkit::retrieval_block block;
  const auto hits =
      evalkit::cmc_rank_k(dist, probe.subject_labels, gallery.subject_labels,
                          rank_ks, probe_ids, gallery_ids);
  for (std::size_t i = 0; i < rank_ks.size(); ++i)
    block.rank_k[rank_ks[i]] = hits[i];
  block.mean_ap = evalkit::mean_ap(dist, probe.subject_labels,
                                   gallery.subject_labels, probe_ids,
                                   gallery_ids);
  block.mean_inp = evalkit::mean_inp(dist, probe.subject_labels,
                                     gallery.subject_labels, probe_ids,
                                     gallery_ids);
  return block;
}

int cmd_eval(const cli::config_map& m, const std::string& mode_flag) {
  const auto& ckpt_path = cli::get_text(m, "eval.checkpoint");
  const auto& corpus_root = cli::get_text(m, "eval.corpus");
  if (ckpt_path.empty() || corpus_root.empty())
    throw bad_config_error("eval.checkpoint and eval.corpus are required");
  const std::string mode =
      mode_flag.empty() ? cli::get_text(m, "eval.mode") : mode_flag;
  if (mode != "zero_shot" && mode != "finetuned")
    throw bad_config_error("eval mode must be zero_shot or finetuned");

  const auto corpus = data::scan_corpus(corpus_root);
  const auto archive = model::tensor_archive::load(ckpt_path);
  const auto meta = nlohmann::json::parse(archive.meta_json);
  const std::string kind = meta.value("kind", "");

  std::function<tensorf(const tensorf&)> embed;
  pretrain::pretrainer pt;
  finetune::finetuner<float> ft;
  if (kind == "pretrain") {
    if (mode == "finetuned")
      throw bad_config_error("finetuned mode needs a finetune checkpoint");
    auto cfg = pretrain::pretrain_config{};
    cfg.tower = pretrain::tower_from_json(meta.at("tower"));
    pt.init(cfg);
    pt.restore(archive);
    embed = [&pt](const tensorf& clip) {
      auto feat = pt.pair.teacher.encoder.forward(clip, nullptr, false);
      auto pooled = model::gait_pool<float>::forward(feat, nullptr);
      auto k = pt.pair.teacher.projector.forward(pooled, nullptr, false);
      return pt.pair.teacher.predictor.forward(k, nullptr, false);
    };
  } else if (kind == "finetune") {
    finetune::finetune_config cfg;
    cfg.tower = pretrain::tower_from_json(meta.at("tower"));
    cfg.task = static_cast<finetune::task_kind>(meta.at("task").get<int>());
    cfg.mode = static_cast<finetune::tune_mode>(meta.at("mode").get<int>());
    ft.init(cfg, meta.at("num_classes").get<int>(), nullptr);
    ft.restore(archive);
    if (mode == "zero_shot") {
      // Pretrained feature path of the adapted trunk: projector output.
      embed = [&ft](const tensorf& clip) {
        const auto schedule =
            parts::assign_part_schedule(clip.dim(0), {1}, clip.dim(3));
        auto x = clip;
        return ft.net.trunk_forward(x, schedule, nullptr, false);
      };
    } else {
      embed = [&ft](const tensorf& clip) { return ft.eval_embedding(clip); };
    }
  } else {
    throw checkpoint_mismatch_error("unrecognized checkpoint kind '" + kind +
                                    "'");
  }

  const auto gallery_corpus =
      filter_corpus(corpus, split_csv(cli::get_text(m, "eval.gallery_seqs")));
  const auto probe_corpus =
      filter_corpus(corpus, split_csv(cli::get_text(m, "eval.probe_seqs")));
  const auto gallery = evalkit::extract_embeddings(gallery_corpus, embed);
  const auto probe = evalkit::extract_embeddings(probe_corpus, embed);

  const auto rank_ks = cli::get_int_list(m, "eval.rank_ks");
  const bool allow_self = cli::get_bool(m, "eval.allow_self_match");
  evalkit::evaluation_report report;
  report.has_retrieval = true;
  report.retrieval = score_retrieval(probe, gallery, rank_ks, allow_self);

  const auto paths = make_run_dir(cli::get_text(m, "run.dir"), "eval");
  echo_config(m, paths);
  const std::string report_path = paths.reports + "/eval.json";
  evalkit::emit_report(report, report_path);

  std::ostringstream os;
  os.precision(10);
  for (const auto& [k, v] : report.retrieval.rank_k)
    os << "rank_" << k << "=" << v << " ";
  os << "mAP=" << report.retrieval.mean_ap
     << " mINP=" << report.retrieval.mean_inp;
  std::cout << os.str() << "\nreport: " << report_path << "\n";
  return 0;
}

int cmd_diag(const cli::config_map& m) {
  const auto& ckpt_path = cli::get_text(m, "diag.checkpoint");
  const auto& corpus_root = cli::get_text(m, "diag.corpus");
  if (ckpt_path.empty() || corpus_root.empty())
    throw bad_config_error("diag.checkpoint and diag.corpus are required");
  auto corpus = data::scan_corpus(corpus_root);
  const auto max_sequences =
      static_cast<std::size_t>(cli::get_int(m, "diag.max_sequences"));
  if (corpus.sequences.size() > max_sequences)
    corpus.sequences.resize(max_sequences);

  const auto archive = model::tensor_archive::load(ckpt_path);
  const auto meta = nlohmann::json::parse(archive.meta_json);
  if (meta.value("kind", "") != "pretrain")
    throw checkpoint_mismatch_error("diag expects a pretrain checkpoint");
  pretrain::pretrainer pt;
  auto cfg = pretrain::pretrain_config{};
  cfg.tower = pretrain::tower_from_json(meta.at("tower"));
  pt.init(cfg);
  pt.restore(archive);

  const auto set = evalkit::extract_embeddings(corpus, [&](const tensorf& clip) {
    auto feat = pt.pair.teacher.encoder.forward(clip, nullptr, false);
    auto pooled = model::gait_pool<float>::forward(feat, nullptr);
    return pt.pair.teacher.projector.forward(pooled, nullptr, false);
  });
  const auto div = evalkit::part_diversity(set.embeddings);

  evalkit::evaluation_report report;
  report.has_diversity = true;
  report.diversity = div;
  const auto paths = make_run_dir(cli::get_text(m, "run.dir"), "diag");
  echo_config(m, paths);
  const std::string report_path = paths.reports + "/diversity.json";
  evalkit::emit_report(report, report_path);
  std::cout.precision(10);
  std::cout << "diversity=" << div.diversity << "\nreport: " << report_path
            << "\n";
  return 0;
}

struct common_flags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string resume;
  std::string mode;
  std::optional<int64_t> seed;
};

void attach_common(CLI::App* cmd, common_flags& flags, bool with_config) {
  if (with_config)
    cmd->add_option("--config", flags.config_path, "config file");
  cmd->add_option("--override", flags.overrides,
                  "config override section.key=value (repeatable)");
  cmd->add_option("--resume", flags.resume, "checkpoint to resume from");
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--mode", flags.mode, "mode override (command-specific)");
}

cli::config_map resolve_config(const cli::config_schema& schema,
                               const common_flags& flags,
                               const std::string& seed_key) {
  cli::config_map file_values;
  if (!flags.config_path.empty())
    file_values = cli::read_config_file(flags.config_path);
  auto overrides = flags.overrides;
  if (flags.seed) {
    if (seed_key.empty())
      throw bad_config_error("--seed is not accepted by this command");
    overrides.push_back(seed_key + "=" + std::to_string(*flags.seed));
  }
  return schema.resolve(file_values, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"part-aware gait pretraining toolkit"};
  app.require_subcommand(1);

  common_flags gen_flags, pre_flags, ft_flags, probe_flags, eval_flags,
      diag_flags;
  std::string gen_out;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  attach_common(gen, gen_flags, true);
  gen->add_option("--out", gen_out, "output corpus directory")->required();

  auto* pre = app.add_subcommand("pretrain", "self-supervised pretraining");
  attach_common(pre, pre_flags, true);

  auto* ft = app.add_subcommand("finetune", "task fine-tuning");
  attach_common(ft, ft_flags, true);

  auto* probe = app.add_subcommand("probe", "linear probe (frozen trunk)");
  attach_common(probe, probe_flags, true);

  auto* ev = app.add_subcommand("eval", "retrieval evaluation");
  attach_common(ev, eval_flags, true);

  auto* diag = app.add_subcommand("diag", "part-diversity diagnostic");
  attach_common(diag, diag_flags, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_data(resolve_config(cli::gen_schema(), gen_flags, "corpus.seed"),
                          gen_out);
    if (pre->parsed())
      return cmd_pretrain(
          resolve_config(cli::pretrain_schema(), pre_flags, "train.seed"),
          pre_flags.resume);
    if (ft->parsed())
      return cmd_finetune(
          resolve_config(cli::finetune_schema(), ft_flags, "train.seed"),
          ft_flags.resume, false);
    if (probe->parsed())
      return cmd_finetune(
          resolve_config(cli::finetune_schema(), probe_flags, "train.seed"),
          probe_flags.resume, true);
    if (ev->parsed())
      return cmd_eval(resolve_config(cli::eval_schema(), eval_flags, ""),
                      eval_flags.mode);
    if (diag->parsed())
      return cmd_diag(resolve_config(cli::diag_schema(), diag_flags, ""));
  } catch (const io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
