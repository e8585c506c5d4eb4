#include "citl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "citl/errors.hpp"

namespace citl {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

void check_split_name(const std::string& split) {
  if (split != "seen" && split != "unseen") throw ConfigError("split must be seen or unseen, got '" + split + "'");
}

}  // namespace

const std::vector<PreparedEpisode>& Workspace::prepared(const std::string& split) const {
  check_split_name(split);
  return split == "seen" ? seen_prepared : unseen_prepared;
}

AugmenterConfig make_augmenter(const RunConfig& cfg) {
  AugmenterConfig aug;
  aug.synonym_lexicon = cfg.lexicon_path.empty() ? default_lexicon() : load_lexicon(cfg.lexicon_path);
  aug.normalization_table = default_normalization_table();
  aug.rng_seed = cfg.gen.seed;
  return aug;
}

std::unique_ptr<Workspace> load_workspace(const RunConfig& cfg, const Vocabulary* vocab) {
  auto ws = std::make_unique<Workspace>();
  if (!fs::exists(cfg.data_dir / "seen") || !fs::exists(cfg.data_dir / "unseen"))
    throw std::runtime_error("dataset not found under " + cfg.data_dir.string() + " (run gen first)");
  ws->seen = read_split(cfg.data_dir / "seen", "seen");
  ws->unseen = read_split(cfg.data_dir / "unseen", "unseen");
  ws->aug = make_augmenter(cfg);
  ws->vocab = vocab ? *vocab : build_vocabulary(ws->seen, ws->aug);
  ws->shape = ModelShape{cfg.dim, ws->vocab.size(), cfg.gen.landmark_vocab_size, cfg.max_tokens};
  ws->seen_prepared = prepare_split(ws->seen, ws->vocab, ws->aug, cfg.prep);
  ws->unseen_prepared = prepare_split(ws->unseen, ws->vocab, ws->aug, cfg.prep);
  return ws;
}

GenResult cmd_gen(const RunConfig& cfg, const fs::path& dir) {
  GenResult r{dir.empty() ? cfg.data_dir : dir, 0, 0};
  for (const char* name : {"seen", "unseen"}) {
    const Split split = generate_split(name, cfg.gen);
    write_split(r.dir / name, split);
    r.graphs += split.graphs.size();
    r.episodes += split.episodes.size();
  }
  auto out = open_out(r.dir / "lexicon.json");
  out << nlohmann::json(default_lexicon()).dump(2) << '\n';
  persist_resolved_config(r.dir, cfg);
  return r;
}

namespace {

void write_eval_row(std::ostream& out, std::size_t step, const std::string& split, const MetricReport& m) {
  out << step << ',' << split << ',';
  write_metric_csv_row(out, m);
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg, std::ostream* progress) {
  const auto ws = load_workspace(cfg);
  TrainResult result;
  result.config_hash = persist_resolved_config(cfg.out_dir, cfg);

  auto log = open_out(cfg.out_dir / "train_log.csv");
  write_train_log_header(log);
  auto eval_log = open_out(cfg.out_dir / "eval_log.csv");
  eval_log << "step,split,";
  write_metric_csv_header(eval_log);

  const auto on_step = [&](std::size_t step, const LossBreakdown& l, const EncoderParams& params) {
    write_train_log_row(log, step, l);
    const std::size_t done = step + 1;
    if (cfg.eval_every > 0 && (done % static_cast<std::size_t>(cfg.eval_every) == 0 || done == cfg.train.train_steps)) {
      const auto s = evaluate(params, ws->seen_prepared, cfg.train);
      const auto u = evaluate(params, ws->unseen_prepared, cfg.train);
      write_eval_row(eval_log, done, "seen", s.mean);
      write_eval_row(eval_log, done, "unseen", u.mean);
      if (progress)
        *progress << "step " << done << "  loss " << l.total << "  SR seen " << s.mean.sr << "  SR unseen "
                  << u.mean.sr << std::endl;
    }
  };
  auto run = train(ws->shape, ws->seen_prepared, cfg.train, false, on_step);

  result.checkpoint = cfg.out_dir / "checkpoint.json";
  save_checkpoint(result.checkpoint, Checkpoint{ws->vocab, run.params});
  result.seen = evaluate(run.params, ws->seen_prepared, cfg.train);
  result.unseen = evaluate(run.params, ws->unseen_prepared, cfg.train);
  auto s = open_out(cfg.out_dir / "eval_seen.csv");
  write_eval_csv(s, result.seen);
  auto u = open_out(cfg.out_dir / "eval_unseen.csv");
  write_eval_csv(u, result.unseen);
  return result;
}

EvalResult cmd_eval(const RunConfig& cfg, const std::string& split) {
  check_split_name(split);
  const fs::path ckpt_path = cfg.checkpoint.empty() ? cfg.out_dir / "checkpoint.json" : cfg.checkpoint;
  if (!fs::exists(ckpt_path)) throw std::runtime_error("checkpoint not found: " + ckpt_path.string());
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto ws = load_workspace(cfg, &ckpt.vocab);
  if (ws->shape.landmark_count != ckpt.params.shape().landmark_count)
    throw ConfigError("checkpoint landmark count does not match the dataset");
  const auto r = evaluate(ckpt.params, ws->prepared(split), cfg.train);

  const std::string hash = persist_resolved_config(cfg.out_dir, cfg);
  auto out = open_out(cfg.out_dir / ("eval_" + split + ".csv"));
  write_eval_csv(out, r);
  auto summary = open_out(cfg.out_dir / ("eval_" + split + "_summary.json"));
  summary << nlohmann::json{{"split", split},
                            {"checkpoint", ckpt_path.string()},
                            {"config_hash", hash},
                            {"episodes", r.episodes.size()},
                            {"TL", r.mean.tl},
                            {"NE", r.mean.ne},
                            {"SR", r.mean.sr},
                            {"SPL", r.mean.spl},
                            {"nDTW", r.mean.ndtw},
                            {"CLS", r.mean.cls},
                            {"SDTW", r.mean.sdtw}}
                 .dump(2)
          << '\n';
  return r;
}

TrainConfig AblationRow::apply(TrainConfig cfg) const {
  cfg.lambda1_traj = lambda1;
  cfg.lambda2_instr = lambda2;
  cfg.lambda3_subinstr = lambda3;
  cfg.contrast_loss = loss;
  cfg.use_bank = use_bank;
  cfg.use_mining = use_mining;
  return cfg;
}

std::string AblationRow::key() const {
  std::ostringstream k;
  k << std::setprecision(17) << lambda1 << '/' << lambda2 << '/' << lambda3;
  // Loss kind and switches only matter when some contrastive term is on.
  if (lambda1 > 0 || lambda2 > 0 || lambda3 > 0)
    k << '/' << (loss == ContrastLoss::circle ? "circle" : "nce") << '/' << use_bank << '/' << use_mining;
  return k.str();
}

AblationMatrix default_ablation_matrix(double l1, double l2, double l3) {
  const auto nce = ContrastLoss::info_nce;
  const auto circ = ContrastLoss::circle;
  return AblationMatrix{{
      {"table5", "t5_1", "InfoNCE + bank", l1, 0, 0, nce, true, false},
      {"table5", "t5_2", "InfoNCE + bank + mining", l1, 0, 0, nce, true, true},
      {"table5", "t5_3", "circle", l1, 0, 0, circ, false, false},
      {"table5", "t5_4", "circle + bank", l1, 0, 0, circ, true, false},
      {"table5", "t5_5", "circle + mining", l1, 0, 0, circ, false, true},
      {"table5", "t5_6", "circle + bank + mining", l1, 0, 0, circ, true, true},
      {"table6", "baseline", "IL + RL only", 0, 0, 0, circ, true, true},
      {"table6", "traj_only", "trajectory loss", l1, 0, 0, circ, true, true},
      {"table6", "instr_only", "instruction loss", 0, l2, 0, circ, true, true},
      {"table6", "subinstr_only", "sub-instruction loss", 0, 0, l3, circ, true, true},
      {"table6", "full", "all three losses", l1, l2, l3, circ, true, true},
  }};
}

double RowSummary::sr_se() const {
  return runs.empty() ? 0.0 : sr_std / std::sqrt(static_cast<double>(runs.size()));
}

const RowSummary& AblationReport::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.row.name == name) return r;
  throw std::out_of_range("no ablation row named " + name);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

struct Job {
  std::string key;
  TrainConfig cfg;
};

}  // namespace

AblationReport cmd_ablate(const RunConfig& cfg, const AblationMatrix& matrix, std::ostream* progress) {
  const auto t0 = std::chrono::steady_clock::now();
  if (matrix.rows.empty()) throw ConfigError("ablation matrix is empty");
  const auto ws = load_workspace(cfg);
  AblationReport report;
  report.config_hash = persist_resolved_config(cfg.out_dir, cfg);

  // One job per distinct (row key, seed).
  std::vector<Job> jobs;
  std::map<std::string, std::vector<std::size_t>> jobs_by_key;
  for (const auto& row : matrix.rows) {
    const std::string k = row.key();
    if (jobs_by_key.count(k)) continue;
    for (int s = 0; s < cfg.ablation_seeds; ++s) {
      TrainConfig tc = row.apply(cfg.train);
      tc.seed = cfg.train.seed + static_cast<std::uint64_t>(s);
      jobs_by_key[k].push_back(jobs.size());
      jobs.push_back({k, tc});
    }
  }

  std::vector<SeedOutcome> outcomes(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const auto run = train(ws->shape, ws->seen_prepared, jobs[i].cfg);
        outcomes[i] = {jobs[i].cfg.seed, evaluate(run.params, ws->seen_prepared, jobs[i].cfg).mean,
                       evaluate(run.params, ws->unseen_prepared, jobs[i].cfg).mean};
        if (progress) {
          std::lock_guard lock(io);
          *progress << "[" << i + 1 << "/" << jobs.size() << "] " << jobs[i].key << " seed " << jobs[i].cfg.seed
                    << "  unseen SR " << outcomes[i].unseen.sr << std::endl;
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads =
      std::min<std::size_t>(jobs.size(), cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& row : matrix.rows) {
    RowSummary s{row, {}};
    std::vector<double> sr, spl;
    for (std::size_t i : jobs_by_key.at(row.key())) {
      s.runs.push_back(outcomes[i]);
      sr.push_back(outcomes[i].unseen.sr);
      spl.push_back(outcomes[i].unseen.spl);
    }
    std::tie(s.sr_mean, s.sr_std) = mean_std(sr);
    std::tie(s.spl_mean, s.spl_std) = mean_std(spl);
    report.rows.push_back(std::move(s));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  auto csv = open_out(cfg.out_dir / "ablation.csv");
  csv << "table,row,description,seeds,SR_mean,SR_std,SPL_mean,SPL_std,config_hash\n";
  for (const auto& r : report.rows)
    csv << r.row.table << ',' << r.row.name << ',' << r.row.description << ',' << r.runs.size() << ',' << r.sr_mean
        << ',' << r.sr_std << ',' << r.spl_mean << ',' << r.spl_std << ',' << report.config_hash << '\n';
  auto runs = open_out(cfg.out_dir / "ablation_runs.csv");
  runs << "row,seed,split,";
  write_metric_csv_header(runs);
  for (const auto& r : report.rows)
    for (const auto& o : r.runs) {
      runs << r.row.name << ',' << o.seed << ",seen,";
      write_metric_csv_row(runs, o.seen);
      runs << r.row.name << ',' << o.seed << ",unseen,";
      write_metric_csv_row(runs, o.unseen);
    }
  auto txt = open_out(cfg.out_dir / "ablation.txt");
  write_ablation_text(txt, report);
  return report;
}

void write_ablation_text(std::ostream& out, const AblationReport& report) {
  const std::size_t seeds = report.rows.empty() ? 0 : report.rows.front().runs.size();
  out << "Unseen split, mean +- stdev over " << seeds << " seeds (config " << report.config_hash << ")\n";
  std::string table;
  for (const auto& r : report.rows) {
    if (r.row.table != table) {
      table = r.row.table;
      out << '\n' << table << '\n';
      out << std::left << std::setw(16) << "row" << std::setw(28) << "configuration" << std::setw(20) << "SR"
          << "SPL\n";
    }
    std::ostringstream sr, spl;
    sr << std::fixed << std::setprecision(3) << r.sr_mean << " +- " << r.sr_std;
    spl << std::fixed << std::setprecision(3) << r.spl_mean << " +- " << r.spl_std;
    out << std::left << std::setw(16) << r.row.name << std::setw(28) << r.row.description << std::setw(20) << sr.str()
        << spl.str() << '\n';
  }
}

}  // namespace citl
