// citl: dataset generation, training, evaluation, ablation and self-checks.
// Exit codes: 0 success, 1 failure, 2 configuration error.

#include <cstdint>
#include <exception>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "citl/errors.hpp"
#include "citl/harness.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string split = "unseen";
};

citl::RunConfig resolve(const Flags& f) {
  citl::RunConfig cfg = f.config.empty() ? citl::RunConfig{} : citl::RunConfig::load(f.config);
  if (f.seed) {
    cfg.gen.seed = *f.seed;
    cfg.train.seed = *f.seed;
  }
  if (!f.out.empty()) cfg.out_dir = f.out;
  cfg.validate();
  return cfg;
}

void print_metrics(const std::string& label, const citl::MetricReport& m) {
  std::cout << std::fixed << std::setprecision(4) << label << "  TL " << m.tl << "  NE " << m.ne << "  SR " << m.sr
            << "  SPL " << m.spl << "  nDTW " << m.ndtw << "  CLS " << m.cls << "  SDTW " << m.sdtw << '\n';
}

int run(const std::string& cmd, const Flags& f) {
  const citl::RunConfig cfg = resolve(f);
  if (cmd == "gen") {
    const auto r = citl::cmd_gen(cfg, f.out.empty() ? cfg.data_dir : std::filesystem::path(f.out));
    std::cout << "wrote " << r.graphs << " graphs and " << r.episodes << " episodes to " << r.dir.string() << '\n';
  } else if (cmd == "train") {
    const auto r = citl::cmd_train(cfg, &std::cout);
    print_metrics("seen  ", r.seen.mean);
    print_metrics("unseen", r.unseen.mean);
    std::cout << "checkpoint " << r.checkpoint.string() << " (config " << r.config_hash << ")\n";
  } else if (cmd == "eval") {
    print_metrics(f.split, citl::cmd_eval(cfg, f.split).mean);
  } else if (cmd == "ablate") {
    const auto m = citl::default_ablation_matrix(cfg.train.lambda1_traj, cfg.train.lambda2_instr,
                                                 cfg.train.lambda3_subinstr);
    const auto report = citl::cmd_ablate(cfg, m, &std::cerr);
    citl::write_ablation_text(std::cout, report);
  } else if (cmd == "check") {
    bool ok = true;
    for (const auto& item : citl::cmd_check(cfg.train.seed)) {
      std::cout << (item.passed ? "PASS  " : "FAIL  ") << item.name << "  (" << item.detail << ")\n";
      ok = ok && item.passed;
    }
    return ok ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive instruction-trajectory learning on synthetic navigation graphs"};
  app.require_subcommand(1, 1);
  Flags flags;
  for (const auto& [name, help] : std::initializer_list<std::pair<const char*, const char*>>{
           {"gen", "generate the synthetic seen/unseen suite"},
           {"train", "train an agent and write checkpoint and logs"},
           {"eval", "greedy evaluation of a checkpoint"},
           {"ablate", "train the ablation matrix and report SR/SPL"},
           {"check", "run the oracle self-check suite"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON config file");
    sub->add_option("--seed", flags.seed, "overrides the generator and training seeds");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--split", flags.split, "seen or unseen")->check(CLI::IsMember({"seen", "unseen"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return run(cmd, flags);
  } catch (const citl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const citl::NonFiniteError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
