// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/cli/app.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <ostream>
#include <string>
#include <vector>

#include "sanrec/cache/cache.hpp"
#include "sanrec/cli/run_config.hpp"
#include "sanrec/cli/synthetic.hpp"
#include "sanrec/costmodel/cost.hpp"
#include "sanrec/error.hpp"
#include "sanrec/recsys/dataset.hpp"
#include "sanrec/recsys/metrics.hpp"
#include "sanrec/recsys/recommender.hpp"
#include "sanrec/recsys/trainer.hpp"
#include "sanrec/sanet/checkpoint.hpp"

namespace sanrec::cli {
namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

RunConfig resolve(const Flags& flags) {
  RunConfig cfg;
  if (!flags.config.empty()) cfg.load_file(flags.config);
  if (!flags.out.empty()) cfg.out = flags.out;
  if (flags.seed) cfg.seed = *flags.seed;
  for (const auto& kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.apply_text(kv, "--set");
  }
  cfg.validate();
  return cfg;
}

/// Report files start with the command, the config hash and the full config.
class Report {
 public:
  Report(const RunConfig& cfg, const std::string& command) : cfg_(cfg) {
    const auto dir = cfg.resolved_reports();
    std::filesystem::create_directories(dir);
    path_ = dir / (command + ".txt");
    out_.open(path_);
    if (!out_) throw IoError("cannot write report '" + path_.string() + "'");
    out_ << "# sanrec " << command << "\n# config_hash=" << cfg.hash_hex() << "\n";
    std::string line;
    std::istringstream in(cfg.serialize());
    while (std::getline(in, line)) out_ << "# " << line << "\n";
  }
  std::ofstream& stream() { return out_; }

 private:
  const RunConfig& cfg_;
  std::filesystem::path path_;
  std::ofstream out_;
};

void echo_config(std::ostream& out, const RunConfig& cfg, const std::string& command) {
  out << "CONFIG command=" << command << " hash=" << cfg.hash_hex() << " seed=" << cfg.seed << "\n";
  std::string line;
  std::istringstream in(cfg.serialize());
  while (std::getline(in, line)) out << "# " << line << "\n";
}

recsys::InteractionDataset load_data(const RunConfig& cfg) {
  const auto path = cfg.resolved_data();
  if (!std::filesystem::exists(path)) {
    throw InputError("no interaction file at '" + path.string() +
                     "'; run the gen command or set data = PATH");
  }
  return recsys::read_interactions(path);
}

int cmd_gen(const RunConfig& cfg, std::ostream& out) {
  auto data = generate_synthetic(cfg.data);
  const auto path = cfg.resolved_data();
  recsys::write_interactions(path, data);
  std::string line = "GEN users=" + std::to_string(data.users.size()) +
                     " items=" + std::to_string(data.catalog.size()) +
                     " interactions=" + std::to_string(data.interaction_count()) +
                     " path=" + path.string() + " config=" + cfg.hash_hex();
  out << line << "\n";
  Report(cfg, "gen").stream() << line << "\n";
  return kExitOk;
}

int cmd_cache(const RunConfig& cfg, std::ostream& out) {
  auto data = load_data(cfg);
  const auto san = cfg.san();
  Report report(cfg, "cache");
  auto build = [&](const backbone::EncoderConfig& enc_cfg, const sanet::LayerDropPlan& plan,
                   const std::filesystem::path& path) {
    backbone::Encoder<float> enc(enc_cfg);
    const auto layers = plan.cache_layers();
    auto summary = cache::build_cache(enc, std::span<const recsys::ItemId>(data.catalog), layers,
                                      path, cfg.workers);
    std::string kept;
    for (auto l : layers) kept += (kept.empty() ? "" : ",") + std::to_string(l);
    char fp[17];
    std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(summary.fingerprint));
    std::string line = "CACHE encoder=" + backbone::to_string(enc_cfg.modality) +
                       " items=" + std::to_string(summary.item_count) + " layers=" + kept +
                       " bytes=" + std::to_string(summary.bytes) + " fingerprint=" + fp +
                       " path=" + path.string() + " config=" + cfg.hash_hex();
    out << line << "\n";
    report.stream() << line << "\n";
  };
  build(cfg.text, san.text_plan, cfg.resolved_text_cache());
  build(cfg.image, san.image_plan, cfg.resolved_image_cache());
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  auto data = load_data(cfg);
  auto split = recsys::split_leave_one_out(data);
  recsys::Popularity pop(split, data.catalog);
  const auto rcfg = cfg.recommender();
  recsys::Recommender<float> rec(rcfg);
  recsys::Trainer<float> trainer(rec, split, pop, cfg.train_options());

  Report curve(cfg, "loss_curve");
  curve.stream() << "epoch\tloss\n";
  auto result = trainer.run([&](std::size_t epoch, double loss) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu\t%.9g", epoch + 1, loss);
    curve.stream() << buf << "\n";
    std::snprintf(buf, sizeof buf, "EPOCH %zu loss=%.6f", epoch + 1, loss);
    out << buf << "\n";
  });

  const auto ckpt = cfg.resolved_checkpoint();
  const auto& san = rcfg.san;
  sanet::CheckpointInfo info{san.variant, san.text_plan, san.image_plan, rcfg.hash(), 0};
  std::vector<const ad::ParameterStore<float>*> stores;
  for (auto* s : rec.checkpoint_stores()) stores.push_back(s);
  sanet::save_checkpoint<float>(ckpt, info, stores);

  auto valid = recsys::evaluate(rec, split, data.catalog, recsys::EvalTarget::kValidation,
                                cfg.workers);
  char buf[160];
  std::snprintf(buf, sizeof buf, "TRAIN epochs=%zu steps=%zu final_loss=%.6f valid_hr10=%.6f",
                result.epoch_loss.size(), result.steps,
                result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back(), valid.hr10);
  std::string line = std::string(buf) + " checkpoint=" + ckpt.string() + " config=" + cfg.hash_hex();
  out << line << "\n";
  Report(cfg, "train").stream() << line << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const auto ckpt = cfg.resolved_checkpoint();
  if (!std::filesystem::exists(ckpt)) {
    throw InputError("no checkpoint at '" + ckpt.string() + "'; run the train command first");
  }
  auto data = load_data(cfg);
  auto split = recsys::split_leave_one_out(data);
  recsys::Popularity pop(split, data.catalog);
  const auto rcfg = cfg.recommender();
  recsys::Recommender<float> rec(rcfg);
  sanet::load_checkpoint<float>(ckpt, rec.checkpoint_stores(), rcfg.hash());

  auto metrics = recsys::evaluate(rec, split, data.catalog, recsys::EvalTarget::kTest, cfg.workers);
  auto baseline = recsys::popularity_baseline(split, pop);
  const std::string line = metrics.line() + " config=" + cfg.hash_hex();
  char buf[128];
  std::snprintf(buf, sizeof buf, "BASELINE popularity hr10=%.6f ndcg10=%.6f", baseline.hr10,
                baseline.ndcg10);
  const std::string base = std::string(buf) + " config=" + cfg.hash_hex();
  out << line << "\n" << base << "\n";
  Report report(cfg, "metrics");
  report.stream() << line << "\n" << base << "\n";
  return kExitOk;
}

int cmd_profile(const RunConfig& cfg, std::ostream& out) {
  const auto w = cfg.workload();
  std::vector<costmodel::CostReport> reports;
  for (Regime r : kAllRegimes) reports.push_back(costmodel::estimate(w, r));
  auto cmp = costmodel::compare(reports);
  Report report(cfg, "profile");
  out << cmp.table();
  report.stream() << cmp.table();
  for (const auto& r : cmp.reports) {
    const std::string line = r.line() + " config=" + cfg.hash_hex();
    out << line << "\n";
    report.stream() << line << "\n";
  }
  return cmp.has_verdict && !cmp.pass ? kExitVerdictFail : kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"sanrec: decoupled side-network adapters for sequential recommendation"};
  app.require_subcommand(1);
  Flags flags;
  std::uint64_t seed = 0;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&, std::ostream&);
  };
  const std::vector<Command> commands{
      {"gen", "Write a synthetic interaction file", cmd_gen},
      {"cache", "Encode every catalog item once and write the hidden-state caches", cmd_cache},
      {"train", "Train and write a checkpoint and loss curve", cmd_train},
      {"eval", "Score the test split with a trained checkpoint", cmd_eval},
      {"profile", "Per-regime cost estimates and the ordering verdict", cmd_profile},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", flags.config, "key = value config file");
    sub->add_option("--seed", seed, "Run seed");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--set", flags.sets, "Override one key (key=value); repeatable");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    if (subs[i]->count("--seed") > 0) flags.seed = seed;
    try {
      const auto cfg = resolve(flags);
      echo_config(out, cfg, commands[i].name);
      const int code = commands[i].run(cfg, out);
      if (code == kExitVerdictFail) err << "error: cost ordering verdict FAIL\n";
      return code;
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const StalenessError& e) {
      err << "stale artifact: " << e.what() << "\n";
      return kExitStale;
    } catch (const InputError& e) {
      err << "input error: " << e.what() << "\n";
      return kExitInput;
    } catch (const IoError& e) {
      err << "input error: " << e.what() << "\n";
      return kExitInput;
    } catch (const FormatError& e) {
      err << "input error: " << e.what() << "\n";
      return kExitInput;
    } catch (const NotFoundError& e) {
      err << "input error: " << e.what() << "\n";
      return kExitInput;
    } catch (const std::exception& e) {
      err << "internal error: " << e.what() << "\n";
      return kExitInternal;
    }
  }
  return kExitInternal;
}

}  // namespace sanrec::cli
