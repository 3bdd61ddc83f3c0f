// cotox: prepare contexts, run prompts, score predictions.
//
//   cotox prepare      --config run.toml
//   cotox predict      --config run.toml --strategy cotox --format iupac
//   cotox evaluate     --config run.toml [predictions.jsonl ...] [--out dir]
//   cotox gsea-context --config run.toml
//
// Exit status: 0 ok, 1 configuration, 2 data, 3 provider.

#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cotox/config.hpp"
#include "cotox/error.hpp"
#include "cotox/http_live.hpp"
#include "cotox/pipeline.hpp"

namespace {

int exit_code(cotox::ErrorCategory c) {
  switch (c) {
    case cotox::ErrorCategory::Config: return 1;
    case cotox::ErrorCategory::Data: return 2;
    case cotox::ErrorCategory::Provider: return 3;
  }
  return 2;
}

struct Options {
  std::string config;
  std::optional<std::string> strategy;
  std::optional<std::string> format;
  std::optional<std::string> out;
  std::vector<std::string> predictions;
  bool quiet = false;
};

cotox::config::PipelineConfig load(const Options& o) {
  auto cfg = cotox::config::load_config(o.config);
  try {
    if (o.strategy) cfg.strategy = cotox::prompt::parse_strategy(*o.strategy);
    if (o.format) cfg.format = cotox::prompt::parse_format(*o.format);
  } catch (const cotox::Error& e) {
    throw cotox::Error(cotox::ErrorCode::ConfigError, e.detail());
  }
  if (o.strategy && o.format) cotox::prompt::check_combination(cfg.strategy, cfg.format);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Organ toxicity prediction from structure and biological context"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Pipeline config file")->required();
    sub->add_option("--strategy", o.strategy, "cotox|cot|fewshot|zeroshot|bioprocess-cot");
    sub->add_option("--format", o.format, "iupac|smiles");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_flag("-q,--quiet", o.quiet, "No progress messages");
  };
  auto* prepare = app.add_subcommand("prepare", "Build filtered biological contexts and the dataset split");
  auto* predict = app.add_subcommand("predict", "Prompt the model for every test compound");
  auto* evaluate = app.add_subcommand("evaluate", "Score prediction files and write report.md");
  auto* gsea = app.add_subcommand("gsea-context", "Derive a context from a ranked gene list");
  for (auto* s : {prepare, predict, evaluate, gsea}) common(s);
  evaluate->add_option("predictions", o.predictions, "predictions.jsonl files (default: the configured run)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = load(o);
    cotox::pipeline::Services svc;
    svc.network = std::make_shared<cotox::http::LiveClient>();
    svc.log = o.quiet ? nullptr : &std::cerr;

    if (prepare->parsed()) {
      if (o.out) cfg.context_store = std::filesystem::path(*o.out) / cfg.context_store.filename();
      cotox::pipeline::cmd_prepare(cfg, svc);
    } else if (predict->parsed()) {
      if (o.out) cfg.output_dir = *o.out;
      const auto sum = cotox::pipeline::cmd_predict(cfg, svc);
      std::cout << (sum.run_dir / "predictions.jsonl").string() << '\n';
    } else if (evaluate->parsed()) {
      std::vector<std::filesystem::path> files(o.predictions.begin(), o.predictions.end());
      std::optional<std::filesystem::path> out;
      if (o.out) out = *o.out;
      const auto sum = cotox::pipeline::cmd_evaluate(cfg, files, out, svc);
      std::cout << sum.report_path.string() << '\n';
    } else if (gsea->parsed()) {
      if (o.out) cfg.output_dir = *o.out;
      cotox::pipeline::cmd_gsea_context(cfg, svc);
    }
  } catch (const cotox::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
