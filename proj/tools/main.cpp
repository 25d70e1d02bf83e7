// semcex: command-line driver for the semantic counterexample toolkit.
#include <functional>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include <semcex/error.hpp>

#include "commands.hpp"

namespace {

using semcex::cli::Context;
using semcex::cli::Options;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const semcex::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const semcex::MissingInputError*>(&e)) return 3;
  if (dynamic_cast<const semcex::IoError*>(&e)) return 4;
  if (dynamic_cast<const semcex::DomainError*>(&e) || dynamic_cast<const semcex::DimensionError*>(&e) ||
      dynamic_cast<const semcex::StructuralError*>(&e) || dynamic_cast<const semcex::DegenerateGeometryError*>(&e)) {
    return 5;
  }
  return 1;
}

void report_error(const std::string& command, const std::exception& e, int code) {
  nlohmann::ordered_json j;
  j["error"] = e.what();
  j["command"] = command;
  j["exit_code"] = code;
  if (const auto* m = dynamic_cast<const semcex::MissingInputError*>(&e)) j["path"] = m->path();
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic counterexample toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "semcex 0.1.0");

  Options opt;
  std::uint64_t seed = 0;
  std::string config, out;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Workspace root (default $SEMCEX_WORKSPACE or ./workspace)");
    sub->add_option("--seed", seed, "Dataset seed override");
    sub->add_option("--workers", opt.workers, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto str_opt = [](CLI::App* sub, const std::string& name, std::optional<std::string>& target,
                    const std::string& help) {
    return sub->add_option_function<std::string>(name, [&target](const std::string& v) { target = v; }, help);
  };

  using Handler = std::function<int(const Context&)>;
  std::vector<std::pair<CLI::App*, Handler>> commands;
  auto add = [&](const std::string& name, const std::string& help, Handler h) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    commands.emplace_back(sub, std::move(h));
    return sub;
  };

  add("gen-data", "Generate and render the dataset", semcex::cli::cmd_gen_data);
  auto* train = add("train", "Train a classifier", semcex::cli::cmd_train);
  str_opt(train, "--arch", opt.arch, "benign (default) or transfer");
  add("eval", "Accuracy on clean and stored counterexample sets", semcex::cli::cmd_eval);
  auto* attack = add("attack", "Run a gradient attack on the test points", semcex::cli::cmd_attack);
  str_opt(attack, "--method", opt.method, "sifgsm, sgd or scw")->required();
  str_opt(attack, "--groups", opt.groups, "Active parameter groups, comma separated");
  auto* sample = add("sample", "Run a sampling baseline on the test points", semcex::cli::cmd_sample);
  str_opt(sample, "--sampler", opt.sampler, "random or halton");
  str_opt(sample, "--range", opt.range, "large or small");
  str_opt(sample, "--groups", opt.groups, "Active parameter groups, comma separated");
  auto* worth = add("info-worth", "Information worth of the stored sets", semcex::cli::cmd_info_worth);
  str_opt(worth, "--membership", opt.membership, "binary or fractional");
  str_opt(worth, "--method", opt.method, "Restrict to one attack");
  auto* augment = add("augment", "Attack the training points chosen for replacement", semcex::cli::cmd_augment);
  str_opt(augment, "--method", opt.method, "sifgsm, sgd or scw")->required();
  auto* retrain = add("retrain", "Retrain on the augmented training set", semcex::cli::cmd_retrain);
  str_opt(retrain, "--method", opt.method, "sifgsm, sgd or scw")->required();
  auto* matrix = add("robustness-matrix", "Accuracy of every model under every attack",
                     semcex::cli::cmd_robustness_matrix);
  str_opt(matrix, "--mode", opt.mode, "fixed (default) or regenerated");
  add("transfer", "Evaluate stored counterexamples on the second architecture", semcex::cli::cmd_transfer);
  add("gradcheck", "Finite-difference gradient checks", semcex::cli::cmd_gradcheck);
  add("report", "Compose the stored tables into one Markdown report", semcex::cli::cmd_report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto& [sub, handler] : commands) {
    if (!sub->parsed()) continue;
    if (!config.empty()) opt.config_path = config;
    if (!out.empty()) opt.out = out;
    if (sub->count("--seed")) opt.seed = seed;
    try {
      return handler(semcex::cli::make_context(opt));
    } catch (const std::exception& e) {
      const int code = exit_code_for(e);
      report_error(sub->get_name(), e, code);
      return code;
    }
  }
  return 1;
}
