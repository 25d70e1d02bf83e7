#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <semcex/dataset.hpp>

#include "run_config.hpp"

namespace semcex::cli {

/// workspace/{dataset, models, records, reports, galleries}
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path dataset() const { return root / "dataset"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path records() const { return root / "records"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path galleries() const { return root / "galleries"; }

  /// --out if given, else $SEMCEX_WORKSPACE, else ./workspace.
  static Workspace resolve(const std::optional<std::string>& out);
};

/// Flags shared by the subcommands. Unset optionals leave the config alone.
struct Options {
  std::optional<std::string> config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::optional<std::string> method;
  std::optional<std::string> groups;
  std::optional<std::string> range;
  std::optional<std::string> sampler;
  std::optional<std::string> membership;
  std::optional<std::string> mode;
  std::optional<std::string> arch;
};

/// Loaded config with the flag overrides applied, plus the overrides as they
/// are recorded in summaries.
struct Context {
  RunConfig config;
  Workspace ws;
  int workers = 1;
  std::map<std::string, std::string> overrides;
};

Context make_context(const Options& options);

/// n test points spread evenly over the split (all of them when n is 0 or
/// exceeds the split), so every class is represented.
std::vector<const ManifestEntry*> select_test_points(const DatasetManifest& manifest, int n);

/// Gradient-suite failures are reported with this exit status.
inline constexpr int kExitGradcheckFailed = 6;

int cmd_gen_data(const Context& ctx);
int cmd_train(const Context& ctx);
int cmd_eval(const Context& ctx);
int cmd_attack(const Context& ctx);
int cmd_sample(const Context& ctx);
int cmd_info_worth(const Context& ctx);
int cmd_augment(const Context& ctx);
int cmd_retrain(const Context& ctx);
int cmd_robustness_matrix(const Context& ctx);
int cmd_transfer(const Context& ctx);
int cmd_gradcheck(const Context& ctx);
int cmd_report(const Context& ctx);

}  // namespace semcex::cli
