// SPDX-License-Identifier: Apache-2.0
//
// daquant CLI: run experiments, compare schemes, verify invariants, and
// print alphabet sizes against the analytic bit bound.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "daquant/config.hpp"
#include "daquant/errors.hpp"
#include "daquant/set_code.hpp"
#include "daquant/verify.hpp"

namespace fs = std::filesystem;
using namespace daquant;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::int64_t seed = -1;  // -1: keep the config's seed
};

ConfigMap resolve_config(const CommonArgs& args) {
  ConfigMap map = load_config_file(args.config_path);
  apply_overrides(map, args.overrides);
  if (args.seed >= 0) map["run.seed"] = std::to_string(args.seed);
  return map;
}

void write_outputs(const fs::path& dir, const ConfigMap& map,
                   const std::string& scheme, const ExperimentResult& res) {
  fs::create_directories(dir);
  write_file((dir / (scheme + ".csv")).string(), metrics_csv(res.records));
  write_file((dir / "config.resolved.cfg").string(), config_echo(map));
}

int cmd_run(const CommonArgs& args) {
  const ConfigMap map = resolve_config(args);
  const ExperimentConfig cfg = config_from_map(map);
  const ExperimentResult res = run_experiment(cfg);
  write_outputs(args.out_dir, map, scheme_name(cfg.scheme), res);
  const MeterSummary meter = meter_report(res.records);
  std::cout << "scheme=" << scheme_name(cfg.scheme)
            << " iterations=" << meter.iterations
            << " total_bits=" << meter.total_bits
            << " bits_per_iteration=" << format_double(meter.bits_per_iteration)
            << "\n";
  return 0;
}

int cmd_compare(const CommonArgs& args) {
  const ConfigMap map = resolve_config(args);
  std::vector<Scheme> schemes;
  double target_loss = 0;
  const ExperimentConfig base = config_from_map(map, &schemes, &target_loss);
  if (schemes.empty())
    throw ConfigError("schemes: compare needs a nonempty scheme list");

  const auto task = make_task(base.task);
  struct Row {
    std::string scheme;
    MeterSummary meter;
    double final_loss = 0;
    std::int64_t bits_to_target = -1;
  };
  std::vector<Row> rows;
  fs::create_directories(args.out_dir);
  for (const Scheme s : schemes) {
    ExperimentConfig cfg = base;
    cfg.scheme = s;
    const ExperimentResult res = run_experiment(cfg, *task);
    Row row;
    row.scheme = scheme_name(s);
    row.meter = meter_report(res.records);
    row.final_loss = task->full_risk(res.model.w).first;
    for (const auto& rec : res.records) {
      if (rec.train_loss <= target_loss) {
        row.bits_to_target = rec.cumulative_bits;
        break;
      }
    }
    write_file((fs::path(args.out_dir) / (row.scheme + ".csv")).string(),
               metrics_csv(res.records));
    rows.push_back(row);
  }
  write_file((fs::path(args.out_dir) / "config.resolved.cfg").string(),
             config_echo(map));

  std::string csv =
      "scheme,total_bits,bits_per_iteration,final_loss,bits_to_target,ratio_vs_first\n";
  const double first_bits = rows.front().meter.bits_per_iteration;
  std::printf("%-16s %14s %18s %14s %14s %10s\n", "scheme", "total_bits",
              "bits/iteration", "final_loss", "bits_to_tgt", "ratio");
  for (const auto& row : rows) {
    const double ratio =
        first_bits > 0 ? row.meter.bits_per_iteration / first_bits : 0.0;
    const std::string tgt =
        row.bits_to_target >= 0 ? std::to_string(row.bits_to_target)
                                : std::string("not reached");
    csv += row.scheme + "," + std::to_string(row.meter.total_bits) + "," +
           format_double(row.meter.bits_per_iteration) + "," +
           format_double(row.final_loss) + "," + tgt + "," +
           format_double(ratio) + "\n";
    std::printf("%-16s %14lld %18.2f %14.6g %14s %10.3f\n", row.scheme.c_str(),
                static_cast<long long>(row.meter.total_bits),
                row.meter.bits_per_iteration, row.final_loss, tgt.c_str(),
                ratio);
  }
  write_file((fs::path(args.out_dir) / "summary.csv").string(), csv);
  return 0;
}

int cmd_verify(const std::string& module, const std::string& fixtures) {
  const auto checks = run_verify(module, fixtures);
  int failures = 0;
  for (const auto& c : checks) {
    std::printf("[%s] %s/%s%s%s\n", c.passed ? "PASS" : "FAIL",
                c.module.c_str(), c.name.c_str(), c.detail.empty() ? "" : ": ",
                c.detail.c_str());
    if (!c.passed) ++failures;
  }
  std::printf("%zu checks, %d failures\n", checks.size(), failures);
  return failures == 0 ? 0 : 1;
}

int cmd_enumerate(int d, int m) {
  const BigInt size = set_size(d, m);
  std::cout << "set_size=" << size.get_str()
            << " bits=" << ceil_log2(size)
            << " bound=" << format_double(bits_bound(d, m)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dataset-quantized SGD simulator"};
  app.require_subcommand(1);

  CommonArgs run_args, cmp_args;
  auto add_common = [](CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "config file")->required();
    cmd->add_option("--out", a.out_dir, "output directory");
    cmd->add_option("--set", a.overrides, "key=value override (repeatable)");
    cmd->add_option("--seed", a.seed, "override run.seed");
  };
  add_common(app.add_subcommand("run", "run one experiment"), run_args);
  add_common(app.add_subcommand("compare", "run all configured schemes"),
             cmp_args);

  auto* verify_cmd = app.add_subcommand("verify", "run the invariant suite");
  std::string module, fixtures = "tests/golden";
  verify_cmd->add_option("--module", module, "restrict to one module");
  verify_cmd->add_option("--fixtures", fixtures, "golden fixture directory");

  auto* enum_cmd = app.add_subcommand("enumerate", "print |S| and bit bounds");
  int enum_d = 1, enum_m = 2;
  enum_cmd->add_option("d", enum_d, "data dimension")->required();
  enum_cmd->add_option("m", enum_m, "quantization levels")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("run")) return cmd_run(run_args);
    if (app.got_subcommand("compare")) return cmd_compare(cmp_args);
    if (app.got_subcommand("verify")) return cmd_verify(module, fixtures);
    if (app.got_subcommand("enumerate")) return cmd_enumerate(enum_d, enum_m);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
