// Copyright 2026 The BridgeAD Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "bridgead/checkpoint.hpp"
#include "bridgead/dataset.hpp"
#include "bridgead/evaluation.hpp"
#include "bridgead/experiment.hpp"
#include "bridgead/run_config.hpp"
#include "bridgead/scenario_io.hpp"

#include "svg_plot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

namespace
{

using bridgead::RunConfig;
using nlohmann::json;
namespace fs = std::filesystem;
namespace ev = bridgead::evaluation;

void write_json(const fs::path & path, const json & doc)
{
  std::ofstream out(path);
  out << doc.dump(2) << "\n";
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

json read_json(const fs::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw bridgead::ConfigError("cannot read " + path.string());
  }
  return json::parse(in);
}

RunConfig config_or_default(const std::string & path)
{
  if (path.empty()) {
    RunConfig cfg;
    auto doc = bridgead::to_json(cfg);
    bridgead::apply_env_overrides(doc, bridgead::process_env_overrides());
    cfg = bridgead::run_config_from_json(doc);
    cfg.validate();
    return cfg;
  }
  return bridgead::load_config(path);
}

void log_line(const std::string & s) { std::cout << s << std::endl; }

json epochs_json(const std::vector<bridgead::training::EpochLog> & logs)
{
  json out = json::array();
  for (const auto & e : logs) {
    const auto & l = e.loss;
    out.push_back({{"epoch", e.epoch},     {"lr", e.lr},           {"total", l.total},       {"det_reg", l.det_reg},
                   {"det_cls", l.det_cls}, {"map_reg", l.map_reg}, {"map_cls", l.map_cls},   {"mot_reg", l.mot_reg},
                   {"mot_cls", l.mot_cls}, {"plan_reg", l.plan_reg}, {"plan_cls", l.plan_cls}});
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_gen(const std::string & templ, std::size_t count, std::uint64_t seed, const std::string & out_dir,
            const std::string & config_path)
{
  const auto cfg = config_or_default(config_path);
  const auto t = bridgead::scene::template_from_string(templ);
  fs::create_directories(out_dir);
  const auto scenarios = bridgead::generate_scenarios(t, count, seed, cfg.sim.scene);
  json files = json::array();
  for (const auto & sc : scenarios) {
    const auto path = fs::path(out_dir) / (sc.name + ".json");
    bridgead::scene::save_scenario(sc.scenario, path);
    files.push_back(path.filename().string());
  }
  write_json(fs::path(out_dir) / "_manifest.json", {{"config_hash", bridgead::config_hash(cfg)},
                                                    {"template", templ},
                                                    {"seed", seed},
                                                    {"count", count},
                                                    {"files", files}});
  std::cout << "wrote " << count << " scenarios to " << out_dir << "\n";
  return 0;
}

std::vector<bridgead::NamedScenario> dataset_for(const RunConfig & cfg, const std::string & data_dir, bool eval,
                                                 std::optional<std::size_t> count)
{
  if (!data_dir.empty()) {
    return bridgead::load_scenario_dir(data_dir);
  }
  const auto n = count.value_or(static_cast<std::size_t>(eval ? cfg.sim.eval_scenarios : cfg.sim.train_scenarios));
  return bridgead::generate_scenarios(cfg.sim.templ, n, eval ? cfg.seeds.eval : cfg.seeds.data, cfg.sim.scene);
}

int cmd_train(const std::string & config_path, const std::string & data_dir, const std::string & out_arg)
{
  const auto cfg = bridgead::load_config(config_path);
  const fs::path out_dir = out_arg.empty() ? fs::path(cfg.paths.output_dir) : fs::path(out_arg);
  fs::create_directories(out_dir);
  const auto hash = bridgead::config_hash(cfg);
  const auto scenarios = dataset_for(cfg, data_dir, false, std::nullopt);
  const auto data = bridgead::frames_only(bridgead::make_sequences(scenarios, cfg.sim.noise, cfg.model));
  std::cout << "training on " << data.size() << " scenarios, config " << hash << "\n";

  bridgead::BridgeModel model(cfg.model, cfg.seeds.model);
  const auto result = bridgead::experiment::train_staged(model, data, cfg, out_dir, log_line);
  bridgead::save_checkpoint(out_dir / "model.ckpt", model, cfg);
  bridgead::save_config(cfg, out_dir / "config.json");
  write_json(out_dir / "train_log.json", {{"kind", "train_log"},
                                          {"config_hash", hash},
                                          {"scenarios", data.size()},
                                          {"perception", epochs_json(result.perception.epochs)},
                                          {to_string(cfg.train.stage), epochs_json(result.end_to_end.epochs)}});
  std::cout << "checkpoint: " << (out_dir / "model.ckpt").string() << "\n";
  return 0;
}

int cmd_eval_open(const std::string & ckpt, const std::string & data_dir, std::optional<std::size_t> count,
                  const std::string & out_arg)
{
  const auto info = bridgead::read_checkpoint_info(ckpt);
  const auto & cfg = info.config;
  bridgead::BridgeModel model(cfg.model, cfg.seeds.model);
  bridgead::load_checkpoint(ckpt, model);
  const fs::path out_dir = out_arg.empty() ? fs::path(ckpt).parent_path() : fs::path(out_arg);
  fs::create_directories(out_dir);
  const auto scenarios = dataset_for(cfg, data_dir, true, count);
  const auto data = bridgead::make_sequences(scenarios, cfg.sim.noise, cfg.model, 1);
  const auto report = ev::evaluate_open_loop(model, data, cfg.ablation);
  auto doc = ev::to_json(report);
  doc["kind"] = "open_loop";
  doc["config_hash"] = info.config_hash;
  doc["checkpoint"] = ckpt;
  write_json(out_dir / "open_loop.json", doc);
  ev::write_open_loop_csv(report, out_dir / "open_loop.csv", info.config_hash);
  std::cout << "avg L2 " << report.l2_avg << " m, avg collision " << report.collision_avg << ", ADE "
            << report.motion.ade << ", FDE " << report.motion.fde << ", MR " << report.motion.mr << "\n";
  return 0;
}

int cmd_eval_closed(const std::string & ckpt, const std::string & config_path, const std::string & policy_name,
                    const std::string & templ, std::size_t count, std::optional<std::uint64_t> seed,
                    const std::string & out_arg)
{
  RunConfig cfg;
  std::string hash;
  std::unique_ptr<bridgead::BridgeModel> model;
  if (!ckpt.empty()) {
    const auto info = bridgead::read_checkpoint_info(ckpt);
    cfg = info.config;
    hash = info.config_hash;
    model = std::make_unique<bridgead::BridgeModel>(cfg.model, cfg.seeds.model);
    bridgead::load_checkpoint(ckpt, *model);
  } else {
    cfg = config_or_default(config_path);
    hash = bridgead::config_hash(cfg);
  }
  std::unique_ptr<ev::Policy> policy;
  if (policy_name == "model") {
    if (!model) {
      throw bridgead::ConfigError("eval-closed: --policy model needs --checkpoint");
    }
    policy = std::make_unique<ev::ModelPolicy>(*model, cfg.ablation);
  } else if (policy_name == "no_action") {
    policy = std::make_unique<ev::NoActionPolicy>();
  } else if (policy_name == "braking") {
    policy = std::make_unique<ev::BrakingPolicy>();
  } else {
    throw bridgead::ConfigError("eval-closed: unknown policy '" + policy_name + "'");
  }
  ev::ClosedLoopConfig cl;
  cl.noise = cfg.sim.noise;
  cl.control_dt = cfg.sim.control_dt;
  const auto scenarios = bridgead::generate_scenarios(bridgead::scene::template_from_string(templ), count,
                                                      seed.value_or(cfg.seeds.eval), cfg.sim.scene);
  std::vector<std::pair<std::string, ev::ClosedLoopResult>> results;
  json episodes = json::array();
  double nns_sum = 0.0;
  int collisions = 0;
  for (const auto & sc : scenarios) {
    auto r = ev::run_closed_loop(*policy, sc.scenario, cl);
    nns_sum += r.nns;
    collisions += r.collided ? 1 : 0;
    auto e = ev::to_json(r, true);
    e["scenario_id"] = sc.name;
    episodes.push_back(e);
    results.emplace_back(sc.name, std::move(r));
  }
  const fs::path out_dir = out_arg.empty() ? fs::path(cfg.paths.output_dir) : fs::path(out_arg);
  fs::create_directories(out_dir);
  const double mean_nns = scenarios.empty() ? 0.0 : nns_sum / static_cast<double>(scenarios.size());
  write_json(out_dir / "closed_loop.json", {{"kind", "closed_loop"},
                                            {"config_hash", hash},
                                            {"policy", policy_name},
                                            {"template", templ},
                                            {"mean_nns", mean_nns},
                                            {"collisions", collisions},
                                            {"episodes", episodes}});
  ev::write_closed_loop_csv(results, out_dir / "closed_loop.csv", hash);
  std::cout << "policy " << policy_name << ": mean NNS " << mean_nns << ", collisions " << collisions << "/"
            << scenarios.size() << "\n";
  return 0;
}

std::vector<std::string> split(const std::string & s, char sep)
{
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == sep) {
      if (!cur.empty()) {
        out.push_back(cur);
      }
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) {
    out.push_back(cur);
  }
  return out;
}

int cmd_ablate(const std::string & config_path, const std::string & flags_arg, int seeds, const std::string & out_arg)
{
  const auto cfg = bridgead::load_config(config_path);
  const auto dims = split(flags_arg, ',');
  const auto grid = bridgead::experiment::ablation_grid(dims, cfg.ablation);
  const fs::path out_dir = out_arg.empty() ? fs::path(cfg.paths.output_dir) / "ablation" : fs::path(out_arg);
  fs::create_directories(out_dir);
  const auto hash = bridgead::config_hash(cfg);
  const auto train_data = bridgead::frames_only(
    bridgead::make_sequences(dataset_for(cfg, "", false, std::nullopt), cfg.sim.noise, cfg.model));
  const auto eval_data =
    bridgead::make_sequences(dataset_for(cfg, "", true, std::nullopt), cfg.sim.noise, cfg.model, 1);
  const auto rows =
    bridgead::experiment::run_ablation(cfg, grid, seeds, train_data, eval_data, out_dir / "work", log_line);

  std::ofstream csv(out_dir / "ablation.csv");
  csv.precision(10);
  csv << "# config_hash: " << hash << "\n";
  csv << "mask";
  for (const auto & d : dims) {
    csv << "," << d;
  }
  csv << ",mean_l2_avg,mean_collision_avg";
  for (int s = 0; s < seeds; ++s) {
    csv << ",l2_avg_seed" << s;
  }
  csv << "\n";
  json jrows = json::array();
  for (const auto & r : rows) {
    csv << r.flags.mask_string();
    json jflags = json::object();
    for (const auto & d : dims) {
      bridgead::AblationFlags probe = r.flags;
      bridgead::experiment::set_flag(probe, d, true);
      const bool on = probe == r.flags;
      csv << "," << (on ? "on" : "off");
      jflags[d] = on;
    }
    csv << "," << r.mean_l2() << "," << r.mean_collision();
    for (const double v : r.l2_avg) {
      csv << "," << v;
    }
    csv << "\n";
    jrows.push_back({{"mask", r.flags.mask_string()},
                     {"flags", jflags},
                     {"mean_l2_avg", r.mean_l2()},
                     {"mean_collision_avg", r.mean_collision()},
                     {"l2_avg", r.l2_avg},
                     {"collision_avg", r.collision_avg},
                     {"final_loss", r.final_loss}});
  }
  if (!csv) {
    throw std::runtime_error("cannot write ablation.csv");
  }
  write_json(out_dir / "ablation.json",
             {{"kind", "ablation"}, {"config_hash", hash}, {"flags", dims}, {"seeds", seeds}, {"rows", jrows}});
  std::cout << "wrote " << rows.size() << " rows to " << (out_dir / "ablation.csv").string() << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string> & inputs, const std::string & out_dir, bool force)
{
  std::vector<std::pair<fs::path, json>> docs;
  std::set<std::string> hashes;
  for (const auto & in : inputs) {
    auto doc = read_json(in);
    if (!doc.contains("config_hash") || !doc.contains("kind")) {
      throw bridgead::ConfigError(in + ": not a report artifact (missing kind/config_hash)");
    }
    hashes.insert(doc.at("config_hash").get<std::string>());
    docs.emplace_back(in, std::move(doc));
  }
  if (hashes.size() > 1 && !force) {
    std::cerr << "report: inputs come from " << hashes.size()
              << " different configurations; pass --force to aggregate anyway\n";
    return 3;
  }
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "summary.csv");
  csv.precision(10);
  csv << "source,kind,config_hash,metric,value\n";
  json summary = json::array();
  std::vector<bridgead::tools::Series> loss_series;
  int plot_count = 0;
  for (const auto & [path, doc] : docs) {
    const auto kind = doc.at("kind").get<std::string>();
    const auto hash = doc.at("config_hash").get<std::string>();
    json entry = {{"source", path.string()}, {"kind", kind}, {"config_hash", hash}};
    auto emit = [&](const std::string & metric, double value) {
      csv << path.string() << "," << kind << "," << hash << "," << metric << "," << value << "\n";
      entry[metric] = value;
    };
    if (kind == "open_loop") {
      for (const char * m : {"l2_avg", "l2_at_avg", "collision_avg", "ade", "fde", "mr"}) {
        emit(m, doc.at(m).get<double>());
      }
    } else if (kind == "closed_loop") {
      emit("mean_nns", doc.at("mean_nns").get<double>());
      emit("collisions", doc.at("collisions").get<double>());
    } else if (kind == "ablation") {
      std::vector<std::string> labels;
      std::vector<double> values;
      for (const auto & row : doc.at("rows")) {
        const auto mask = row.at("mask").get<std::string>();
        emit("mean_l2_avg[" + mask + "]", row.at("mean_l2_avg").get<double>());
        labels.push_back(mask);
        values.push_back(row.at("mean_l2_avg").get<double>());
      }
      bridgead::tools::write_bar_plot(fs::path(out_dir) / ("ablation_" + std::to_string(plot_count++) + ".svg"),
                                      "Open-loop avg L2 by flag mask", "avg L2 (m)", labels, values);
    } else if (kind == "train_log") {
      for (const char * stage : {"perception", "end_to_end"}) {
        if (!doc.contains(stage) || doc.at(stage).empty()) {
          continue;
        }
        bridgead::tools::Series s{path.parent_path().filename().string() + " " + stage, {}, {}};
        for (const auto & e : doc.at(stage)) {
          s.x.push_back(e.at("epoch").get<double>());
          s.y.push_back(e.at("total").get<double>());
        }
        emit(std::string(stage) + "_final_loss", s.y.back());
        loss_series.push_back(std::move(s));
      }
    } else {
      throw bridgead::ConfigError(path.string() + ": unknown artifact kind '" + kind + "'");
    }
    summary.push_back(entry);
  }
  if (!loss_series.empty()) {
    bridgead::tools::write_line_plot(fs::path(out_dir) / "loss.svg", "Training loss", "epoch", "total loss",
                                     loss_series);
  }
  if (!csv) {
    throw std::runtime_error("cannot write summary.csv");
  }
  write_json(fs::path(out_dir) / "summary.json",
             {{"config_hashes", std::vector<std::string>(hashes.begin(), hashes.end())},
              {"mixed", hashes.size() > 1},
              {"entries", summary}});
  std::cout << "wrote report for " << docs.size() << " artifacts to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Streaming end-to-end driving stack: data generation, training and evaluation"};
  app.require_subcommand(1);

  auto * gen = app.add_subcommand("gen", "Generate scenario files");
  std::string gen_template = "open_loop_random";
  std::size_t gen_count = 10;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "scenarios";
  std::string gen_config;
  gen->add_option("--template", gen_template, "Scenario template");
  gen->add_option("--count", gen_count, "Number of scenarios");
  gen->add_option("--seed", gen_seed, "Base seed");
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--config", gen_config, "Run config (scene settings)");

  auto * train = app.add_subcommand("train", "Train a model");
  std::string train_config;
  std::string train_data;
  std::string train_out;
  train->add_option("--config", train_config, "Run config")->required();
  train->add_option("--data", train_data, "Scenario directory (default: generate from the config)");
  train->add_option("--out", train_out, "Output directory (default: paths.output_dir)");

  auto * eval_open = app.add_subcommand("eval-open", "Open-loop evaluation of a checkpoint");
  std::string eo_ckpt;
  std::string eo_data;
  std::string eo_out;
  std::optional<std::size_t> eo_count;
  eval_open->add_option("--checkpoint", eo_ckpt, "Checkpoint file")->required();
  eval_open->add_option("--data", eo_data, "Scenario directory (default: generate from the config)");
  eval_open->add_option("--count", eo_count, "Number of generated evaluation scenarios");
  eval_open->add_option("--out", eo_out, "Output directory (default: next to the checkpoint)");

  auto * eval_closed = app.add_subcommand("eval-closed", "Closed-loop evaluation");
  std::string ec_ckpt;
  std::string ec_config;
  std::string ec_policy = "model";
  std::string ec_template = "frontal_adversary";
  std::size_t ec_count = 20;
  std::optional<std::uint64_t> ec_seed;
  std::string ec_out;
  eval_closed->add_option("--checkpoint", ec_ckpt, "Checkpoint file (policy=model)");
  eval_closed->add_option("--config", ec_config, "Run config for scripted policies");
  eval_closed->add_option("--policy", ec_policy, "model | no_action | braking");
  eval_closed->add_option("--template", ec_template, "Scenario template");
  eval_closed->add_option("--count", ec_count, "Number of scenarios");
  eval_closed->add_option("--seed", ec_seed, "Base seed (default: seeds.eval)");
  eval_closed->add_option("--out", ec_out, "Output directory");

  auto * ablate = app.add_subcommand("ablate", "Train and evaluate every on/off combination of history modules");
  std::string ab_config;
  std::string ab_flags = "his_plan,mot2plan";
  int ab_seeds = 1;
  std::string ab_out;
  ablate->add_option("--config", ab_config, "Run config")->required();
  ablate->add_option("--flags", ab_flags, "Comma-separated flags; a+b toggles both");
  ablate->add_option("--seeds", ab_seeds, "Seeds per row")->check(CLI::PositiveNumber);
  ablate->add_option("--out", ab_out, "Output directory");

  auto * report = app.add_subcommand("report", "Summarise artifacts into CSV/JSON and SVG plots");
  std::vector<std::string> rp_inputs;
  std::string rp_out = "report";
  bool rp_force = false;
  report->add_option("inputs", rp_inputs, "Artifact JSON files")->required();
  report->add_option("--out", rp_out, "Output directory");
  report->add_flag("--force", rp_force, "Aggregate artifacts from different configurations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen(gen_template, gen_count, gen_seed, gen_out, gen_config);
    }
    if (train->parsed()) {
      return cmd_train(train_config, train_data, train_out);
    }
    if (eval_open->parsed()) {
      return cmd_eval_open(eo_ckpt, eo_data, eo_count, eo_out);
    }
    if (eval_closed->parsed()) {
      return cmd_eval_closed(ec_ckpt, ec_config, ec_policy, ec_template, ec_count, ec_seed, ec_out);
    }
    if (ablate->parsed()) {
      return cmd_ablate(ab_config, ab_flags, ab_seeds, ab_out);
    }
    if (report->parsed()) {
      return cmd_report(rp_inputs, rp_out, rp_force);
    }
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
