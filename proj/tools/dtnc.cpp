#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dtnc/csv.hpp"
#include "dtnc/errors.hpp"
#include "dtnc/network.hpp"
#include "dtnc/pipeline.hpp"
#include "dtnc/synth.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitConfig = 2;

struct CleanseArgs {
  std::string network, input, output;
  std::int64_t window = 70;
  int particles = 15;
  double epsilon = 2.0;
  double delta = 0.05;
  double gamma0 = 1.0;
  double vmax = 50.0;
  std::string policy = "even";
  std::uint64_t seed = 0;
  int workers = 1;
  int init_samples = 30;
  std::string dist_store;
  std::string timings;
};

int run_cleanse(const CleanseArgs& a) {
  dtnc::Config cfg;
  cfg.window_len = a.window;
  cfg.n_particles = a.particles;
  cfg.epsilon = a.epsilon;
  cfg.delta = a.delta;
  cfg.gamma0 = a.gamma0;
  cfg.v_max = a.vmax;
  if (a.policy == "even") {
    cfg.policy = dtnc::DiffusionPolicy::evenP;
  } else if (a.policy == "direction") {
    cfg.policy = dtnc::DiffusionPolicy::directionP;
  } else {
    throw dtnc::ConfigError("--policy must be 'even' or 'direction'");
  }
  cfg.rng_seed = a.seed;
  cfg.workers = a.workers;
  cfg.init_samples = a.init_samples;
  cfg.validate();

  dtnc::Network net = dtnc::Network::load(a.network, cfg.init_samples, cfg.rng_seed);

  dtnc::RawLocations raw;
  if (a.input == "-") {
    raw = dtnc::read_locations_csv(std::cin, "<stdin>");
  } else {
    raw = dtnc::read_locations_csv(a.input);
  }
  if (raw.dropped_nonmonotonic > 0)
    std::cerr << "dropped " << raw.dropped_nonmonotonic
              << " non-monotonic record(s)\n";

  dtnc::Pipeline pipe(net, cfg);
  if (!a.dist_store.empty()) {
    std::ifstream probe(a.dist_store);
    if (probe.good()) pipe.load_distributions(a.dist_store);
  }

  if (a.output == "-") {
    pipe.run_stream(std::move(raw.locations), std::cout);
  } else {
    std::ofstream out(a.output);
    if (!out) throw dtnc::ConfigError("cannot open output file: " + a.output);
    pipe.run_stream(std::move(raw.locations), out);
  }

  if (!a.dist_store.empty()) pipe.save_distributions(a.dist_store);
  const dtnc::PhaseTimings& tm = pipe.timings();
  if (!a.timings.empty()) {
    nlohmann::json j;
    j["da_s"] = tm.da_s;
    j["ol_s"] = tm.ol_s;
    j["pc_s"] = tm.pc_s;
    j["in_s"] = tm.in_s;
    j["windows"] = tm.windows;
    j["object_windows"] = tm.object_windows;
    std::ofstream out(a.timings);
    if (!out) throw dtnc::ConfigError("cannot open timings file: " + a.timings);
    out << j.dump(2) << '\n';
  }
  std::cerr << "windows=" << tm.windows << " object_windows=" << tm.object_windows
            << " da=" << tm.da_s << "s ol=" << tm.ol_s << "s pc=" << tm.pc_s
            << "s in=" << tm.in_s << "s\n";
  return kExitOk;
}

struct SynthArgs {
  std::string spec, out_raw, out_truth, out_network;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  dtnc::Scenario sc = dtnc::load_scenario(a.spec);
  dtnc::Network net = dtnc::build_grid_network(sc.grid, 1, a.seed);
  dtnc::GeneratedData data = dtnc::generate(sc, net, a.seed);
  dtnc::write_raw_csv(a.out_raw, data.raw);
  dtnc::write_truth_csv(a.out_truth, data.truth);
  if (!a.out_network.empty()) dtnc::write_network_jsonl(net, a.out_network);
  std::cerr << "objects=" << sc.objects << " raw=" << data.raw.size()
            << " truth=" << data.truth.size() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string cleansed, truth, report;
};

int run_eval(const EvalArgs& a) {
  auto est = dtnc::read_points_csv(a.cleansed);
  auto tru = dtnc::read_points_csv(a.truth);
  dtnc::DeviationReport rep = dtnc::deviation_report(est, tru);
  nlohmann::json j;
  j["count"] = rep.count;
  j["unmatched"] = rep.unmatched;
  j["mean_m"] = rep.mean_m;
  j["median_m"] = rep.median_m;
  j["buckets"] = {
      {"le50", rep.buckets[0]},   {"b50_100", rep.buckets[1]},
      {"b100_150", rep.buckets[2]}, {"b150_200", rep.buckets[3]},
      {"b200_300", rep.buckets[4]}, {"gt300", rep.buckets[5]},
  };
  std::ofstream out(a.report);
  if (!out) throw dtnc::ConfigError("cannot open report file: " + a.report);
  out << j.dump(2) << '\n';
  std::cerr << "matched=" << rep.count << " median=" << rep.median_m
            << "m le50=" << rep.buckets[0] << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"travel-time-aware cellular trajectory cleansing"};
  app.require_subcommand(1);

  CleanseArgs ca;
  CLI::App* cleanse = app.add_subcommand("cleanse", "cleanse a trajectory stream");
  cleanse->add_option("--network", ca.network, "network JSONL file")->required();
  cleanse->add_option("--input", ca.input, "raw locations CSV ('-' for stdin)")->required();
  cleanse->add_option("--output", ca.output, "cleansed CSV ('-' for stdout)")->required();
  cleanse->add_option("--window", ca.window, "service window length, seconds");
  cleanse->add_option("--particles", ca.particles, "particles per transition estimate");
  cleanse->add_option("--epsilon", ca.epsilon, "narrowing tolerance, seconds");
  cleanse->add_option("--delta", ca.delta, "narrowing confidence parameter");
  cleanse->add_option("--gamma0", ca.gamma0, "transition smoothing strength");
  cleanse->add_option("--vmax", ca.vmax, "global max speed, m/s");
  cleanse->add_option("--policy", ca.policy, "particle prior: even | direction");
  cleanse->add_option("--seed", ca.seed, "RNG seed");
  cleanse->add_option("--workers", ca.workers, "worker threads per window");
  cleanse->add_option("--init-samples", ca.init_samples,
                      "speed samples seeding each edge distribution");
  cleanse->add_option("--dist-store", ca.dist_store,
                      "distribution store JSONL (loaded if present, saved at exit)");
  cleanse->add_option("--timings", ca.timings, "write phase timings JSON here");

  SynthArgs sa;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scenario");
  synth->add_option("--spec", sa.spec, "scenario JSON")->required();
  synth->add_option("--out-raw", sa.out_raw, "raw observations CSV")->required();
  synth->add_option("--out-truth", sa.out_truth, "ground-truth CSV")->required();
  synth->add_option("--out-network", sa.out_network, "also write the network JSONL");
  synth->add_option("--seed", sa.seed, "RNG seed");

  EvalArgs ea;
  CLI::App* eval = app.add_subcommand("eval", "score cleansed output against truth");
  eval->add_option("--cleansed", ea.cleansed, "cleansed CSV")->required();
  eval->add_option("--truth", ea.truth, "ground-truth CSV")->required();
  eval->add_option("--report", ea.report, "report JSON output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (cleanse->parsed()) return run_cleanse(ca);
    if (synth->parsed()) return run_synth(sa);
    if (eval->parsed()) return run_eval(ea);
    return kExitConfig;
  } catch (const dtnc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dtnc::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const dtnc::ValidationError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}
