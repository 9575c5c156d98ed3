// ean: command-line front end for the connection-scheme search.

#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "ean/analysis.hpp"
#include "ean/errors.hpp"
#include "ean/protocol.hpp"
#include "ean/search.hpp"
#include "ean/supernet.hpp"
#include "run_dir.hpp"

namespace {

using namespace ean;
using cli::RunConfig;
using cli::RunDirectory;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitTransport = 3;
constexpr int kExitNumeric = 4;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> m;
  std::string env;
  std::string endpoint;
  std::optional<std::size_t> period;
  std::optional<std::size_t> offset;
  std::optional<std::size_t> draws;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> reps;
  std::string checkpoint;
  std::string scheme;
  std::string resume;
  bool stdio = false;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

RunConfig resolve_config(const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg.load_file(f.config);
  cfg.apply_environment();
  if (f.seed) cfg.set("seed", *f.seed);
  if (f.m) cfg.set("m", *f.m);
  if (f.period) cfg.set("period", *f.period);
  if (f.offset) cfg.set("offset", *f.offset);
  if (f.draws) cfg.set("draws", *f.draws);
  if (f.batch) cfg.set("batch", *f.batch);
  if (f.reps) cfg.set("reps", *f.reps);
  if (!f.endpoint.empty()) cfg.set("endpoint", f.endpoint);
  if (!f.checkpoint.empty()) cfg.set("checkpoint", f.checkpoint);
  if (!f.scheme.empty()) cfg.set("bench_scheme", f.scheme);
  return cfg;
}

std::string default_out(const std::string& command) {
  std::string stamp = cli::utc_timestamp();
  for (char& c : stamp)
    if (c == ':' || c == '.') c = '-';
  return "runs/" + command + "-" + stamp;
}

std::unique_ptr<RunDirectory> open_run(const Flags& f, const std::string& command, const RunConfig& cfg) {
  return std::make_unique<RunDirectory>(f.out.empty() ? default_out(command) : f.out, command, f.config, cfg.values(),
                                        cfg.seed());
}

// ---------------------------------------------------------------------------
// Environments

struct Environment {
  std::string name;
  std::size_t m = 0;
  std::unique_ptr<Supernet> net;
  std::unique_ptr<ToyDataset> data;
  std::unique_ptr<PlantedEnv> planted;
  std::unique_ptr<Evaluator> evaluator;
  ValueOracle noiseless;
};

Supernet load_checkpoint_from(const RunConfig& cfg) {
  const auto path = cfg.get_string("checkpoint");
  if (!path) throw ConfigError("checkpoint", "the supernet environment needs a pretrain checkpoint (--checkpoint)");
  if (!std::filesystem::exists(*path)) throw ConfigError("checkpoint", "no checkpoint at '" + *path + "'");
  return load_supernet(*path);
}

Environment make_environment(const std::string& spec, const RunConfig& cfg) {
  Environment e;
  std::string kind = spec;
  std::string endpoint;
  if (spec.rfind("external:", 0) == 0) {
    kind = "external";
    endpoint = spec.substr(9);
  }
  if (kind == "planted") {
    e.name = "planted";
    e.m = cfg.m();
    e.planted = std::make_unique<PlantedEnv>(make_planted(cfg.planted_seed(), cfg.planted_options()));
    e.evaluator = std::make_unique<PlantedEvaluator>(*e.planted, cfg.seed());
    const PlantedEnv* env = e.planted.get();
    e.noiseless = [env](const ConnectionScheme& a) { return planted_eval(*env, a); };
  } else if (kind == "supernet") {
    e.name = "supernet";
    e.net = std::make_unique<Supernet>(load_checkpoint_from(cfg));
    e.data = std::make_unique<ToyDataset>(make_toy_dataset(e.net->config));
    e.m = e.net->m();
    e.evaluator = std::make_unique<SupernetEvaluator>(*e.net, *e.data);
    const Supernet* net = e.net.get();
    const ToyDataset* data = e.data.get();
    e.noiseless = [net, data](const ConnectionScheme& a) { return proxy_eval(*net, a, *data); };
  } else if (kind == "external") {
    if (endpoint.empty()) endpoint = cfg.get_string("endpoint").value_or("");
    if (endpoint.empty()) throw ConfigError("endpoint", "external environment needs an endpoint");
    e.name = "external:" + endpoint;
    e.m = cfg.m();
    e.evaluator = std::make_unique<ExternalEvaluator>(Endpoint::parse(endpoint), cfg.external_options(e.m));
    Evaluator* ev = e.evaluator.get();
    e.noiseless = [ev](const ConnectionScheme& a) { return ev->true_value(a); };
  } else {
    throw ConfigError("env", "unknown environment '" + spec + "' (expected planted, supernet or external:<endpoint>)");
  }
  return e;
}

std::string env_kind(const std::string& spec) {
  if (spec.rfind("external", 0) == 0) return "external";
  return spec;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_pretrain(const Flags& f) {
  const RunConfig cfg = resolve_config(f);
  const SupernetConfig sc = cfg.supernet_config();
  auto run = open_run(f, "pretrain", cfg);
  const ToyDataset data = make_toy_dataset(sc);
  Rng init(Rng::derive(sc.init_seed, 1));
  Supernet net = make_supernet(sc, init);
  Rng steps(Rng::derive(sc.init_seed, 2));
  const auto result = pretrain(net, data, sc.pretrain_steps, steps);

  {
    std::ofstream csv(run->artifact("pretrain_loss.csv"));
    csv << "step,loss\n" << std::setprecision(17);
    for (std::size_t t = 0; t < result.losses.size(); ++t) csv << t + 1 << ',' << result.losses[t] << '\n';
  }
  const auto ckpt = run->artifact("supernet.ckpt");
  run->artifact("supernet.ckpt.json");
  const std::string digest =
      save_supernet(ckpt, net, {{"dataset_seed", sc.dataset_seed}, {"pretrain_steps", sc.pretrain_steps}});
  const auto zeros = ConnectionScheme::zeros(sc.stage_sizes);
  const auto ones = ConnectionScheme::ones(sc.m());
  run->write_json("summary.json", {{"checkpoint", ckpt.string()},
                                   {"digest", digest},
                                   {"m", net.m()},
                                   {"steps", result.losses.size()},
                                   {"final_loss", result.losses.back()},
                                   {"val_accuracy_all_zero", proxy_eval(net, zeros, data)},
                                   {"val_accuracy_all_one", proxy_eval(net, ones, data)},
                                   {"parameter_count", net.parameter_count()},
                                   {"attention_parameter_count", net.attention_parameter_count()},
                                   {"supernet", to_json(sc)}});
  run->finish(kExitOk, {{"checkpoint_digest", digest}});
  std::cout << ckpt.string() << ' ' << digest << '\n';
  return kExitOk;
}

json summary_of(const SearchRun& r, const Environment& env, const SearchConfig& sc, bool aborted,
                const std::string& error) {
  json j{{"env", env.name},
         {"evaluator", env.evaluator->describe()},
         {"m", env.m},
         {"weights", {{"lambda1", sc.weights.lambda1}, {"lambda2", sc.weights.lambda2}, {"lambda3", sc.weights.lambda3}}},
         {"config", to_json(sc)},
         {"search_steps", sc.search_steps},
         {"completed", r.completed},
         {"aborted", aborted},
         {"pbar_trace", r.pbar_trace},
         {"best_trace", r.best_trace}};
  if (aborted) j["error"] = error;
  const auto first = first_iteration_above(r.pbar_trace, 0.9);
  j["first_pbar_above_0_9"] = first ? json(*first) : json(nullptr);
  if (!aborted) {
    const double g_val = env.noiseless(r.extracted);
    j["extracted"] = {{"scheme", encode(r.extracted)},
                      {"g_spa", sparsity_reward(r.extracted)},
                      {"g_val", g_val},
                      {"true_reward", true_reward(sc.weights, r.extracted, g_val)}};
  } else {
    j["extracted"] = {{"scheme", encode(r.extracted)}};
  }
  if (r.best_scheme)
    j["best_seen"] = {{"scheme", encode(*r.best_scheme)}, {"true_reward", r.best_reward}};
  else
    j["best_seen"] = nullptr;
  return j;
}

int cmd_search(const Flags& f) {
  const RunConfig cfg = resolve_config(f);
  const std::string env_spec = f.env.empty() ? "planted" : f.env;
  std::optional<SearchLoop> loop;
  SearchConfig sc;
  if (!f.resume.empty()) {
    std::ifstream in(f.resume);
    if (!in) throw ConfigError("resume", "cannot read '" + f.resume + "'");
    json state = json::parse(in, nullptr, false);
    if (state.is_discarded()) throw ConfigError("resume", "'" + f.resume + "' is not valid JSON");
    loop.emplace(SearchLoop::restore_state(state));
    sc = loop->config();
  } else {
    sc = cfg.search_config(env_kind(env_spec));
  }
  Environment env = make_environment(env_spec, cfg);
  if (loop && loop->controller().size() != env.m)
    throw ConfigError("resume", "saved state has a different scheme length than the environment");
  if (!loop) loop.emplace(sc, env.m);

  auto run = open_run(f, "search", cfg);
  std::ofstream log(run->artifact("run.jsonl"));
  std::ofstream curve(run->artifact("reward_curve.csv"));
  curve << "iter,G,true_reward,best_true_reward,pbar\n" << std::setprecision(17);
  auto emit = [&](const IterationRecord& rec) {
    log << to_json(rec).dump() << '\n';
    log.flush();
    curve << rec.iter << ',' << rec.reward.total << ',' << rec.true_reward << ',' << loop->partial().best_trace.back()
          << ',' << rec.pbar << '\n';
  };
  for (const auto& rec : loop->partial().log) {
    log << to_json(rec).dump() << '\n';
    curve << rec.iter << ',' << rec.reward.total << ',' << rec.true_reward << ",," << rec.pbar << '\n';
  }
  try {
    const SearchRun result = run_search(*loop, *env.evaluator, emit);
    run->write_json("summary.json", summary_of(result, env, sc, false, ""));
    run->finish(kExitOk);
    std::cout << encode(result.extracted) << '\n';
    return kExitOk;
  } catch (const SearchAborted& e) {
    log.flush();
    run->write_json("state.json", e.state());
    run->write_json("summary.json", summary_of(e.partial(), env, sc, true, e.what()));
    run->finish(kExitTransport);
    std::cerr << "ean: " << e.what() << "\nean: resumable state written to " << (run->path() / "state.json").string()
              << '\n';
    return kExitTransport;
  }
}

int cmd_bruteforce(const Flags& f) {
  const RunConfig cfg = resolve_config(f);
  const std::size_t m = cfg.m();
  if (m > kBruteForceMaxBits)
    throw ConfigError("m", "brute force is limited to " + std::to_string(kBruteForceMaxBits) + " bits");
  const std::string env_spec = f.env.empty() ? "planted" : f.env;
  Environment env = make_environment(env_spec, cfg);
  if (env.m != m) throw ConfigError("m", "environment has " + std::to_string(env.m) + " blocks");
  const SearchConfig sc = cfg.search_config(env_kind(env_spec));
  auto run = open_run(f, "bruteforce", cfg);
  std::size_t workers = env.name == "planted" ? cfg.get<std::size_t>("workers") : 1;
  ValueOracle oracle = env.noiseless;
  std::vector<double> table;
  const auto connections = cfg.get<std::size_t>("connections");
  if (env_kind(env_spec) == "external" && connections > 1) {
    // One pass over every scheme through parallel connections, then a lookup.
    std::vector<std::unique_ptr<Evaluator>> members;
    const auto ep = Endpoint::parse(env.name.substr(9));
    for (std::size_t i = 0; i < connections; ++i)
      members.push_back(std::make_unique<ExternalEvaluator>(ep, cfg.external_options(m)));
    EvaluatorPool pool(std::move(members));
    std::vector<ConnectionScheme> all;
    all.reserve(std::size_t{1} << m);
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << m); ++code)
      all.push_back(ConnectionScheme::from_code(code, m));
    table = pool.evaluate_all(all);
    oracle = [&table](const ConnectionScheme& a) { return table[a.code()]; };
    workers = 1;
  }
  const auto ranking = brute_force(m, sc.weights, oracle, workers);
  {
    std::ofstream csv(run->artifact("ranking.csv"));
    csv << "scheme,rank,g_spa,g_val,G\n" << std::setprecision(17);
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      const auto& r = ranking[i];
      csv << encode(r.scheme(m)) << ',' << i + 1 << ',' << r.g_spa << ',' << r.g_val << ',' << r.total << '\n';
    }
  }
  run->write_json("summary.json",
                  {{"env", env.name},
                   {"m", m},
                   {"count", ranking.size()},
                   {"weights", {{"lambda1", sc.weights.lambda1}, {"lambda2", sc.weights.lambda2}, {"lambda3", 0.0}}},
                   {"best", {{"scheme", encode(ranking.front().scheme(m))}, {"G", ranking.front().total}}}});
  run->finish(kExitOk);
  std::cout << encode(ranking.front().scheme(m)) << '\n';
  return kExitOk;
}

int cmd_baseline_random(const Flags& f) {
  const RunConfig cfg = resolve_config(f);
  const std::string env_spec = f.env.empty() ? "planted" : f.env;
  Environment env = make_environment(env_spec, cfg);
  const SearchConfig sc = cfg.search_config(env_kind(env_spec));
  const auto draws = cfg.get<std::size_t>("draws");
  if (draws == 0) throw ConfigError("draws", "must be at least 1");
  auto run = open_run(f, "baseline-random", cfg);
  Rng rng(Rng::derive(cfg.seed(), 0x72616e646f6d));
  const auto base = baseline_random(env.m, sc.weights, env.noiseless, draws, rng);
  {
    std::ofstream csv(run->artifact("distribution.csv"));
    csv << "index,scheme,g_spa,g_val,G\n" << std::setprecision(17);
    for (std::size_t i = 0; i < base.schemes.size(); ++i)
      csv << i << ',' << encode(base.schemes[i]) << ',' << sparsity_reward(base.schemes[i]) << ',' << base.g_val[i]
          << ',' << base.totals[i] << '\n';
  }
  double var = 0.0;
  const double mu = mean(base.totals);
  for (double t : base.totals) var += (t - mu) * (t - mu);
  run->write_json("summary.json", {{"env", env.name},
                                   {"m", env.m},
                                   {"draws", draws},
                                   {"mean", mu},
                                   {"std", base.totals.size() > 1 ? std::sqrt(var / (base.totals.size() - 1)) : 0.0},
                                   {"best", {{"scheme", encode(base.best())}, {"G", base.totals[base.best_index]}}}});
  run->finish(kExitOk);
  std::cout << encode(base.best()) << '\n';
  return kExitOk;
}

int cmd_baseline_hsp(const Flags& f) {
  const RunConfig cfg = resolve_config(f);
  const std::size_t m = cfg.m();
  const auto period = cfg.get<std::size_t>("period");
  const auto offset = cfg.get<std::size_t>("offset");
  const ConnectionScheme s = baseline_hsp(m, period, offset);
  auto run = open_run(f, "baseline-hsp", cfg);
  json summary{{"m", m}, {"period", period}, {"offset", offset}, {"scheme", encode(s)}, {"g_spa", sparsity_reward(s)}};
  if (!f.env.empty()) {
    Environment env = make_environment(f.env, cfg);
    if (env.m != m) throw ConfigError("m", "environment has " + std::to_string(env.m) + " blocks");
    const SearchConfig sc = cfg.search_config(env_kind(f.env));
    const double g = env.noiseless(s);
    summary["env"] = env.name;
    summary["g_val"] = g;
    summary["G"] = true_reward(sc.weights, s, g);
  }
  run->write_json("summary.json", summary);
  run->finish(kExitOk);
  std::cout << encode(s) << '\n';
  return kExitOk;
}

Supernet supernet_for(const RunConfig& cfg, bool need_training, std::unique_ptr<ToyDataset>* data_out) {
  if (cfg.is_set("checkpoint")) {
    Supernet net = load_checkpoint_from(cfg);
    if (data_out) *data_out = std::make_unique<ToyDataset>(make_toy_dataset(net.config));
    return net;
  }
  const SupernetConfig sc = cfg.supernet_config();
  Rng init(Rng::derive(sc.init_seed, 1));
  Supernet net = make_supernet(sc, init);
  if (need_training || data_out) {
    auto data = std::make_unique<ToyDataset>(make_toy_dataset(sc));
    if (need_training) {
      Rng steps(Rng::derive(sc.init_seed, 2));
      pretrain(net, *data, sc.pretrain_steps, steps);
    }
    if (data_out) *data_out = std::move(data);
  }
  return net;
}

int cmd_bench(const Flags& f) {
  const RunConfig cfg = resolve_config(f);
  const Supernet net = supernet_for(cfg, false, nullptr);
  ConnectionScheme scheme = ConnectionScheme::ones(net.m());
  if (auto text = cfg.get_string("bench_scheme")) scheme = decode(*text);
  if (scheme.size() != net.m())
    throw ConfigError("bench_scheme", "scheme has " + std::to_string(scheme.size()) + " bits, network has " +
                                          std::to_string(net.m()));
  TimingOptions opts;
  opts.batch = cfg.get<std::size_t>("batch");
  opts.reps = cfg.get<std::size_t>("reps");
  opts.runs = cfg.get<std::size_t>("timing_runs");
  if (opts.batch == 0) throw ConfigError("batch", "must be at least 1");
  if (opts.reps == 0) throw ConfigError("reps", "must be at least 1");
  if (opts.runs == 0) throw ConfigError("timing_runs", "must be at least 1");
  opts.input_seed = cfg.seed();
  auto run = open_run(f, "bench", cfg);
  const TimingResult t = time_increment(net, scheme, opts);
  run->write_json("bench.json", {{"scheme", encode(scheme)},
                                 {"increment_pct", t.increment_pct},
                                 {"batch", opts.batch},
                                 {"reps", opts.reps},
                                 {"runs", opts.runs},
                                 {"with_seconds", t.with_seconds},
                                 {"without_seconds", t.without_seconds},
                                 {"with_runs", t.with_runs},
                                 {"without_runs", t.without_runs}});
  run->finish(kExitOk);
  std::cout << std::fixed << std::setprecision(3) << t.increment_pct << '\n';
  return kExitOk;
}

int cmd_correlate(const Flags& f) {
  const RunConfig cfg = resolve_config(f);
  const auto count = cfg.get<std::size_t>("correlate_schemes");
  if (count < 3) throw ConfigError("correlate_schemes", "correlation needs at least three schemes");
  auto run = open_run(f, "correlate", cfg);
  std::unique_ptr<ToyDataset> data;
  const Supernet net = supernet_for(cfg, true, &data);
  Rng rng(Rng::derive(cfg.seed(), 0x636f7272));
  const auto schemes = correlation_schemes(net.config, count, rng);
  const std::uint64_t scratch_seed = cfg.is_set("scratch_seed") ? cfg.get<std::uint64_t>("scratch_seed") : cfg.seed();
  const auto report = proxy_correlation(net, schemes, *data, scratch_seed);
  json rows = json::array();
  {
    std::ofstream csv(run->artifact("correlation.csv"));
    csv << "scheme,proxy,scratch\n" << std::setprecision(17);
    for (std::size_t i = 0; i < schemes.size(); ++i) {
      rows.push_back({{"scheme", encode(schemes[i])}, {"proxy", report.proxy[i]}, {"scratch", report.scratch[i]}});
      csv << encode(schemes[i]) << ',' << report.proxy[i] << ',' << report.scratch[i] << '\n';
    }
  }
  run->write_json("correlation.json", {{"pearson_r", report.pearson_r},
                                       {"scratch_seed", scratch_seed},
                                       {"dataset_seed", net.config.dataset_seed},
                                       {"schemes", rows}});
  run->finish(kExitOk);
  std::cout << std::setprecision(6) << report.pearson_r << '\n';
  return kExitOk;
}

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

int cmd_serve(const Flags& f) {
  const RunConfig cfg = resolve_config(f);
  const std::string env_spec = f.env.empty() ? "supernet" : f.env;
  if (env_spec.rfind("external", 0) == 0) throw ConfigError("env", "serve answers with a local environment");
  Environment env = make_environment(env_spec, cfg);
  const ValueOracle oracle = env.noiseless;
  const ValueHandler handler = [&](const ConnectionScheme& a) { return oracle(a); };
  if (f.stdio) {
    std::ios::sync_with_stdio(false);
    serve_stream(std::cin, std::cout, handler, env.m);
    return kExitOk;
  }
  TcpServer server(f.host, f.port, handler, env.m);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening tcp://" << f.host << ':' << server.port() << std::endl;
  server.start();
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  return kExitOk;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "ean: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "ean: bad scheme: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TransportError& e) {
    std::cerr << "ean: transport error: " << e.what() << '\n';
    return kExitTransport;
  } catch (const ProtocolError& e) {
    std::cerr << "ean: protocol error: " << e.what() << '\n';
    return kExitTransport;
  } catch (const NumericError& e) {
    std::cerr << "ean: numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "ean: " << e.what() << '\n';
    return kExitFailure;
  }
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "Flat JSON config file");
  sub->add_option("--seed", f.seed, "Seed (overrides config)");
  sub->add_option("--out", f.out, "Run directory (must not hold a previous run)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Search for sparse attention-module connection schemes"};
  app.set_version_flag("--version", EAN_VERSION);
  app.require_subcommand(1);
  Flags f;

  auto* pretrain_cmd = app.add_subcommand("pretrain", "Train the toy supernet with random sub-networks");
  add_common(pretrain_cmd, f);

  auto* search_cmd = app.add_subcommand("search", "Run the policy-gradient search");
  add_common(search_cmd, f);
  search_cmd->add_option("--env", f.env, "planted | supernet | external:<endpoint>");
  search_cmd->add_option("--endpoint", f.endpoint, "tcp://host:port or exec:<command>");
  search_cmd->add_option("--m", f.m, "Scheme length (planted and external)");
  search_cmd->add_option("--checkpoint", f.checkpoint, "Supernet checkpoint");
  search_cmd->add_option("--resume", f.resume, "state.json of an aborted run");

  auto* brute_cmd = app.add_subcommand("bruteforce", "Score every scheme");
  add_common(brute_cmd, f);
  brute_cmd->add_option("--env", f.env, "planted | supernet | external:<endpoint>");
  brute_cmd->add_option("--endpoint", f.endpoint, "tcp://host:port or exec:<command>");
  brute_cmd->add_option("--m", f.m, "Scheme length");
  brute_cmd->add_option("--checkpoint", f.checkpoint, "Supernet checkpoint");

  auto* baseline_cmd = app.add_subcommand("baseline", "Random or periodic baseline schemes");
  baseline_cmd->require_subcommand(1);
  auto* random_cmd = baseline_cmd->add_subcommand("random", "Score i.i.d. Bernoulli(0.5) schemes");
  add_common(random_cmd, f);
  random_cmd->add_option("--env", f.env, "planted | supernet | external:<endpoint>");
  random_cmd->add_option("--endpoint", f.endpoint, "tcp://host:port or exec:<command>");
  random_cmd->add_option("--m", f.m, "Scheme length");
  random_cmd->add_option("--draws", f.draws, "Number of schemes");
  random_cmd->add_option("--checkpoint", f.checkpoint, "Supernet checkpoint");
  auto* hsp_cmd = baseline_cmd->add_subcommand("hsp", "Connect every period-th block");
  add_common(hsp_cmd, f);
  hsp_cmd->add_option("--m", f.m, "Scheme length");
  hsp_cmd->add_option("--period", f.period, "Period N");
  hsp_cmd->add_option("--offset", f.offset, "Offset in [0, N)");
  hsp_cmd->add_option("--env", f.env, "Also score the scheme in this environment");
  hsp_cmd->add_option("--checkpoint", f.checkpoint, "Supernet checkpoint");

  auto* bench_cmd = app.add_subcommand("bench", "Relative inference time increment of a scheme");
  add_common(bench_cmd, f);
  bench_cmd->add_option("--scheme", f.scheme, "Scheme text (default: all ones)");
  bench_cmd->add_option("--batch", f.batch, "Batch size");
  bench_cmd->add_option("--reps", f.reps, "Forward passes per side");
  bench_cmd->add_option("--checkpoint", f.checkpoint, "Supernet checkpoint (default: fresh weights)");

  auto* corr_cmd = app.add_subcommand("correlate", "Proxy vs stand-alone accuracy correlation");
  add_common(corr_cmd, f);
  corr_cmd->add_option("--checkpoint", f.checkpoint, "Supernet checkpoint (default: pretrain in-process)");

  auto* serve_cmd = app.add_subcommand("serve", "Answer evaluation requests");
  serve_cmd->add_option("--config", f.config, "Flat JSON config file");
  serve_cmd->add_option("--seed", f.seed, "Seed (overrides config)");
  serve_cmd->add_option("--env", f.env, "supernet (default) | planted");
  serve_cmd->add_option("--m", f.m, "Scheme length (planted)");
  serve_cmd->add_option("--checkpoint", f.checkpoint, "Supernet checkpoint");
  serve_cmd->add_flag("--stdio", f.stdio, "Serve on standard input/output");
  serve_cmd->add_option("--host", f.host, "Bind address");
  serve_cmd->add_option("--port", f.port, "TCP port (0 = ephemeral)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  return guarded([&] {
    if (*pretrain_cmd) return cmd_pretrain(f);
    if (*search_cmd) return cmd_search(f);
    if (*brute_cmd) return cmd_bruteforce(f);
    if (*random_cmd) return cmd_baseline_random(f);
    if (*hsp_cmd) return cmd_baseline_hsp(f);
    if (*bench_cmd) return cmd_bench(f);
    if (*corr_cmd) return cmd_correlate(f);
    if (*serve_cmd) return cmd_serve(f);
    return kExitConfig;
  });
}
