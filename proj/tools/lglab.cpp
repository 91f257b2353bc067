// lglab: command-line front end for the length-generalization laboratory.
//
// Subcommands: analyze, simulate, markov-sim, gen, train, sweep, verify,
// plot. Config files are JSON; command-line flags override config values.
// Exit codes: 0 ok, 1 verification failure, 2 usage/input error, 3
// model-shape error.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "lglab/analyzers.hpp"
#include "lglab/forward.hpp"
#include "lglab/manifest.hpp"
#include "lglab/rng.hpp"
#include "lglab/serialize.hpp"
#include "lglab/simulators.hpp"
#include "lglab/svg.hpp"
#include "lglab/tasks.hpp"
#include "lglab/trainer.hpp"
#include "lglab/verify.hpp"

using nlohmann::json;
using namespace lglab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitShape = 3;

json g_config;                 // loaded from --config, if any
std::string g_config_path;
std::string g_command_line;

// Applies a config-file value to any option the user did not pass on the
// command line (flags take precedence over config).
template <typename T>
void apply_config(const CLI::Option* opt, T& var, const std::string& key) {
  if (opt != nullptr && opt->count() > 0) return;
  if (g_config.contains(key)) var = g_config.at(key).get<T>();
}

void load_config() {
  if (g_config_path.empty()) return;
  std::ifstream in(g_config_path);
  if (!in) throw PreconditionError("cannot read config: " + g_config_path);
  g_config = json::parse(in);
  if (!g_config.is_object())
    throw PreconditionError("config must be a JSON object: " + g_config_path);
}

void emit_manifest(std::uint64_t seed, const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs) {
  if (outputs.empty()) return;
  RunManifest m;
  m.command = g_command_line;
  m.config_path = g_config_path;
  m.base_seed = seed;
  m.inputs = inputs;
  m.input_hash = hash_files(inputs);
  m.started = utc_now();
  m.outputs = outputs;
  m.finished = utc_now();
  write_manifest(m, outputs.front() + ".manifest.json");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot write output: " + path);
  out << text;
}

json num_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

TokenSeq read_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot read input: " + path);
  const json doc = json::parse(in);
  if (!doc.is_array())
    throw PreconditionError("token file must be a JSON array: " + path);
  TokenSeq x;
  for (const json& t : doc) x.push_back(t.get<int>());
  return x;
}

json tokens_json(const TokenSeq& x) {
  json arr = json::array();
  for (int t : x) arr.push_back(t);
  return arr;
}

TaskSpec make_task(const std::string& name, double param, int s_vocab,
                   int modp_k) {
  if (name == "simple") return SimpleTask{param};
  if (name == "modp") return ModPTask{static_cast<int>(param), modp_k};
  if (name == "kgram") return KGramTask{static_cast<int>(param), s_vocab};
  throw PreconditionError("unknown task '" + name +
                          "' (expected simple|modp|kgram)");
}

json sim_report_json(const SimReport& rep) {
  json j;
  j["z"] = tokens_json(rep.z);
  j["len_z"] = rep.len_z;
  j["err_f"] = rep.err_f;
  if (rep.err_g) j["err_g"] = *rep.err_g;
  j["epsilon"] = rep.epsilon;
  j["method"] = rep.method == SimMethod::JointHard ? "joint_hard"
                : rep.method == SimMethod::Suffix  ? "suffix"
                                                   : "markov";
  if (rep.seed) j["seed"] = *rep.seed;
  return j;
}

std::string csv_row(const LGRow& r) {
  std::ostringstream os;
  os << r.task << "," << r.param << "," << r.train_len << "," << r.test_len
     << "," << r.seed << "," << r.test_loss;
  return os.str();
}

// ---------------------------------------------------------------- analyze

int cmd_analyze(const std::string& model_path, int p_bits,
                const std::string& out_path) {
  const LTParams params = load_model(model_path);
  const MarginReport rep = margin_report(params, p_bits);
  json j;
  j["logit_margin"] = num_or_inf(rep.logit_margin);
  j["hardmax_threshold"] = rep.hardmax_threshold;
  j["positional_margin"] = num_or_inf(rep.positional_margin);
  j["complexity"] = num_or_inf(rep.complexity);
  j["l_mlp"] = num_or_inf(rep.l_mlp);
  j["m_v"] = num_or_inf(rep.m_v);
  j["m_e"] = num_or_inf(rep.m_e);
  j["m_f"] = num_or_inf(rep.m_f);
  j["g_f"] = num_or_inf(rep.g_f);
  j["lip_f"] = num_or_inf(rep.lip_f);
  j["h_f"] = num_or_inf(rep.h_f);
  j["warnings"] = rep.warnings;
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    write_text(out_path, text);
    emit_manifest(0, {model_path}, {out_path});
  }
  return kExitOk;
}

// --------------------------------------------------------------- simulate

int cmd_simulate(const std::string& f_path, const std::string& g_path,
                 const std::string& input_path, int input_len, double eps,
                 int filler, int p_bits, std::uint64_t seed,
                 const std::string& out_path) {
  const LTParams f = load_model(f_path);
  std::vector<std::string> inputs = {f_path};
  TokenSeq x;
  if (!input_path.empty()) {
    x = read_tokens(input_path);
    inputs.push_back(input_path);
  } else {
    Rng rng(seed);
    x = dirichlet_seq(VectorXd::Ones(f.s_vocab), input_len, rng).first;
  }
  SimReport rep;
  if (!g_path.empty()) {
    const LTParams g = load_model(g_path);
    inputs.insert(inputs.begin() + 1, g_path);
    rep = build_joint_sim(f, g, p_bits, x, eps, filler);
  } else {
    rep = build_joint_sim(f, f, p_bits, x, eps, filler);
  }
  const std::string text = sim_report_json(rep).dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    write_text(out_path, text);
    emit_manifest(seed, inputs, {out_path});
  }
  return kExitOk;
}

int cmd_markov_sim(const std::string& f_path, const std::string& input_path,
                   int input_len, int n, int k_tries, std::uint64_t seed,
                   const std::string& out_path) {
  const LTParams f = load_model(f_path);
  std::vector<std::string> inputs = {f_path};
  Rng rng(seed);
  TokenSeq x;
  if (!input_path.empty()) {
    x = read_tokens(input_path);
    inputs.push_back(input_path);
  } else {
    for (int i = 0; i < input_len; ++i)
      x.push_back(static_cast<int>(rng.uniform_int(f.s_vocab)) + 1);
  }
  const SimReport rep = best_markov_sim(f, x, n, f.tau, k_tries, rng);
  const std::string text = sim_report_json(rep).dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    write_text(out_path, text);
    emit_manifest(seed, inputs, {out_path});
  }
  return kExitOk;
}

// -------------------------------------------------------------------- gen

int cmd_gen(const std::string& task_name, double param, int s_vocab,
            int modp_k, int t_len, int count, std::uint64_t seed,
            const std::string& construct_out, double beta, double eps_mlp,
            const std::string& out_path) {
  const TaskSpec task = make_task(task_name, param, s_vocab, modp_k);
  std::vector<std::string> outputs;
  if (!construct_out.empty()) {
    LTParams lt;
    if (const auto* m = std::get_if<ModPTask>(&task))
      lt = construct_modp_lt(m->period, m->k, beta);
    else if (const auto* s = std::get_if<SimpleTask>(&task))
      lt = construct_simple_lt(s->omega, eps_mlp);
    else
      lt = construct_kgram_lt(std::get<KGramTask>(task).s_vocab,
                              std::get<KGramTask>(task).k, beta);
    save_model(lt, construct_out);
    outputs.push_back(construct_out);
  }
  Rng rng(seed);
  json rows = json::array();
  for (int i = 0; i < count; ++i) {
    const TokenSeq x = task_generate(task, t_len, rng);
    const VectorXd y = task_target(task, x);
    json row;
    row["x"] = tokens_json(x);
    json tgt = json::array();
    for (Eigen::Index k = 0; k < y.size(); ++k) tgt.push_back(y(k));
    row["target"] = tgt;
    rows.push_back(std::move(row));
  }
  json j;
  j["task"] = task_name;
  j["param"] = param;
  j["sequences"] = std::move(rows);
  const std::string text = j.dump(2) + "\n";
  if (!out_path.empty()) {
    write_text(out_path, text);
    outputs.insert(outputs.begin(), out_path);
  } else if (count > 0) {
    std::cout << text;
  }
  emit_manifest(seed, {}, outputs);
  return kExitOk;
}

// ----------------------------------------------------------- train / sweep

struct SweepOpts {
  std::string task = "modp";
  std::vector<double> param_grid = {3};
  int s_vocab = 2;
  int modp_k = 1;
  std::vector<int> train_lens = {16, 32, 64};
  std::vector<int> test_lens = {64, 128, 256, 512, 1024};
  int seeds = 4;
  int depth = 1;
  int heads = 1;
  int d = 16;
  int mlp_width = 32;
  std::string pe = "auto";
  int batch = 256;
  int max_steps = 8000;
  double stop_loss = 1e-4;
  double lr_hidden = -1.0;  // <0: default 1e-2/d
  double lr_embed = 1e-2;
  int eval_batches = 2;
  std::uint64_t seed = 0;
};

TrainConfig build_train_config(const SweepOpts& o, const TaskSpec& task,
                               int train_len, std::uint64_t run_seed) {
  TrainConfig cfg;
  cfg.depth = o.depth;
  cfg.heads_l1 = o.heads;
  cfg.d = o.d;
  cfg.mlp_width = o.mlp_width;
  if (o.pe == "auto") {
    // per-task default: none / periodic(period) / relative_local(k-1)
    if (std::holds_alternative<SimpleTask>(task)) {
      cfg.pe = PEKind::None;
    } else if (const auto* m = std::get_if<ModPTask>(&task)) {
      cfg.pe = PEKind::Periodic;
      cfg.delta = m->period;
    } else {
      cfg.pe = PEKind::RelativeLocal;
      cfg.tau = std::max(0, std::get<KGramTask>(task).k - 1);
    }
  } else {
    cfg.pe = pe_kind_from_name(o.pe);
    if (const auto* m = std::get_if<ModPTask>(&task)) cfg.delta = m->period;
    if (const auto* g = std::get_if<KGramTask>(&task))
      cfg.tau = std::max(0, g->k - 1);
  }
  cfg.train_len = train_len;
  cfg.batch = o.batch;
  cfg.max_steps = o.max_steps;
  cfg.stop_loss = o.stop_loss;
  cfg.lr_hidden = o.lr_hidden > 0 ? o.lr_hidden : 1e-2 / o.d;
  cfg.lr_embed = o.lr_embed;
  cfg.seed = run_seed;
  return cfg;
}

int cmd_train(const SweepOpts& o, const std::string& checkpoint,
              const std::string& curve_path) {
  const TaskSpec task = make_task(o.task, o.param_grid.front(), o.s_vocab,
                                  o.modp_k);
  const TrainConfig cfg =
      build_train_config(o, task, o.train_lens.front(), o.seed);
  Rng rng(cfg.seed);
  const TrainResult tr = train(cfg, task, rng);
  std::vector<std::string> outputs;
  if (!checkpoint.empty()) {
    save_train_model(tr.model, checkpoint);
    outputs.push_back(checkpoint);
  }
  std::ostringstream csv;
  csv << "task,param,train_len,test_len,seed,test_loss\n";
  for (const LGRow& r :
       eval_curve(tr.model, task, o.test_lens, o.eval_batches, rng))
    csv << csv_row(r) << "\n";
  if (!curve_path.empty()) {
    write_text(curve_path, csv.str());
    outputs.push_back(curve_path);
  } else {
    std::cout << csv.str();
  }
  std::cout << "final train loss " << tr.losses.back() << " after "
            << tr.losses.size() << " steps\n";
  emit_manifest(o.seed, {}, outputs);
  return kExitOk;
}

int cmd_sweep(const SweepOpts& o, const std::string& out_csv) {
  struct Run {
    double param;
    int train_len;
    int seed_idx;
  };
  std::vector<Run> runs;
  for (double p : o.param_grid)
    for (int n : o.train_lens)
      for (int s = 0; s < o.seeds; ++s) runs.push_back({p, n, s});
  std::vector<std::vector<LGRow>> rows(runs.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      const TaskSpec task =
          make_task(o.task, runs[i].param, o.s_vocab, o.modp_k);
      const std::uint64_t run_seed = child_seed(o.seed, i);
      const TrainConfig cfg =
          build_train_config(o, task, runs[i].train_len, run_seed);
      Rng rng(run_seed);
      const TrainResult tr = train(cfg, task, rng);
      rows[i] = eval_curve(tr.model, task, o.test_lens, o.eval_batches, rng);
      for (LGRow& r : rows[i]) r.seed = runs[i].seed_idx;
    }
  };
  const int threads =
      std::min<int>(worker_threads(), static_cast<int>(runs.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();

  std::ostringstream csv;
  csv << "task,param,train_len,test_len,seed,test_loss\n";
  for (const auto& rs : rows)
    for (const LGRow& r : rs) csv << csv_row(r) << "\n";
  write_text(out_csv, csv.str());
  emit_manifest(o.seed, {}, {out_csv});
  std::cerr << "wrote " << out_csv << " (" << runs.size() << " runs)\n";
  return kExitOk;
}

// ----------------------------------------------------------------- verify

int cmd_verify(const std::string& suite, std::uint64_t seed,
               const std::string& out_path) {
  const std::vector<CheckResult> results = verify_suite(suite, seed);
  json checks = json::array();
  bool all_passed = true;
  for (const CheckResult& r : results) {
    json c;
    c["name"] = r.name;
    c["passed"] = r.passed;
    c["detail"] = r.detail;
    checks.push_back(std::move(c));
    all_passed = all_passed && r.passed;
  }
  json j;
  j["suite"] = suite;
  j["seed"] = seed;
  j["passed"] = all_passed;
  j["checks"] = std::move(checks);
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    write_text(out_path, text);
    emit_manifest(seed, {}, {out_path});
  }
  return all_passed ? kExitOk : kExitVerifyFail;
}

// ------------------------------------------------------------------- plot

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot read CSV: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw PreconditionError("empty CSV: " + path);
  return rows;
}

int cmd_plot(const std::string& csv_path, const std::string& x_col,
             const std::string& y_col, const std::string& group_col,
             bool log_y, const std::string& out_svg) {
  const auto rows = read_csv(csv_path);
  const auto& header = rows.front();
  auto col_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw PreconditionError("missing column '" + name + "' in " + csv_path);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t xi = col_index(x_col), yi = col_index(y_col);
  const std::size_t gi = group_col.empty() ? xi : col_index(group_col);

  std::vector<std::string> order;
  std::map<std::string, Series> by_group;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string key = group_col.empty() ? "data" : rows[r].at(gi);
    if (!by_group.count(key)) {
      order.push_back(key);
      by_group[key].label =
          group_col.empty() ? y_col : group_col + "=" + key;
    }
    by_group[key].x.push_back(std::stod(rows[r].at(xi)));
    by_group[key].y.push_back(std::stod(rows[r].at(yi)));
  }
  std::vector<Series> series;
  for (const std::string& key : order) {
    Series s = by_group[key];
    // sort points by x so polylines read left to right
    std::vector<std::size_t> idx(s.x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) {
                       return s.x[a] < s.x[b];
                     });
    Series sorted;
    sorted.label = s.label;
    for (std::size_t i : idx) {
      sorted.x.push_back(s.x[i]);
      sorted.y.push_back(s.y[i]);
    }
    series.push_back(std::move(sorted));
  }
  PlotSpec spec;
  spec.title = y_col + " vs " + x_col;
  spec.x_label = x_col;
  spec.y_label = y_col;
  spec.log_y = log_y;
  write_text(out_svg, render_svg(series, spec));
  emit_manifest(0, {csv_path}, {out_svg});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i)
    g_command_line += std::string(i ? " " : "") + argv[i];

  CLI::App app{
      "lglab: limit-transformer length-generalization laboratory.\n"
      "Config precedence: command-line flags override --config JSON values,\n"
      "which override built-in defaults."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  app.add_option("--config", g_config_path,
                 "JSON config file (object of option-name: value)");

  // analyze
  std::string model_path, out_path;
  int p_bits = 16;
  auto* analyze = app.add_subcommand("analyze", "Margin/complexity report");
  auto* an_model =
      analyze->add_option("--model", model_path, "model JSON")->required();
  auto* an_bits = analyze->add_option("--p-bits", p_bits, "precision bits");
  auto* an_out = analyze->add_option("--out", out_path, "report JSON path");

  // simulate
  std::string f_path, g2_path, input_path;
  int input_len = 10000, filler = 0;
  double eps = 0.1;
  std::uint64_t seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Joint short simulation");
  auto* si_f = simulate->add_option("--model-f", f_path)->required();
  auto* si_g = simulate->add_option("--model-g", g2_path,
                                    "second model (default: model-f)");
  auto* si_in = simulate->add_option("--input", input_path,
                                     "token file (JSON array)");
  auto* si_len = simulate->add_option("--len", input_len,
                                      "generated input length");
  auto* si_eps = simulate->add_option("--eps", eps);
  auto* si_fill =
      simulate->add_option("--filler", filler, "filler token (1-based)");
  auto* si_bits = simulate->add_option("--p-bits", p_bits);
  auto* si_seed = simulate->add_option("--seed", seed);
  auto* si_out = simulate->add_option("--out", out_path);

  // markov-sim
  int n_sub = 100, k_tries = 16;
  auto* markov = app.add_subcommand("markov-sim", "Markov subsampling sim");
  auto* mk_f = markov->add_option("--model", f_path)->required();
  auto* mk_in = markov->add_option("--input", input_path);
  auto* mk_len = markov->add_option("--len", input_len);
  auto* mk_n = markov->add_option("--n", n_sub, "target subsample size");
  auto* mk_tries = markov->add_option("--k-tries", k_tries);
  auto* mk_seed = markov->add_option("--seed", seed);
  auto* mk_out = markov->add_option("--out", out_path);

  // gen
  std::string task_name = "modp", construct_out;
  double param = 3, beta = 50, eps_mlp = 1e-3;
  int s_vocab = 2, modp_k = 1, t_len = 64, count = 1;
  auto* gen = app.add_subcommand("gen", "Task data / LT constructions");
  auto* ge_task = gen->add_option("--task", task_name, "simple|modp|kgram");
  auto* ge_param =
      gen->add_option("--param", param, "omega / period / k by task");
  auto* ge_vocab = gen->add_option("--s-vocab", s_vocab, "kgram vocab size");
  auto* ge_k = gen->add_option("--k", modp_k, "modp residue k");
  auto* ge_len = gen->add_option("--len", t_len);
  auto* ge_count = gen->add_option("--count", count);
  auto* ge_seed = gen->add_option("--seed", seed);
  auto* ge_cons = gen->add_option("--construct-model", construct_out,
                                  "write the explicit LT construction here");
  auto* ge_beta = gen->add_option("--beta", beta, "construction sharpness");
  auto* ge_emlp = gen->add_option("--eps-mlp", eps_mlp,
                                  "simple-task MLP tolerance");
  auto* ge_out = gen->add_option("--out", out_path);

  // train / sweep
  SweepOpts so;
  std::string checkpoint, curve_path, out_csv = "results.csv";
  auto add_train_opts = [&](CLI::App* cmd,
                            std::vector<std::pair<const CLI::Option*,
                                                  std::string>>& opts) {
    opts = {
        {cmd->add_option("--task", so.task, "simple|modp|kgram"), "task"},
        {cmd->add_option("--param-grid", so.param_grid,
                         "task parameter values"),
         "param_grid"},
        {cmd->add_option("--s-vocab", so.s_vocab), "s_vocab"},
        {cmd->add_option("--k", so.modp_k, "modp residue k"), "k"},
        {cmd->add_option("--train-lens", so.train_lens), "train_lens"},
        {cmd->add_option("--test-lens", so.test_lens), "test_lens"},
        {cmd->add_option("--seeds", so.seeds, "seeds per cell"), "seeds"},
        {cmd->add_option("--depth", so.depth), "depth"},
        {cmd->add_option("--heads", so.heads), "heads"},
        {cmd->add_option("--d", so.d), "d"},
        {cmd->add_option("--mlp-width", so.mlp_width), "mlp_width"},
        {cmd->add_option("--pe", so.pe,
                         "auto|none|periodic|relative_local"),
         "pe"},
        {cmd->add_option("--batch", so.batch), "batch"},
        {cmd->add_option("--max-steps", so.max_steps), "max_steps"},
        {cmd->add_option("--stop-loss", so.stop_loss), "stop_loss"},
        {cmd->add_option("--lr-hidden", so.lr_hidden), "lr_hidden"},
        {cmd->add_option("--lr-embed", so.lr_embed), "lr_embed"},
        {cmd->add_option("--eval-batches", so.eval_batches), "eval_batches"},
        {cmd->add_option("--seed", so.seed, "base seed"), "seed"},
    };
  };
  std::vector<std::pair<const CLI::Option*, std::string>> tr_opts, sw_opts;
  auto* train_cmd = app.add_subcommand("train", "Single training run");
  add_train_opts(train_cmd, tr_opts);
  auto* tr_ckpt = train_cmd->add_option("--checkpoint", checkpoint,
                                        "model checkpoint JSON");
  auto* tr_curve = train_cmd->add_option("--out", curve_path, "curve CSV");
  auto* sweep_cmd = app.add_subcommand("sweep", "Parallel LG sweep");
  add_train_opts(sweep_cmd, sw_opts);
  auto* sw_out = sweep_cmd->add_option("--out", out_csv, "results CSV");

  // verify
  std::string suite = "all";
  auto* verify_cmd = app.add_subcommand("verify", "Invariant suites");
  auto* ve_suite = verify_cmd->add_option(
      "--suite", suite, "hardmax|rounding|markov|bulk|gradients|"
                        "constructions|simulation|all");
  verify_cmd->allow_extras(false);
  auto* ve_seed = verify_cmd->add_option("--seed", seed);
  auto* ve_out = verify_cmd->add_option("--out", out_path, "JSON summary");

  // plot
  std::string csv_path, x_col = "test_len", y_col = "test_loss",
              group_col = "train_len", out_svg = "plot.svg";
  bool log_y = false;
  auto* plot = app.add_subcommand("plot", "CSV to SVG polyline plot");
  auto* pl_csv = plot->add_option("--csv", csv_path)->required();
  auto* pl_x = plot->add_option("--x-col", x_col);
  auto* pl_y = plot->add_option("--y-col", y_col);
  auto* pl_g = plot->add_option("--group-col", group_col,
                                "empty: single series");
  auto* pl_log = plot->add_flag("--log-y", log_y);
  auto* pl_out = plot->add_option("--out", out_svg);

  try {
    app.parse(argc, argv);
    load_config();

    if (*analyze) {
      apply_config(an_model, model_path, "model");
      apply_config(an_bits, p_bits, "p_bits");
      apply_config(an_out, out_path, "out");
      return cmd_analyze(model_path, p_bits, out_path);
    }
    if (*simulate) {
      apply_config(si_f, f_path, "model_f");
      apply_config(si_g, g2_path, "model_g");
      apply_config(si_in, input_path, "input");
      apply_config(si_len, input_len, "len");
      apply_config(si_eps, eps, "eps");
      apply_config(si_fill, filler, "filler");
      apply_config(si_bits, p_bits, "p_bits");
      apply_config(si_seed, seed, "seed");
      apply_config(si_out, out_path, "out");
      return cmd_simulate(f_path, g2_path, input_path, input_len, eps,
                          filler, p_bits, seed, out_path);
    }
    if (*markov) {
      apply_config(mk_f, f_path, "model");
      apply_config(mk_in, input_path, "input");
      apply_config(mk_len, input_len, "len");
      apply_config(mk_n, n_sub, "n");
      apply_config(mk_tries, k_tries, "k_tries");
      apply_config(mk_seed, seed, "seed");
      apply_config(mk_out, out_path, "out");
      return cmd_markov_sim(f_path, input_path, input_len, n_sub, k_tries,
                            seed, out_path);
    }
    if (*gen) {
      apply_config(ge_task, task_name, "task");
      apply_config(ge_param, param, "param");
      apply_config(ge_vocab, s_vocab, "s_vocab");
      apply_config(ge_k, modp_k, "k");
      apply_config(ge_len, t_len, "len");
      apply_config(ge_count, count, "count");
      apply_config(ge_seed, seed, "seed");
      apply_config(ge_cons, construct_out, "construct_model");
      apply_config(ge_beta, beta, "beta");
      apply_config(ge_emlp, eps_mlp, "eps_mlp");
      apply_config(ge_out, out_path, "out");
      return cmd_gen(task_name, param, s_vocab, modp_k, t_len, count, seed,
                     construct_out, beta, eps_mlp, out_path);
    }
    if (*train_cmd || *sweep_cmd) {
      // apply config keys by name for the shared options
      auto& opts = *train_cmd ? tr_opts : sw_opts;
      for (const auto& [opt, key] : opts) {
        if (opt->count() > 0 || !g_config.contains(key)) continue;
        const json& v = g_config.at(key);
        if (key == "task") so.task = v.get<std::string>();
        else if (key == "param_grid") so.param_grid = v.get<std::vector<double>>();
        else if (key == "s_vocab") so.s_vocab = v.get<int>();
        else if (key == "k") so.modp_k = v.get<int>();
        else if (key == "train_lens") so.train_lens = v.get<std::vector<int>>();
        else if (key == "test_lens") so.test_lens = v.get<std::vector<int>>();
        else if (key == "seeds") so.seeds = v.get<int>();
        else if (key == "depth") so.depth = v.get<int>();
        else if (key == "heads") so.heads = v.get<int>();
        else if (key == "d") so.d = v.get<int>();
        else if (key == "mlp_width") so.mlp_width = v.get<int>();
        else if (key == "pe") so.pe = v.get<std::string>();
        else if (key == "batch") so.batch = v.get<int>();
        else if (key == "max_steps") so.max_steps = v.get<int>();
        else if (key == "stop_loss") so.stop_loss = v.get<double>();
        else if (key == "lr_hidden") so.lr_hidden = v.get<double>();
        else if (key == "lr_embed") so.lr_embed = v.get<double>();
        else if (key == "eval_batches") so.eval_batches = v.get<int>();
        else if (key == "seed") so.seed = v.get<std::uint64_t>();
      }
      if (*train_cmd) {
        apply_config(tr_ckpt, checkpoint, "checkpoint");
        apply_config(tr_curve, curve_path, "out");
        return cmd_train(so, checkpoint, curve_path);
      }
      apply_config(sw_out, out_csv, "out");
      return cmd_sweep(so, out_csv);
    }
    if (*verify_cmd) {
      apply_config(ve_suite, suite, "suite");
      apply_config(ve_seed, seed, "seed");
      apply_config(ve_out, out_path, "out");
      return cmd_verify(suite, seed, out_path);
    }
    if (*plot) {
      apply_config(pl_csv, csv_path, "csv");
      apply_config(pl_x, x_col, "x_col");
      apply_config(pl_y, y_col, "y_col");
      apply_config(pl_g, group_col, "group_col");
      apply_config(pl_log, log_y, "log_y");
      apply_config(pl_out, out_svg, "out");
      return cmd_plot(csv_path, x_col, y_col, group_col, log_y, out_svg);
    }
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kExitShape;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
