// solar: randomized-SVD attention lab.
// Subcommands: svd, datagen, train, verify, bench.
// Exit codes: 0 success, 1 usage/validation error, 2 verification failure.

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "solar/attention.hpp"
#include "solar/bench.hpp"
#include "solar/datagen.hpp"
#include "solar/gradcheck.hpp"
#include "solar/io_util.hpp"
#include "solar/randsvd.hpp"
#include "solar/solar_model.hpp"
#include "solar/theory.hpp"

namespace {

constexpr const char *kVersion =
    "solar 1.0.0 (defaults: clamp_eps=1e-9, grad_tol=1e-4, factor_drop=1e-9)";

struct SvdArgs {
  std::string input, out;
  std::size_t rank = 8;
  int iters = 4;
  std::uint64_t seed = 1;
  bool stabilized = false;
};

int run_svd(const SvdArgs &args) {
  const solar::Matrix h = solar::matrix_from_csv_file(args.input);
  solar::Rng rng(args.seed);
  const solar::SvdFactors f =
      solar::randomized_svd(h, args.rank, args.iters, rng, args.stabilized);
  if (f.degenerate)
    std::fprintf(stderr, "warning: input is all zeros, factors are canonical\n");
  solar::write_file_atomic(args.out, solar::factors_to_csv(f));
  std::printf("svd: %zux%zu -> rank %zu, sigma_1=%s\n", h.rows, h.cols, f.rank,
              solar::format_real(f.s[0]).c_str());
  return 0;
}

struct DatagenArgs {
  std::size_t users = 1000, vocab = 1000, dim = 32, true_rank = 8;
  std::size_t hist = 50, m = 50;
  double a = 2.0, b = 4.0, noise = 0.1, shared = 0.0;
  bool force_mixed = false;
  std::uint64_t seed = 1;
  std::string out;
};

int run_datagen(const DatagenArgs &args) {
  const solar::ItemCatalog cat = solar::gen_catalog(
      args.vocab, args.dim, args.true_rank, args.seed, args.shared);
  solar::FlipSpec flip;
  flip.base_weight = args.a;
  flip.penalty_weight = args.b;
  flip.noise = args.noise;
  flip.force_mixed = args.force_mixed;
  const auto data = solar::gen_dataset(cat, args.users, args.hist, args.m, flip,
                                       solar::derive_seed(args.seed, 1));
  std::string body;
  for (const auto &inst : data) body += solar::format_instance(inst) + "\n";
  solar::write_file_atomic(args.out, body);
  std::printf("datagen: wrote %zu instances to %s\n", data.size(), args.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string data, metrics;
  std::string variant = "svd";
  std::string blocks = "both";
  std::string loss = "listwise";
  std::size_t rank = 8, dim = 32, batch = 8;
  int iters = 4, epochs = 20;
  double lr = 0.05, momentum = 0.9;
  bool no_softmax = false;
  std::uint64_t seed = 1;
};

int run_train(const TrainArgs &args) {
  const auto data = solar::read_dataset(args.data);
  std::size_t vocab = 0;
  for (const auto &inst : data) {
    for (std::size_t id : inst.history) vocab = std::max(vocab, id + 1);
    for (std::size_t id : inst.candidates) vocab = std::max(vocab, id + 1);
  }

  solar::AttnConfig attn;
  attn.variant = solar::attn_variant_from_string(args.variant);
  attn.rank = args.rank;
  attn.n_iter = args.iters;
  attn.apply_softmax = !args.no_softmax;
  attn.seed = solar::derive_seed(args.seed, 2);

  const bool use_history = args.blocks == "both" || args.blocks == "history";
  const bool use_candidates = args.blocks == "both" || args.blocks == "candidates";
  solar::SolarParams params = solar::init_params(
      vocab, args.dim, attn, solar::derive_seed(args.seed, 3), use_history,
      use_candidates);

  solar::TrainConfig cfg;
  cfg.lr = args.lr;
  cfg.momentum = args.momentum;
  cfg.epochs = args.epochs;
  cfg.batch_size = args.batch;
  cfg.seed = args.seed;
  cfg.loss = solar::loss_kind_from_string(args.loss);

  const solar::TrainResult res = solar::train(params, data, cfg);
  std::string csv = "epoch,loss,auc,uauc,risk\n";
  for (const auto &em : res.history) {
    csv += std::to_string(em.epoch) + "," + solar::format_real(em.loss) + "," +
           solar::format_real(em.auc) + "," + solar::format_real(em.uauc) + "," +
           solar::format_real(em.risk) + "\n";
  }
  if (!args.metrics.empty()) solar::write_file_atomic(args.metrics, csv);
  if (res.diverged) {
    std::fprintf(stderr, "train: diverged, restored last finite parameters\n");
    return 1;
  }
  const auto &last = res.history.back();
  std::printf("train: %d epochs, loss=%.6f auc=%.4f uauc=%.4f risk=%.4f "
              "(skipped %zu)\n",
              args.epochs, last.loss, last.auc, last.uauc, last.risk,
              res.skipped_instances);
  return 0;
}

struct VerifyArgs {
  std::string suite = "all";
  std::string report;
  std::uint64_t seed = 1;
  bool inject_f_sign_bug = false;  // test fixture
};

void append_gradient_reports(std::vector<solar::VerificationReport> &reports,
                             std::uint64_t seed, bool inject_bug) {
  solar::GradSuiteConfig cfg;
  cfg.instances = 30;
  cfg.seed = solar::derive_seed(seed, 11);
  cfg.inject_f_sign_bug = inject_bug;
  for (const auto &row : solar::gradient_suite(cfg)) {
    solar::VerificationReport rep;
    rep.check = "gradient/i" + std::to_string(row.instance) + "/" + row.block;
    rep.measured = row.max_rel_err;
    rep.expected = 0.0;
    rep.tolerance = cfg.tolerance;
    rep.pass = row.pass;
    reports.push_back(rep);
  }
}

std::string gradient_suite_csv(std::uint64_t seed, bool inject_bug) {
  solar::GradSuiteConfig cfg;
  cfg.instances = 30;
  cfg.seed = solar::derive_seed(seed, 11);
  cfg.inject_f_sign_bug = inject_bug;
  std::string csv = "instance,block,max_rel_err,clamped_pairs,pass\n";
  for (const auto &row : solar::gradient_suite(cfg)) {
    csv += std::to_string(row.instance) + "," + row.block + "," +
           solar::format_real(row.max_rel_err) + "," +
           std::to_string(row.clamped_pairs) + "," + (row.pass ? "1" : "0") + "\n";
  }
  return csv;
}

void append_bayes_reports(std::vector<solar::VerificationReport> &reports,
                          std::uint64_t seed) {
  solar::Matrix two(2, 2);
  two(0, 1) = 0.8;
  two(1, 0) = 0.2;
  reports.push_back(solar::bayes_limit_check(two, 0.5, 20000, 1.6e-3));
  reports.back().check = "bayes_limit/two_item_0.8";
  solar::Rng rng(solar::derive_seed(seed, 21));
  for (int i = 0; i < 5; ++i) {
    reports.push_back(solar::bayes_limit_check(
        solar::random_consistent_preferences(4, rng), 0.5, 4000, 1e-2));
    reports.back().check = "bayes_limit/random4_" + std::to_string(i);
  }
}

void append_flip_reports(std::vector<solar::VerificationReport> &reports) {
  solar::TwoContextSpec flip;
  flip.n_items = 2;
  flip.first = {{0, 1}, {0.9, 0.1}, 0.5};
  flip.second = {{0, 1}, {0.1, 0.9}, 0.5};
  for (auto &rep : solar::irreducible_risk_check(flip).reports)
    reports.push_back(rep);

  solar::TwoContextSpec no_flip;
  no_flip.n_items = 2;
  no_flip.first = {{0, 1}, {0.9, 0.1}, 0.5};
  no_flip.second = {{0, 1}, {0.8, 0.2}, 0.5};
  for (auto &rep : solar::irreducible_risk_check(no_flip).reports)
    reports.push_back(rep);
}

void append_rademacher_reports(std::vector<solar::VerificationReport> &reports,
                               std::uint64_t seed) {
  const std::pair<std::size_t, double> cases[] = {
      {10, 0.0}, {10, 0.5}, {10, 1.0}, {50, 0.2}};
  for (const auto &[m, rho] : cases) {
    solar::TheoryConfig cfg;
    cfg.m = m;
    cfg.rho = rho;
    cfg.requests = 2000;
    cfg.mc_samples = 4000;
    // Tight feature dimension: the expectation of the norm then sits a
    // comfortable ~1/(4 dim) below its Jensen bound, well past MC noise.
    cfg.dim = m + 1;
    cfg.seed = solar::derive_seed(seed, 31 + m);
    for (auto &rep : solar::rademacher_mismatch(cfg)) reports.push_back(rep);
  }
}

void append_correlation_reports(std::vector<solar::VerificationReport> &reports,
                                std::uint64_t seed) {
  // Shared-component stream at 10:1: within-request label order is carried
  // by the small discriminative parts, which is what pressures the set-wise
  // block into de-correlating the representations.
  const std::size_t vocab = 200, dim = 16, m = 8;
  const solar::ItemCatalog cat =
      solar::gen_catalog(vocab, dim, 8, 42, 10.0);
  solar::FlipSpec flip;
  flip.base_weight = 60.0;
  flip.penalty_weight = 60.0;
  flip.noise = 0.3;
  flip.force_mixed = true;
  const auto data = solar::gen_dataset(cat, 400, 8, m, flip, 50);

  solar::AttnConfig attn;
  attn.variant = solar::AttnVariant::kSvd;
  attn.rank = 2;
  attn.seed = solar::derive_seed(seed, 43);

  solar::SolarParams point =
      solar::init_params(vocab, dim, attn, 45, false, false);
  point.embeddings = cat.embeddings;
  solar::SolarParams set = solar::init_params(vocab, dim, attn, 45, false, true);
  set.embeddings = cat.embeddings;

  solar::TrainConfig cfg;
  cfg.lr = 0.2;
  cfg.epochs = 40;
  cfg.seed = 46;
  const solar::TrainResult point_res = solar::train(point, data, cfg);
  const solar::TrainResult set_res = solar::train(set, data, cfg);

  for (auto &rep :
       solar::correlation_check(point_res.params, set_res.params, data, 0.1))
    reports.push_back(rep);
}

int run_verify(const VerifyArgs &args) {
  std::vector<solar::VerificationReport> reports;
  const std::string &suite = args.suite;
  const bool all = suite == "all";

  if (suite == "gradient" && !args.report.empty()) {
    // Dedicated gradient-suite CSV (instance,block,max_rel_err,clamped_pairs).
    solar::write_file_atomic(args.report,
                             gradient_suite_csv(args.seed, args.inject_f_sign_bug));
  }
  if (all || suite == "gradient")
    append_gradient_reports(reports, args.seed, args.inject_f_sign_bug);
  if (all || suite == "bayes") append_bayes_reports(reports, args.seed);
  if (all || suite == "flip") append_flip_reports(reports);
  if (all || suite == "lipschitz")
    for (auto &rep : solar::lipschitz_check(100000, solar::derive_seed(args.seed, 51)))
      reports.push_back(rep);
  if (all || suite == "rademacher") append_rademacher_reports(reports, args.seed);
  if (all || suite == "correlation") append_correlation_reports(reports, args.seed);

  if (reports.empty()) {
    std::fprintf(stderr, "verify: unknown suite '%s'\n", suite.c_str());
    return 1;
  }

  bool all_pass = true;
  for (const auto &rep : reports) {
    std::printf("[%s] %s measured=%s expected=%s tol=%s\n",
                rep.pass ? "PASS" : "FAIL", rep.check.c_str(),
                solar::format_real(rep.measured).c_str(),
                solar::format_real(rep.expected).c_str(),
                solar::format_real(rep.tolerance).c_str());
    all_pass = all_pass && rep.pass;
  }
  if (!args.report.empty() && suite != "gradient")
    solar::write_file_atomic(args.report, solar::reports_to_csv(reports));
  std::printf("verify: %zu checks, %s\n", reports.size(),
              all_pass ? "all passed" : "FAILURES PRESENT");
  return all_pass ? 0 : 2;
}

struct BenchArgs {
  std::string regime = "tied";
  std::string n_list = "256,512,1024,2048,4096,8192";
  std::string variants = "softmax,linear,svd";
  std::size_t m = 128, d = 64, rank = 8;
  int reps = 7, warmup = 2, iters = 4;
  std::uint64_t seed = 1;
  std::string csv;
};

std::vector<std::string> split_commas(const std::string &s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = s.find(',', start);
    if (end == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

int run_bench_cmd(const BenchArgs &args) {
  solar::BenchSpec spec;
  spec.tied = args.regime == "tied";
  spec.n_grid.clear();
  for (const auto &tok : split_commas(args.n_list))
    spec.n_grid.push_back(std::stoull(tok));
  spec.variants.clear();
  for (const auto &tok : split_commas(args.variants))
    spec.variants.push_back(solar::attn_variant_from_string(tok));
  spec.m = args.m;
  spec.d = args.d;
  spec.rank = args.rank;
  spec.n_iter = args.iters;
  spec.repetitions = args.reps;
  spec.warmups = args.warmup;
  spec.seed = args.seed;

  const auto rows = solar::run_bench(spec);
  std::string csv = solar::bench_csv_header() + "\n";
  for (const auto &row : rows) csv += solar::bench_csv_row(row) + "\n";
  if (!args.csv.empty()) solar::write_file_atomic(args.csv, csv);
  std::fputs(csv.c_str(), stdout);

  for (solar::AttnVariant variant : spec.variants) {
    std::vector<solar::BenchRow> mine;
    for (const auto &row : rows)
      if (row.variant == variant) mine.push_back(row);
    if (mine.size() >= 4) {
      const solar::ScalingFit fit = solar::fit_scaling(mine);
      std::printf("# %s: slope=%.3f r2=%.4f\n",
                  solar::attn_variant_name(variant), fit.slope, fit.r2);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Randomized-SVD attention lab: factorization, set-wise ranking "
               "model, theory verification, latency benchmarks"};
  app.set_version_flag("--version", kVersion);
  // Line-oriented key=value config, keys prefixed by subcommand
  // (e.g. datagen.users=500). Command-line flags override file values and
  // unknown keys are rejected.
  app.set_config("--config")->configurable(false);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  SvdArgs svd_args;
  auto *svd = app.add_subcommand("svd", "Randomized truncated SVD of a CSV matrix");
  svd->add_option("--input", svd_args.input, "matrix CSV (header rows,cols)")
      ->required();
  svd->add_option("--rank", svd_args.rank, "target rank")->required();
  svd->add_option("--iters", svd_args.iters, "power iterations");
  svd->add_option("--seed", svd_args.seed, "sketch seed");
  svd->add_flag("--stabilized", svd_args.stabilized,
                "re-orthonormalize between power steps");
  svd->add_option("--out", svd_args.out, "output factor CSV")->required();

  DatagenArgs dg_args;
  auto *dg = app.add_subcommand("datagen", "Synthetic ranking request stream");
  dg->add_option("--users", dg_args.users, "number of requests");
  dg->add_option("--vocab", dg_args.vocab, "catalog size");
  dg->add_option("--dim", dg_args.dim, "embedding dimension");
  dg->add_option("--true-rank", dg_args.true_rank, "embedding matrix rank");
  dg->add_option("--hist", dg_args.hist, "history length per request");
  dg->add_option("--m", dg_args.m, "candidate count per request");
  dg->add_option("--a", dg_args.a, "affinity weight in the label model");
  dg->add_option("--b", dg_args.b, "co-candidate penalty weight");
  dg->add_option("--noise", dg_args.noise, "user vector noise scale");
  dg->add_option("--shared-strength", dg_args.shared,
                 "shared-component norm ratio (0 = off)");
  dg->add_flag("--force-mixed", dg_args.force_mixed,
               "guarantee at least one positive and one negative label");
  dg->add_option("--seed", dg_args.seed, "generator seed");
  dg->add_option("--out", dg_args.out, "output path")->required();

  TrainArgs tr_args;
  auto *tr = app.add_subcommand("train", "Train the set-wise ranking model");
  tr->add_option("--data", tr_args.data, "dataset path")->required();
  tr->add_option("--variant", tr_args.variant, "history attention: svd|softmax|linear")
      ->check(CLI::IsMember({"svd", "softmax", "linear"}));
  tr->add_option("--rank", tr_args.rank, "svd rank");
  tr->add_option("--iters", tr_args.iters, "power iterations");
  tr->add_flag("--no-softmax", tr_args.no_softmax, "disable softmax in svd attention");
  tr->add_option("--blocks", tr_args.blocks, "enabled blocks")
      ->check(CLI::IsMember({"both", "history", "candidates", "none"}));
  tr->add_option("--dim", tr_args.dim, "embedding dimension");
  tr->add_option("--loss", tr_args.loss, "training loss")
      ->check(CLI::IsMember({"listwise", "pointwise-bce", "pairwise-bce"}));
  tr->add_option("--lr", tr_args.lr, "learning rate");
  tr->add_option("--momentum", tr_args.momentum, "sgd momentum");
  tr->add_option("--epochs", tr_args.epochs, "training epochs");
  tr->add_option("--batch", tr_args.batch, "batch size");
  tr->add_option("--seed", tr_args.seed, "training seed");
  tr->add_option("--metrics", tr_args.metrics, "per-epoch metrics CSV");

  VerifyArgs vf_args;
  auto *vf = app.add_subcommand("verify", "Numerical verification suites");
  vf->add_option("--suite", vf_args.suite,
                 "all|bayes|flip|lipschitz|rademacher|correlation|gradient")
      ->check(CLI::IsMember({"all", "bayes", "flip", "lipschitz", "rademacher",
                             "correlation", "gradient"}));
  vf->add_option("--seed", vf_args.seed, "suite seed");
  vf->add_option("--report", vf_args.report, "report CSV path");
  vf->add_flag("--inject-f-sign-bug", vf_args.inject_f_sign_bug)
      ->group("");  // hidden: corrupts the backward pass to exercise exit 2

  BenchArgs bn_args;
  auto *bn = app.add_subcommand("bench", "Single-thread forward latency grid");
  bn->add_option("--regime", bn_args.regime, "tied|fixed-m")
      ->check(CLI::IsMember({"tied", "fixed-m"}));
  bn->add_option("--n", bn_args.n_list, "comma-separated history lengths");
  bn->add_option("--m", bn_args.m, "candidate count (fixed-m regime)");
  bn->add_option("--d", bn_args.d, "embedding dimension");
  bn->add_option("--rank", bn_args.rank, "svd rank");
  bn->add_option("--variants", bn_args.variants, "comma-separated variant list");
  bn->add_option("--reps", bn_args.reps, "timed repetitions per cell");
  bn->add_option("--warmup", bn_args.warmup, "discarded warmup runs per cell");
  bn->add_option("--iters", bn_args.iters, "svd power iterations");
  bn->add_option("--seed", bn_args.seed, "input generation seed");
  bn->add_option("--csv", bn_args.csv, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    // 0 for --help/--version, 1 for any malformed invocation.
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (svd->parsed()) return run_svd(svd_args);
    if (dg->parsed()) return run_datagen(dg_args);
    if (tr->parsed()) return run_train(tr_args);
    if (vf->parsed()) return run_verify(vf_args);
    if (bn->parsed()) return run_bench_cmd(bn_args);
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
