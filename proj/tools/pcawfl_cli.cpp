// Command line front end: run experiments, verify channel statistics,
// factor datasets, and sweep parameters. Exit codes: 0 success, 1 bad
// arguments or config, 2 runtime failure (including a failed verification).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcawfl/harness.hpp"

namespace {

using namespace pcawfl;

double tail_mean_grad_norm(const std::vector<harness::FrameRecord>& records) {
  const std::size_t count = records.size();
  const std::size_t tail = std::max<std::size_t>(1, count / 10);
  double sum = 0.0;
  for (std::size_t k = count - tail; k < count; ++k)
    sum += records[k].grad_norm_sq;
  return sum / static_cast<double>(tail);
}

void print_guard(const optim::StepsizeGuard& guard, double eta, double beta) {
  std::cout << "stepsize guard   eta = " << eta << ", wfl limit "
            << guard.wfl_limit << (guard.wfl_ok ? " (ok)" : " (VIOLATED)")
            << ", awfl limit at beta=" << beta << " " << guard.awfl_limit
            << (guard.awfl_ok ? " (ok)" : " (VIOLATED)") << "\n";
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            int threads) {
  const auto cfg = harness::load_config(config_path);
  const auto result = harness::run_experiment(cfg, threads);

  std::cout << std::setprecision(6);
  std::cout << "optimizer        " << harness::optimizer_name(cfg.optimizer)
            << "\n"
            << "workers          " << cfg.num_workers << "\n"
            << "frames           " << cfg.num_frames << "\n"
            << "model dim        " << result.d1 << "\n"
            << "compression      " << cfg.raw_dim << " -> " << cfg.reduced_dim;
  {
    const double pct =
        std::round(dpca::comm_saving(cfg.raw_dim, cfg.reduced_dim) * 1e4) / 100.0;
    std::cout << "  (saves " << std::fixed << std::setprecision(2) << pct
              << "% uplink)\n"
              << std::defaultfloat << std::setprecision(6);
  }
  std::cout << "initial loss     " << result.initial_loss << "\n"
            << "final loss       " << result.records.back().loss << "\n";
  if (result.final_accuracy)
    std::cout << "final accuracy   " << *result.final_accuracy << "\n";
  const double measured = result.records.back().running_avg_grad_norm_sq;
  std::cout << "avg |grad|^2     " << measured << "\n"
            << "tail |grad|^2    " << tail_mean_grad_norm(result.records)
            << "  (last 10% of frames)\n"
            << "empirical G      " << result.empirical_G << "\n"
            << "channel usages   " << result.records.back().channel_usages
            << "\n";

  const double lipschitz = harness::estimate_task_lipschitz(cfg);
  const double drop = result.initial_loss - result.min_loss;
  const auto bound = harness::eval_theorem_bounds(
      cfg, result.empirical_G, lipschitz, drop, measured);
  std::cout << "estimated L      " << lipschitz << "\n";
  print_guard(bound.guard, cfg.stepsize, cfg.momentum);
  std::cout << "bound, printed   wfl " << bound.wfl_rhs_printed << "  awfl "
            << bound.awfl_rhs_printed << "\n"
            << "bound, lemma     wfl " << bound.wfl_rhs_lemma << "  awfl "
            << bound.awfl_rhs_lemma << "\n"
            << "measured average " << measured << "\n";

  if (!out_path.empty()) {
    harness::write_metrics_csv(result.records, out_path);
    std::cout << "metrics written  " << out_path << "\n";
  }
  return 0;
}

int cmd_verify(const std::string& config_path) {
  const auto cfg = harness::load_config(config_path);
  const auto report = harness::verify_statistics(cfg);
  std::cout << std::setprecision(6) << "draws " << report.draws << ", dim "
            << report.dim << ", tolerance " << report.tolerance << "\n"
            << "c1 = " << report.constants.c1 << ", c2 = "
            << report.constants.c2 << "\n";
  std::cout << (report.unbiased_ok ? "[PASS]" : "[FAIL]")
            << " aggregate unbiased: relative deviation "
            << report.unbias_rel_dev << "\n";
  std::cout << (report.bound_ok ? "[PASS]" : "[FAIL]")
            << " second moment within bound: " << report.second_moment
            << " <= " << report.bound << " (slack " << report.bound_slack
            << ")\n";
  std::cout << (report.rho_ok ? "[PASS]" : "[FAIL]")
            << " E[rho^-2] closed form: max relative deviation "
            << report.max_rho_rel_dev << "\n";
  for (const auto& check : report.rho_checks)
    std::cout << "       worker " << check.worker << ": expected "
              << check.expected << ", estimated " << check.estimate << "\n";
  return report.all_ok ? 0 : 2;
}

bool looks_like_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char head[4] = {0, 0, 0, 0};
  in.read(reinterpret_cast<char*>(head), 4);
  return in && head[0] == 0 && head[1] == 0 && head[2] == 0x08 && head[3] == 0x03;
}

int cmd_pca(const std::string& in_path, int dim, const std::string& labels_path,
            int workers, bool center, const std::string& out_path) {
  harness::Dataset data;
  if (looks_like_idx_images(in_path)) {
    if (labels_path.empty())
      throw harness::ConfigError(
          "pca: idx image input needs --labels <file>");
    data = harness::load_idx(in_path, labels_path);
  } else {
    data = harness::load_dataset_bin(in_path);
  }
  if (data.labels.empty())
    data.labels.assign(static_cast<std::size_t>(data.samples.cols()), 0);

  const Eigen::Index usable =
      (data.samples.cols() / workers) * workers;
  if (usable < workers)
    throw harness::ConfigError("pca: fewer samples than workers");
  if (usable != data.samples.cols()) {
    std::cout << "note: dropping " << (data.samples.cols() - usable)
              << " trailing samples for an even split\n";
    data.samples.conservativeResize(Eigen::NoChange, usable);
    data.labels.resize(static_cast<std::size_t>(usable));
  }
  if (center) {
    const Eigen::VectorXd mean = data.samples.rowwise().mean();
    data.samples.colwise() -= mean;
  }

  const auto shards = harness::split_contiguous(data, workers);
  std::vector<dpca::LocalFactor> factors;
  factors.reserve(shards.size());
  for (const auto& shard : shards)
    factors.push_back(dpca::local_factor(shard, dim));
  const auto basis = dpca::merge_factors(factors);

  double total_energy = 0.0, captured = 0.0;
  for (const auto& shard : shards) {
    total_energy += shard.samples.squaredNorm();
    captured += (basis.basis.transpose() * shard.samples).squaredNorm();
  }
  const Eigen::MatrixXd gram =
      basis.basis.transpose() * basis.basis -
      Eigen::MatrixXd::Identity(dim, dim);

  std::cout << std::setprecision(6) << "samples          "
            << data.samples.cols() << " x " << data.samples.rows()
            << " features, " << workers << " workers\n"
            << "basis            " << basis.basis.rows() << " x "
            << basis.basis.cols() << "\n"
            << "explained energy "
            << (total_energy > 0 ? captured / total_energy : 1.0) << "\n"
            << "orthonormality   " << gram.cwiseAbs().maxCoeff()
            << " (max |U'U - I|)\n";
  const double pct = std::round(dpca::comm_saving(
                         static_cast<int>(data.samples.rows()), dim) *
                     1e4) / 100.0;
  std::cout << "comm saving      " << std::fixed << std::setprecision(2) << pct
            << "%\n" << std::defaultfloat << std::setprecision(6);

  if (!out_path.empty()) {
    harness::Dataset out;
    out.samples = basis.basis;
    harness::save_dataset(out_path, out);
    std::cout << "basis written    " << out_path << "\n";
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::vector<std::string>& values,
              const std::string& prefix, int threads) {
  const auto base = harness::load_config(config_path);
  struct Row {
    std::string value;
    double final_loss, avg_gns, floor;
    std::optional<double> accuracy;
  };
  std::vector<Row> rows;

  for (const auto& value : values) {
    harness::SimConfig cfg = base;
    try {
      if (param == "h0") {
        cfg.h0 = std::stod(value);
        if (!(cfg.h0 > 0.0)) throw std::invalid_argument("h0");
      } else if (param == "dhat0") {
        cfg.reduced_dim = std::stoi(value);
      } else if (param == "N") {
        const int n = std::stoi(value);
        if (n < 1 ||
            static_cast<std::size_t>(n) > base.distances.size())
          throw harness::ConfigError(
              "sweep: N exceeds the configured distance list");
        cfg.num_workers = n;
        cfg.distances.assign(base.distances.begin(),
                             base.distances.begin() + n);
      }
    } catch (const harness::ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw harness::ConfigError("sweep: bad value '" + value + "' for " +
                                 param);
    }
    // Re-validate derived constraints the overrides may have broken.
    if (cfg.reduced_dim < 1 || cfg.reduced_dim > cfg.raw_dim)
      throw harness::ConfigError("sweep: dhat0 out of [1, raw_dim]");

    const auto result = harness::run_experiment(cfg, threads);
    const std::string out_path = prefix + "_" + param + "_" + value + ".csv";
    harness::write_metrics_csv(result.records, out_path);

    Row row;
    row.value = value;
    row.final_loss = result.records.back().loss;
    row.avg_gns = result.records.back().running_avg_grad_norm_sq;
    row.floor = tail_mean_grad_norm(result.records);
    row.accuracy = result.final_accuracy;
    rows.push_back(row);
    std::cout << "wrote " << out_path << "\n";
  }

  std::cout << std::setprecision(6) << std::left << std::setw(12)
            << param << std::setw(14) << "final_loss" << std::setw(14)
            << "avg|grad|^2" << std::setw(14) << "tail|grad|^2"
            << "accuracy\n";
  for (const auto& row : rows) {
    std::cout << std::setw(12) << row.value << std::setw(14) << row.final_loss
              << std::setw(14) << row.avg_gns << std::setw(14) << row.floor;
    if (row.accuracy) std::cout << *row.accuracy;
    else std::cout << "-";
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analog over-the-air federated learning simulator"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  int run_threads = 1;
  auto* run = app.add_subcommand("run", "Train over the simulated uplink");
  run->add_option("--config", run_config, "experiment config file")->required();
  run->add_option("--out", run_out, "write per-frame metrics CSV here");
  run->add_option("--threads", run_threads, "worker thread count")
      ->check(CLI::PositiveNumber);

  std::string verify_config;
  auto* verify = app.add_subcommand(
      "verify-stats", "Monte Carlo verification of the estimator statistics");
  verify->add_option("--config", verify_config, "experiment config file")
      ->required();

  std::string pca_in, pca_labels, pca_out;
  int pca_dim = 0, pca_workers = 1;
  bool pca_center = false;
  auto* pca =
      app.add_subcommand("pca", "One-shot distributed PCA of a dataset");
  pca->add_option("--in", pca_in, "idx image file or dataset cache")->required();
  pca->add_option("--dim", pca_dim, "reduced dimension")
      ->required()
      ->check(CLI::PositiveNumber);
  pca->add_option("--labels", pca_labels, "idx label file");
  pca->add_option("--workers", pca_workers, "shard count")
      ->check(CLI::PositiveNumber);
  pca->add_flag("--center", pca_center, "subtract the pooled mean first");
  pca->add_option("--out", pca_out, "save the merged basis here");

  std::string sweep_config, sweep_param, sweep_prefix = "sweep";
  std::vector<std::string> sweep_values;
  int sweep_threads = 1;
  auto* sweep = app.add_subcommand("sweep", "Repeat a run over one parameter");
  sweep->add_option("--config", sweep_config, "experiment config file")
      ->required();
  sweep->add_option("--param", sweep_param, "parameter to vary")
      ->required()
      ->check(CLI::IsMember({"h0", "dhat0", "N"}));
  sweep->add_option("--values", sweep_values, "comma separated values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--out-prefix", sweep_prefix, "metric file prefix");
  sweep->add_option("--threads", sweep_threads, "worker thread count")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_config, run_out, run_threads);
    if (verify->parsed()) return cmd_verify(verify_config);
    if (pca->parsed())
      return cmd_pca(pca_in, pca_dim, pca_labels, pca_workers, pca_center,
                     pca_out);
    if (sweep->parsed())
      return cmd_sweep(sweep_config, sweep_param, sweep_values, sweep_prefix,
                       sweep_threads);
  } catch (const harness::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
