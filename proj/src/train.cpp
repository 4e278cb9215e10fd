// SPDX-License-Identifier: Apache-2.0
#include "covpool/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "covpool/error.hpp"
#include "covpool/kernels.hpp"
#include "covpool/rng.hpp"

namespace covpool {

namespace {

long to_long(const std::string& s, const std::string& key, std::vector<std::string>& problems) {
  try {
    return std::stol(s);
  } catch (const std::exception&) {
    problems.push_back(key + ": expected an integer, got '" + s + "'");
    return 0;
  }
}

double to_double(const std::string& s, const std::string& key,
                 std::vector<std::string>& problems) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    problems.push_back(key + ": expected a number, got '" + s + "'");
    return 0.0;
  }
}

}  // namespace

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> p;
  const std::set<std::string> datasets = {"synth-cov", "mnist", "cifar10", "cached"};
  if (!datasets.count(dataset)) p.push_back("dataset: unknown kind '" + dataset + "'");
  if (dataset == "mnist" && (mnist_train_images.empty() || mnist_test_images.empty()))
    p.push_back("dataset: mnist needs mnist_train_images/mnist_test_images paths");
  if (dataset == "cifar10" && (cifar_train.empty() || cifar_test.empty()))
    p.push_back("dataset: cifar10 needs cifar_train/cifar_test paths");
  if (dataset == "cached" && (cached_train.empty() || cached_test.empty()))
    p.push_back("dataset: cached needs cached_train/cached_test paths");
  if (head != "gap" && head != "gcp") p.push_back("head: must be 'gap' or 'gcp'");
  if (gap_scale < 0.0) p.push_back("gap_scale: must be >= 0 (0 selects 1/N)");
  if (epochs < 0) p.push_back("epochs: must be >= 0");
  if (max_steps < 0) p.push_back("max_steps: must be >= 0");
  if (batch < 1) p.push_back("batch: must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) p.push_back("momentum: must lie in [0,1)");
  if (weight_decay < 0.0) p.push_back("weight_decay: must be >= 0");
  if (probe_cadence < 0) p.push_back("probe_cadence: must be >= 0");
  if (probe_cadence > 0) {
    if (!(grid.a >= 0.0) || !(grid.a < grid.b)) p.push_back("probe grid: needs 0 <= a < b");
    if (grid.count < 2) p.push_back("probe grid: needs count >= 2");
  }
  if (probe_direction != 1 && probe_direction != -1)
    p.push_back("probe_direction: must be +1 or -1");
  if (probe_mode != "net" && probe_mode != "quadratic")
    p.push_back("probe_mode: must be 'net' or 'quadratic'");
  if (threads < 1) p.push_back("threads: must be >= 1");
  try {
    ScheduleSpec::parse(schedule);
  } catch (const Error& e) {
    p.push_back(std::string("schedule: ") + e.what());
  }
  try {
    if (!arch.empty()) parse_arch(arch, 1);
  } catch (const Error& e) {
    p.push_back(std::string("arch: ") + e.what());
  }
  if (dataset == "synth-cov") {
    if (synth.classes < 2) p.push_back("synth.classes: must be >= 2");
    if (synth.channels < 2) p.push_back("synth.channels: must be >= 2");
    if (!(synth.rho > 0.0) || !(synth.rho < 1.0)) p.push_back("synth.rho: must lie in (0,1)");
    if (synth.train_per_class < 1 || synth.test_per_class < 1)
      p.push_back("synth: needs at least one sample per class per split");
  }
  return p;
}

RunConfig RunConfig::from_kv(const KvConfig& kv, std::vector<std::string>& problems) {
  RunConfig c;
  for (const auto& [key, val] : kv.entries()) {
    if (key == "dataset") c.dataset = val;
    else if (key == "synth.classes") c.synth.classes = static_cast<std::size_t>(to_long(val, key, problems));
    else if (key == "synth.channels") c.synth.channels = static_cast<std::size_t>(to_long(val, key, problems));
    else if (key == "synth.height") c.synth.height = static_cast<std::size_t>(to_long(val, key, problems));
    else if (key == "synth.width") c.synth.width = static_cast<std::size_t>(to_long(val, key, problems));
    else if (key == "synth.rho") c.synth.rho = to_double(val, key, problems);
    else if (key == "synth.train_per_class") c.synth.train_per_class = static_cast<std::size_t>(to_long(val, key, problems));
    else if (key == "synth.test_per_class") c.synth.test_per_class = static_cast<std::size_t>(to_long(val, key, problems));
    else if (key == "synth.seed") c.synth.seed = static_cast<std::uint64_t>(to_long(val, key, problems));
    else if (key == "mnist_train_images") c.mnist_train_images = val;
    else if (key == "mnist_train_labels") c.mnist_train_labels = val;
    else if (key == "mnist_test_images") c.mnist_test_images = val;
    else if (key == "mnist_test_labels") c.mnist_test_labels = val;
    else if (key == "cifar_train") c.cifar_train = val;
    else if (key == "cifar_test") c.cifar_test = val;
    else if (key == "cached_train") c.cached_train = val;
    else if (key == "cached_test") c.cached_test = val;
    else if (key == "arch") c.arch = val;
    else if (key == "head") c.head = val;
    else if (key == "gap_scale") c.gap_scale = to_double(val, key, problems);
    else if (key == "schedule") c.schedule = val;
    else if (key == "epochs") c.epochs = to_long(val, key, problems);
    else if (key == "max_steps") c.max_steps = to_long(val, key, problems);
    else if (key == "batch") c.batch = static_cast<std::size_t>(to_long(val, key, problems));
    else if (key == "momentum") c.momentum = to_double(val, key, problems);
    else if (key == "weight_decay") c.weight_decay = to_double(val, key, problems);
    else if (key == "probe_cadence") c.probe_cadence = to_long(val, key, problems);
    else if (key == "probe_grid_a") c.grid.a = to_double(val, key, problems);
    else if (key == "probe_grid_b") c.grid.b = to_double(val, key, problems);
    else if (key == "probe_grid_count") c.grid.count = static_cast<std::size_t>(to_long(val, key, problems));
    else if (key == "probe_layer") c.probe_layer = static_cast<std::size_t>(to_long(val, key, problems));
    else if (key == "probe_direction") c.probe_direction = static_cast<int>(to_long(val, key, problems));
    else if (key == "probe_mode") c.probe_mode = val;
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_long(val, key, problems));
    else if (key == "out_dir") c.out_dir = val;
    else if (key == "threads") c.threads = static_cast<int>(to_long(val, key, problems));
    else if (key == "deterministic") c.deterministic = (val == "1" || val == "true");
    else problems.push_back("unknown config key '" + key + "'");
  }
  return c;
}

KvConfig RunConfig::to_kv() const {
  KvConfig kv;
  kv.set("dataset", dataset);
  kv.set("synth.classes", std::to_string(synth.classes));
  kv.set("synth.channels", std::to_string(synth.channels));
  kv.set("synth.height", std::to_string(synth.height));
  kv.set("synth.width", std::to_string(synth.width));
  kv.set("synth.rho", format_double(synth.rho));
  kv.set("synth.train_per_class", std::to_string(synth.train_per_class));
  kv.set("synth.test_per_class", std::to_string(synth.test_per_class));
  kv.set("synth.seed", std::to_string(synth.seed));
  if (!mnist_train_images.empty()) kv.set("mnist_train_images", mnist_train_images);
  if (!mnist_train_labels.empty()) kv.set("mnist_train_labels", mnist_train_labels);
  if (!mnist_test_images.empty()) kv.set("mnist_test_images", mnist_test_images);
  if (!mnist_test_labels.empty()) kv.set("mnist_test_labels", mnist_test_labels);
  if (!cifar_train.empty()) kv.set("cifar_train", cifar_train);
  if (!cifar_test.empty()) kv.set("cifar_test", cifar_test);
  if (!cached_train.empty()) kv.set("cached_train", cached_train);
  if (!cached_test.empty()) kv.set("cached_test", cached_test);
  kv.set("arch", arch);
  kv.set("head", head);
  kv.set("gap_scale", format_double(gap_scale));
  kv.set("schedule", schedule);
  kv.set("epochs", std::to_string(epochs));
  kv.set("max_steps", std::to_string(max_steps));
  kv.set("batch", std::to_string(batch));
  kv.set("momentum", format_double(momentum));
  kv.set("weight_decay", format_double(weight_decay));
  kv.set("probe_cadence", std::to_string(probe_cadence));
  kv.set("probe_grid_a", format_double(grid.a));
  kv.set("probe_grid_b", format_double(grid.b));
  kv.set("probe_grid_count", std::to_string(grid.count));
  kv.set("probe_layer", std::to_string(probe_layer));
  kv.set("probe_direction", std::to_string(probe_direction));
  kv.set("probe_mode", probe_mode);
  kv.set("seed", std::to_string(seed));
  kv.set("out_dir", out_dir);
  kv.set("threads", std::to_string(threads));
  kv.set("deterministic", deterministic ? "1" : "0");
  return kv;
}

std::pair<Dataset, Dataset> load_datasets(const RunConfig& cfg) {
  if (cfg.dataset == "synth-cov") return gen_cov_task(cfg.synth);
  if (cfg.dataset == "mnist")
    return {read_idx(cfg.mnist_train_images, cfg.mnist_train_labels),
            read_idx(cfg.mnist_test_images, cfg.mnist_test_labels)};
  if (cfg.dataset == "cifar10")
    return {read_cifar10_bin(cfg.cifar_train), read_cifar10_bin(cfg.cifar_test)};
  if (cfg.dataset == "cached")
    return {load_dataset(cfg.cached_train), load_dataset(cfg.cached_test)};
  throw ValidationError({"dataset: unknown kind '" + cfg.dataset + "'"});
}

Network build_network(const RunConfig& cfg, const Dataset& train) {
  std::vector<LayerSpec> layers = parse_arch(cfg.arch, train.images.c);
  LayerSpec head;
  head.kind = cfg.head == "gap" ? LayerKind::GapHead : LayerKind::GcpHead;
  layers.push_back(head);
  LayerSpec dense;
  dense.kind = LayerKind::Dense;
  layers.push_back(dense);
  Network net = Network::build(std::move(layers), train.images.shape(), train.classes, cfg.seed);
  net.gap_scale = cfg.gap_scale;
  return net;
}

double evaluate_accuracy(const Network& net, const Dataset& ds, std::size_t batch) {
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch) {
    const std::size_t stop = std::min(ds.size(), start + batch);
    idx.clear();
    for (std::size_t i = start; i < stop; ++i) idx.push_back(i);
    const Batch  b = make_batch(ds, idx);
    const ForwardResult fr = forward(net, b);
    for (std::size_t r = 0; r < b.labels.size(); ++r) {
      const double* row = fr.logits.row(r);
      std::size_t best = 0;
      for (std::size_t k = 1; k < net.num_classes; ++k)
        if (row[k] > row[best]) best = k;
      if (static_cast<int>(best) == b.labels[r]) ++correct;
    }
  }
  return ds.size() ? static_cast<double>(correct) / static_cast<double>(ds.size()) : 0.0;
}

namespace {

// Closed-form quadratic oracle L(x) = ½‖x‖², used by probe_mode=quadratic to
// exercise the probe pipeline against exact values.
LossField quadratic_field() {
  LossField f;
  f.loss = [](std::span<const double> x) {
    return 0.5 * kern::sumsq(x.data(), x.size());
  };
  f.grad = [](std::span<const double> x) {
    return std::vector<double>(x.begin(), x.end());
  };
  return f;
}

}  // namespace

TrainResult run_training(const RunConfig& cfg) {
  {
    const auto problems = cfg.validate();
    if (!problems.empty()) throw ValidationError(problems);
  }
  if (cfg.deterministic) kern::select(kern::Backend::Scalar);
  const int threads = cfg.deterministic ? 1 : cfg.threads;

  auto [train_ds, test_ds] = load_datasets(cfg);
  if (train_ds.size() == 0) throw ValidationError({"dataset: empty training split"});

  TrainResult result;
  result.net = build_network(cfg, train_ds);
  result.probes.head = cfg.head;
  result.probes.seed = cfg.seed;
  result.probes.grid = cfg.grid;
  if (cfg.probe_cadence > 0 && cfg.probe_layer >= result.net.layer_count())
    throw ValidationError({"probe_layer: index " + std::to_string(cfg.probe_layer) +
                           " out of range for a " + std::to_string(result.net.layer_count()) +
                           "-layer network"});

  const ScheduleSpec sched = ScheduleSpec::parse(cfg.schedule);

  SgdState sgd;
  sgd.momentum = cfg.momentum;
  sgd.weight_decay = cfg.weight_decay;
  std::vector<std::size_t> sizes;
  for (const auto& p : result.net.params) {
    sizes.push_back(p.w.size());
    sizes.push_back(p.b.size());
  }
  sgd.init(sizes);

  Rng shuffle_rng(Rng::mix(cfg.seed, 0x5348554646ULL));
  std::vector<std::size_t> order(train_ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double eval_acc = evaluate_accuracy(result.net, test_ds, cfg.batch);
  result.epoch_eval_acc.push_back(eval_acc);

  double cosine_sum = 0.0;
  std::size_t cosine_count = 0;

  long step = 0;
  bool stop = false;
  for (long epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    const std::size_t epoch_first_row = result.rows.size();
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < train_ds.size() && !stop; start += cfg.batch) {
      // per-step evaluation so step-indexed schedules decay within the epoch
      const double lr = lr_for_training(sched, epoch, step);
      sgd.lr = lr;
      const std::size_t stopi = std::min(train_ds.size(), start + cfg.batch);
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                   order.begin() + static_cast<long>(stopi));
      const Batch batch = make_batch(train_ds, idx);
      ForwardResult fr = forward(result.net, batch);

      if (cfg.probe_cadence > 0 && step % cfg.probe_cadence == 0) {
        ProbeRecord rec;
        rec.step = step;
        rec.loss = fr.loss;
        if (cfg.probe_mode == "quadratic") {
          const LossField qf = quadratic_field();
          const Tensor& x0 = fr.tape.outputs[cfg.probe_layer];
          const ProbeResult dl =
              loss_lipschitz_probe(qf, x0.v, cfg.grid, cfg.probe_direction, threads);
          const ProbeResult dg =
              gradient_predictiveness_probe(qf, x0.v, cfg.grid, cfg.probe_direction, threads);
          rec.loss = qf.loss(x0.v);
          rec.dl_min = dl.min;
          rec.dl_max = dl.max;
          rec.dg_min = dg.min;
          rec.dg_max = dg.max;
        } else {
          const ProbeResult dl = loss_lipschitz_probe(result.net, fr.tape, cfg.probe_layer,
                                                      cfg.grid, cfg.probe_direction, threads);
          const ProbeResult dg = gradient_predictiveness_probe(
              result.net, fr.tape, cfg.probe_layer, cfg.grid, cfg.probe_direction, threads);
          rec.dl_min = dl.min;
          rec.dl_max = dl.max;
          rec.dg_min = dg.min;
          rec.dg_max = dg.max;
        }
        result.probes.records.push_back(rec);

        // Preconditioner diagnostic: how well the trimmed gradient tracks the
        // full one on this batch's head contexts.
        if (result.net.layers[result.net.head_index].kind == LayerKind::GcpHead) {
          const auto& ctxs = fr.tape.gcp_ctx[result.net.head_index];
          if (!ctxs.empty()) {
            const Tensor dpool =
                grad_wrt_activation(result.net, fr.tape, result.net.head_index);
            PooledVector g;
            g.dim = result.net.pooled_dim;
            g.values.assign(dpool.at(0, 0), dpool.at(0, 0) + g.dim);
            cosine_sum += trimmed_cosine_similarity(ctxs[0], devectorize_grad(g));
            ++cosine_count;
          }
        }
      }

      Gradients grads = backward(result.net, fr.tape);
      for (std::size_t li = 0; li < result.net.params.size(); ++li) {
        auto& p = result.net.params[li];
        if (!p.w.empty()) sgd_step(sgd, p.w, grads.layers[li].w, 2 * li);
        if (!p.b.empty()) sgd_step(sgd, p.b, grads.layers[li].b, 2 * li + 1);
      }

      result.rows.push_back({step, epoch, lr, fr.loss, 0.0});
      ++step;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) stop = true;
    }
    eval_acc = evaluate_accuracy(result.net, test_ds, cfg.batch);
    result.epoch_eval_acc.push_back(eval_acc);
    // every row of the epoch carries the end-of-epoch eval accuracy
    for (std::size_t i = epoch_first_row; i < result.rows.size(); ++i)
      result.rows[i].eval_acc = eval_acc;
  }
  result.final_eval_acc = eval_acc;
  result.mean_trimmed_cosine = cosine_count ? cosine_sum / static_cast<double>(cosine_count) : 0.0;
  return result;
}

TrainResult run_probed_training(const RunConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.probe_cadence <= 0) problems.push_back("probe_cadence: probed training needs > 0");
  auto rest = cfg.validate();
  problems.insert(problems.end(), rest.begin(), rest.end());
  if (!problems.empty()) throw ValidationError(problems);
  return run_training(cfg);
}

std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream os;
  os << "step,epoch,lr,train_loss,eval_acc\n";
  for (const auto& r : rows)
    os << r.step << "," << r.epoch << "," << format_double(r.lr) << ","
       << format_double(r.train_loss) << "," << format_double(r.eval_acc) << "\n";
  return os.str();
}

std::string probes_csv(const ProbeSeries& series) {
  std::ostringstream os;
  os << "step,loss,dl_min,dl_max,dg_min,dg_max\n";
  for (const auto& r : series.records)
    os << r.step << "," << format_double(r.loss) << "," << format_double(r.dl_min) << ","
       << format_double(r.dl_max) << "," << format_double(r.dg_min) << ","
       << format_double(r.dg_max) << "\n";
  return os.str();
}

}  // namespace covpool
