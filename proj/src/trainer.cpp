#include "slr/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "slr/error.hpp"
#include "slr/log.hpp"
#include "slr/parallel.hpp"
#include "slr/rng.hpp"

namespace slr {
namespace {

// ---- training data -------------------------------------------------------

struct LabeledSample {
  NetInput input;
  LabelMask mask;
};

struct PairData {
  NetInput labeled;
  NetInput pseudo;
  LabelMask mask;
};

LabeledSample load_labeled(const Corpus& corpus, const ImageRecord& r, int res) {
  RgbImage image = load_image(corpus, r);
  LabelMask mask = load_mask(corpus, r);
  if (image.width != mask.width || image.height != mask.height) {
    throw_validation("record '" + r.id + "': image and mask sizes differ");
  }
  return {make_input(resize_nearest(image, res, res)), resize_nearest(mask, res, res)};
}

// Infinite stream over [0, length): cycle k is a permutation seeded by
// (seed, tag, k). Batch b covers stream positions [b * batch, (b+1) * batch).
class Stream {
 public:
  Stream(std::size_t length, std::uint64_t seed, std::uint64_t tag) : length_(length), seed_(seed), tag_(tag) {}

  std::vector<std::size_t> batch(long long index, int batch_size) {
    std::vector<std::size_t> out;
    out.reserve(batch_size);
    for (int j = 0; j < batch_size; ++j) {
      const auto pos = static_cast<std::uint64_t>(index) * batch_size + j;
      const std::uint64_t cycle = pos / length_;
      out.push_back(permutation(cycle)[pos % length_]);
    }
    return out;
  }

 private:
  const std::vector<std::size_t>& permutation(std::uint64_t cycle) {
    auto it = cache_.find(cycle);
    if (it != cache_.end()) return it->second;
    if (cache_.size() > 4) cache_.erase(cache_.begin());
    std::vector<std::size_t> perm(length_);
    for (std::size_t i = 0; i < length_; ++i) perm[i] = i;
    Rng rng(mix_seed(mix_seed(seed_, tag_), cycle));
    rng.shuffle(std::span<std::size_t>(perm));
    return cache_.emplace(cycle, std::move(perm)).first->second;
  }

  std::size_t length_;
  std::uint64_t seed_;
  std::uint64_t tag_;
  std::map<std::uint64_t, std::vector<std::size_t>> cache_;
};

void add_into(TensorList& into, const TensorList& from) {
  for (std::size_t t = 0; t < into.size(); ++t) {
    for (std::size_t i = 0; i < into[t].data.size(); ++i) into[t].data[i] += from[t].data[i];
  }
}

// ---- binary I/O ------------------------------------------------------------

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(long long v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.append(s);
  }
  void raw(const char* data, std::size_t n) { bytes_.append(data, n); }
  const std::string& bytes() const { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string bytes_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  long long i64() { return static_cast<long long>(get(8)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw_validation(source_ + ": checkpoint is truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  std::string bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

constexpr char kCheckpointMagic[8] = {'S', 'L', 'R', 'C', '1', '\n', '\0', '\0'};

void write_tensors(Writer& w, const TensorList& tensors) {
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    w.u64(t.data.size());
    for (double v : t.data) w.f64(v);
  }
}

TensorList read_tensors(Reader& r) {
  TensorList out(r.u32());
  for (auto& t : out) {
    t.name = r.str();
    t.shape.resize(r.u32());
    std::size_t expected = 1;
    for (int& d : t.shape) {
      d = static_cast<int>(r.u32());
      expected *= static_cast<std::size_t>(d);
    }
    const std::uint64_t n = r.u64();
    if (n != expected) throw_validation("checkpoint tensor '" + t.name + "' size disagrees with its shape");
    t.data.resize(n);
    for (double& v : t.data) v = r.f64();
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

int iterations_per_epoch(std::size_t labeled_count, int batch) {
  if (batch < 1) throw_validation("batch size must be >= 1");
  if (labeled_count == 0) throw_validation("no labeled train images");
  return static_cast<int>((labeled_count + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));
}

ToyNet net_from_checkpoint(const Checkpoint& checkpoint) {
  return ToyNet::from_tensors(checkpoint.shape, checkpoint.params);
}

ConfusionMatrix evaluate_split(const ToyNet& net, const Corpus& corpus, Split split, int resolution, int threads) {
  std::vector<const ImageRecord*> records;
  for (const auto& r : corpus.records()) {
    if (r.split == split && r.has_mask()) records.push_back(&r);
  }
  std::vector<ConfusionMatrix> partial(records.size(), ConfusionMatrix(corpus.num_classes()));
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const LabeledSample s = load_labeled(corpus, *records[i], resolution);
    const ForwardResult f = forward(net, s.input);
    partial[i].accumulate(f.pred.argmax(), s.mask);
  });
  ConfusionMatrix cm(corpus.num_classes());
  for (const auto& p : partial) cm += p;
  return cm;
}

TrainResult train(const Corpus& corpus, const PairSet& pairs, const TrainConfig& config,
                  const std::optional<ResumeState>& resume) {
  if (config.resolution < 3) throw_validation("training resolution must be at least 3");
  if (config.epochs < 0) throw_validation("epochs must be >= 0");
  const int res = config.resolution;
  const int threads = std::max(1, config.threads);

  std::vector<LabeledSample> labeled;
  std::map<std::string, std::size_t, std::less<>> labeled_index;
  for (const auto& r : corpus.records()) {
    if (!r.is_labeled_train()) continue;
    labeled_index.emplace(r.id, labeled.size());
    labeled.push_back(load_labeled(corpus, r, res));
  }
  if (labeled.empty()) throw_validation("training needs at least one labeled train image");

  std::vector<PairData> pair_data;
  if (config.use_pairs) {
    pairs.validate();
    for (const auto& p : pairs.pairs) {
      const auto it = labeled_index.find(p.labeled_id);
      if (it == labeled_index.end()) {
        throw_validation("pair labeled_id '" + p.labeled_id + "' is not a labeled train image");
      }
      const ImageRecord& pseudo = corpus.at(p.pseudo_id);
      if (pseudo.has_mask()) throw_validation("pair pseudo_id '" + p.pseudo_id + "' carries a label");
      const LabeledSample& l = labeled[it->second];
      pair_data.push_back({l.input, make_input(resize_nearest(load_image(corpus, pseudo), res, res)), l.mask});
    }
  }
  const bool pair_stream = config.use_pairs && !pair_data.empty();

  const ToyNetShape shape{config.features1, config.features2, corpus.num_classes()};
  const int ipe = iterations_per_epoch(labeled.size(), config.batch);
  const long long max_iters = static_cast<long long>(config.epochs) * ipe;

  TrainResult result;
  ToyNet net(shape, config.seed);
  OptimizerState opt = make_optimizer(net, config.sgd);
  long long start = 0;
  Checkpoint best;
  best.best_val_miou = -1.0;
  bool have_best = false;
  if (resume) {
    const Checkpoint& last = resume->last;
    if (last.shape != shape || last.seed != config.seed || last.ipe != ipe || last.max_iters != max_iters ||
        last.config_hash != config.config_hash) {
      throw_validation("resume checkpoint does not match this training configuration");
    }
    net = net_from_checkpoint(last);
    opt.velocity = last.velocity;
    start = last.step;
    result.log = last.history;
    best = resume->best;
    have_best = best.best_epoch >= 0;
  }

  auto snapshot = [&](long long step) {
    Checkpoint c;
    c.shape = shape;
    c.params = net.params();
    c.velocity = opt.velocity;
    c.seed = config.seed;
    c.step = step;
    c.ipe = ipe;
    c.max_iters = max_iters;
    c.config_hash = config.config_hash;
    c.history = result.log;
    c.best_epoch = have_best ? best.best_epoch : -1;
    c.best_val_miou = have_best ? best.best_val_miou : -1.0;
    return c;
  };

  const bool has_val = std::any_of(corpus.records().begin(), corpus.records().end(),
                                   [](const ImageRecord& r) { return r.split == Split::val && r.has_mask(); });

  Stream labeled_stream(labeled.size(), config.seed, 1);
  Stream pair_stream_order(std::max<std::size_t>(pair_data.size(), 1), config.seed, 2);
  const PairLossOptions loss_options{config.use_eta, config.use_lambda, config.eta_excludes_background};

  for (long long step = start; step < max_iters; ++step) {
    const TrainClock clock = TrainClock::at_step(step, ipe, max_iters);
    const double lr = poly_lr(config.sgd.base_lr, clock, config.sgd.poly_power);

    const auto lidx = labeled_stream.batch(step, config.batch);
    std::vector<ForwardResult> lf(lidx.size());
    parallel_for(lidx.size(), threads, [&](std::size_t i) { lf[i] = forward(net, labeled[lidx[i]].input); });
    std::vector<LabeledPrediction> sup_batch;
    for (std::size_t i = 0; i < lidx.size(); ++i) sup_batch.push_back({lf[i].pred, labeled[lidx[i]].mask});
    const BatchLoss sup = supervised_loss(sup_batch);

    std::vector<std::size_t> pidx;
    std::vector<ForwardResult> pf_l;
    std::vector<ForwardResult> pf_u;
    PairLoss pair;
    pair.lambda = config.use_lambda ? lambda_weight(clock) : 1.0;
    if (pair_stream) {
      pidx = pair_stream_order.batch(step, config.batch);
      pf_l.resize(pidx.size());
      pf_u.resize(pidx.size());
      parallel_for(pidx.size(), threads, [&](std::size_t i) {
        pf_l[i] = forward(net, pair_data[pidx[i]].labeled);
        pf_u[i] = forward(net, pair_data[pidx[i]].pseudo);
      });
      std::vector<PairSample> pair_batch;
      for (std::size_t i = 0; i < pidx.size(); ++i) {
        pair_batch.push_back({pf_l[i].pred, pf_u[i].pred, pair_data[pidx[i]].mask});
      }
      pair = pair_loss(pair_batch, clock, loss_options);
    }
    const double total = total_loss(sup.loss, pair.loss);

    // One gradient slot per backward pass, reduced in a fixed order.
    const std::size_t jobs = lidx.size() + 2 * pidx.size();
    std::vector<TensorList> slots(jobs);
    parallel_for(jobs, threads, [&](std::size_t j) {
      slots[j] = zeros_like(net.params());
      if (j < lidx.size()) {
        backward(net, lf[j].cache, sup.grads[j], slots[j]);
      } else {
        const std::size_t k = (j - lidx.size()) / 2;
        if ((j - lidx.size()) % 2 == 0) {
          backward(net, pf_l[k].cache, pair.grad_labeled[k], slots[j]);
        } else {
          backward(net, pf_u[k].cache, pair.grad_pseudo[k], slots[j]);
        }
      }
    });
    TensorList grads = zeros_like(net.params());
    for (const auto& s : slots) add_into(grads, s);
    sgd_step(net, grads, opt, lr);

    double mean_eta = 0.0;
    if (!pair.etas.empty()) {
      for (double e : pair.etas) mean_eta += e;
      mean_eta /= static_cast<double>(pair.etas.size());
    }
    result.log.iterations.push_back(
        IterationMetrics{step, clock.epoch, lr, pair.lambda, mean_eta, sup.loss, pair.loss, total});

    if (clock.iter == ipe - 1) {
      EpochMetrics em{clock.epoch, std::nan(""), std::nan("")};
      bool improved = false;
      if (has_val) {
        const SegmentationMetrics m = metrics(evaluate_split(net, corpus, Split::val, res, threads));
        em.val_miou = m.mean_iou;
        em.val_pixacc = m.pixel_acc;
        improved = !have_best || m.mean_iou > best.best_val_miou;
      }
      result.log.epochs.push_back(em);
      if (improved) {
        have_best = true;
        best = snapshot(step + 1);
        best.best_epoch = clock.epoch;
        best.best_val_miou = em.val_miou;
      }
      log(LogLevel::debug, "epoch " + std::to_string(clock.epoch) + " val mIoU " + fmt(em.val_miou));
      if (config.on_epoch) {
        const Checkpoint now = snapshot(step + 1);
        config.on_epoch(now, have_best ? best : now);
      }
    }
  }

  result.last = snapshot(max_iters);
  if (have_best) {
    result.best = best;
  } else {
    result.best = result.last;
  }
  result.last.best_epoch = result.best.best_epoch;
  result.last.best_val_miou = result.best.best_val_miou;
  return result;
}

void write_metrics(const MetricsLog& log, const std::filesystem::path& iteration_csv,
                   const std::filesystem::path& epoch_csv) {
  std::ostringstream it;
  it << "iter,epoch,lr,lambda,mean_eta,loss_sup,loss_pair,loss_total\n";
  for (const auto& m : log.iterations) {
    it << m.iter << ',' << m.epoch << ',' << fmt(m.lr) << ',' << fmt(m.lambda) << ',' << fmt(m.mean_eta) << ','
       << fmt(m.loss_sup) << ',' << fmt(m.loss_pair) << ',' << fmt(m.loss_total) << '\n';
  }
  std::ostringstream ep;
  ep << "epoch,val_miou,val_pixacc\n";
  for (const auto& m : log.epochs) ep << m.epoch << ',' << fmt(m.val_miou) << ',' << fmt(m.val_pixacc) << '\n';
  for (const auto& [path, text] : {std::pair{iteration_csv, it.str()}, std::pair{epoch_csv, ep.str()}}) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_runtime("cannot write " + path.string());
    out << text;
  }
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  Writer w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(static_cast<std::uint32_t>(c.shape.features1));
  w.u32(static_cast<std::uint32_t>(c.shape.features2));
  w.u32(static_cast<std::uint32_t>(c.shape.classes));
  w.u64(c.seed);
  w.i64(c.step);
  w.i64(c.ipe);
  w.i64(c.max_iters);
  w.str(c.config_hash);
  w.i64(c.best_epoch);
  w.f64(c.best_val_miou);
  write_tensors(w, c.params);
  write_tensors(w, c.velocity);
  w.u64(c.history.iterations.size());
  for (const auto& m : c.history.iterations) {
    w.i64(m.iter);
    w.i64(m.epoch);
    for (double v : {m.lr, m.lambda, m.mean_eta, m.loss_sup, m.loss_pair, m.loss_total}) w.f64(v);
  }
  w.u64(c.history.epochs.size());
  for (const auto& m : c.history.epochs) {
    w.i64(m.epoch);
    w.f64(m.val_miou);
    w.f64(m.val_pixacc);
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_runtime("cannot write checkpoint " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw_runtime("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_validation("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  Reader r(buf.str(), path.string());
  if (r.raw(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw_validation(path.string() + ": not an SLRC1 checkpoint");
  }
  Checkpoint c;
  c.shape.features1 = static_cast<int>(r.u32());
  c.shape.features2 = static_cast<int>(r.u32());
  c.shape.classes = static_cast<int>(r.u32());
  c.seed = r.u64();
  c.step = r.i64();
  c.ipe = static_cast<int>(r.i64());
  c.max_iters = r.i64();
  c.config_hash = r.str();
  c.best_epoch = static_cast<int>(r.i64());
  c.best_val_miou = r.f64();
  c.params = read_tensors(r);
  c.velocity = read_tensors(r);
  c.history.iterations.resize(r.u64());
  for (auto& m : c.history.iterations) {
    m.iter = r.i64();
    m.epoch = static_cast<int>(r.i64());
    m.lr = r.f64();
    m.lambda = r.f64();
    m.mean_eta = r.f64();
    m.loss_sup = r.f64();
    m.loss_pair = r.f64();
    m.loss_total = r.f64();
  }
  c.history.epochs.resize(r.u64());
  for (auto& m : c.history.epochs) {
    m.epoch = static_cast<int>(r.i64());
    m.val_miou = r.f64();
    m.val_pixacc = r.f64();
  }
  if (!r.done()) throw_validation(path.string() + ": trailing bytes after checkpoint");
  ToyNet::from_tensors(c.shape, c.params);  // shape check
  return c;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const ToyNet& base, const RgbImage& image, const LabelMask& mask, double eps,
                           const GradCheckOptions& options) {
  if (image.width != mask.width || image.height != mask.height) {
    throw_validation("grad_check: image and mask sizes differ");
  }
  const NetInput x1 = make_input(image);
  RgbImage shifted(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) shifted.at(x, y, c) = image.at((x + 1) % image.width, y, c);
    }
  }
  const NetInput x2 = make_input(shifted);

  struct Eval {
    double loss;
    ForwardResult f1;
    ForwardResult f2;
  };
  double fixed_eta = 0.0;
  auto objective = [&](const ToyNet& net) {
    Eval e{0.0, forward(net, x1), forward(net, x2)};
    const LabeledPrediction sup_item{e.f1.pred, mask};
    const double sup = supervised_loss(std::span(&sup_item, 1)).loss;
    const PairSample ps{e.f1.pred, e.f2.pred, mask};
    const double pair = pair_loss_weighted(std::span(&ps, 1), options.lambda, std::span(&fixed_eta, 1)).loss;
    e.loss = total_loss(sup, pair);
    return e;
  };

  {
    const ForwardResult a = forward(base, x1);
    const ForwardResult b = forward(base, x2);
    fixed_eta = eta(a.pred, b.pred);
  }
  const Eval at = objective(base);
  TensorList grads = zeros_like(base.params());
  {
    const LabeledPrediction sup_item{at.f1.pred, mask};
    const BatchLoss sup = supervised_loss(std::span(&sup_item, 1));
    const PairSample ps{at.f1.pred, at.f2.pred, mask};
    const PairLoss pair = pair_loss_weighted(std::span(&ps, 1), options.lambda, std::span(&fixed_eta, 1));
    std::vector<double> g1 = sup.grads[0];
    for (std::size_t i = 0; i < g1.size(); ++i) g1[i] += pair.grad_labeled[0][i];
    backward(base, at.f1.cache, g1, grads);
    backward(base, at.f2.cache, pair.grad_pseudo[0], grads);
  }

  auto same_kinks = [](const Eval& a, const Eval& b) {
    auto same = [](const std::vector<double>& u, const std::vector<double>& v) {
      for (std::size_t i = 0; i < u.size(); ++i) {
        if ((u[i] > 0.0) != (v[i] > 0.0)) return false;
      }
      return true;
    };
    return same(a.f1.cache.pre1, b.f1.cache.pre1) && same(a.f1.cache.pre2, b.f1.cache.pre2) &&
           same(a.f2.cache.pre1, b.f2.cache.pre1) && same(a.f2.cache.pre2, b.f2.cache.pre2);
  };

  // Sample parameters round-robin across tensors so small tensors are covered.
  Rng rng(options.seed);
  const TensorList& params = base.params();
  GradCheckReport report;
  double sum = 0.0;
  ToyNet probe = base;
  for (int s = 0; s < options.samples; ++s) {
    const std::size_t t = static_cast<std::size_t>(s) % params.size();
    const std::size_t i = rng.below(params[t].size());
    const double original = params[t].data[i];
    probe.params()[t].data[i] = original + eps;
    const Eval plus = objective(probe);
    probe.params()[t].data[i] = original - eps;
    const Eval minus = objective(probe);
    probe.params()[t].data[i] = original;
    if (!same_kinks(plus, minus) || !same_kinks(plus, at)) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * eps);
    const double err = relative_error(grads[t].data[i], numeric);
    sum += err;
    ++report.checked;
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_parameter = params[t].name + "[" + std::to_string(i) + "]";
    }
  }
  report.mean_rel_error = report.checked ? sum / static_cast<double>(report.checked) : 0.0;
  return report;
}

}  // namespace slr
