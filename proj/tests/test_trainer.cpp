#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "slr/error.hpp"
#include "slr/rng.hpp"
#include "slr/synth.hpp"
#include "slr/trainer.hpp"

using namespace slr;
using slr::test::TempDir;

namespace {

struct Fixture {
  TempDir dir{"slr_trainer"};
  Corpus corpus;
  PairSet pairs;
};

const Fixture& fixture() {
  static const Fixture* f = [] {
    auto* out = new Fixture;
    SynthConfig c;
    c.subjects = 2;
    c.days = 6;
    c.size = 16;
    c.label_fraction = 0.4;
    out->corpus = generate(c, out->dir.path()).corpus;
    out->pairs = random_pairs(out->corpus, 1, 3);
    return out;
  }();
  return *f;
}

TrainConfig small_config() {
  TrainConfig t;
  t.features1 = 4;
  t.features2 = 4;
  t.resolution = 16;
  t.batch = 3;
  t.epochs = 3;
  t.seed = 5;
  t.config_hash = "cafe";
  return t;
}

std::size_t labeled_count(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& r : corpus.records()) n += r.is_labeled_train() ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("iterations per epoch round up") {
  CHECK(iterations_per_epoch(10, 4) == 3);
  CHECK(iterations_per_epoch(8, 4) == 2);
  CHECK(iterations_per_epoch(1, 8) == 1);
  CHECK_THROWS_AS(iterations_per_epoch(0, 4), Error);
  CHECK_THROWS_AS(iterations_per_epoch(4, 0), Error);
}

TEST_CASE("zero epochs returns the initialized net") {
  TrainConfig t = small_config();
  t.epochs = 0;
  const TrainResult r = train(fixture().corpus, fixture().pairs, t);
  CHECK(r.log.iterations.empty());
  CHECK(r.log.epochs.empty());
  CHECK(r.last.step == 0);
  CHECK(r.last.params == ToyNet(ToyNetShape{4, 4, 3}, 5).params());
  CHECK(r.best.params == r.last.params);
}

TEST_CASE("training without pairs equals a supervised-only run") {
  TrainConfig t = small_config();
  const TrainResult empty = train(fixture().corpus, PairSet{}, t);
  t.use_pairs = false;
  const TrainResult off = train(fixture().corpus, fixture().pairs, t);
  CHECK(empty.log == off.log);
  CHECK(empty.last == off.last);
  for (const auto& m : empty.log.iterations) {
    CHECK(m.loss_pair == 0.0);
    CHECK(m.mean_eta == 0.0);
    CHECK(m.loss_total == m.loss_sup);
  }
}

TEST_CASE("training is deterministic and independent of thread count") {
  TrainConfig t = small_config();
  const TrainResult a = train(fixture().corpus, fixture().pairs, t);
  const TrainResult b = train(fixture().corpus, fixture().pairs, t);
  t.threads = 3;
  const TrainResult c = train(fixture().corpus, fixture().pairs, t);
  CHECK(a.log == b.log);
  CHECK(a.last == b.last);
  CHECK(a.best == b.best);
  CHECK(a.log == c.log);
  CHECK(a.last == c.last);
  t.threads = 1;
  t.seed = 6;
  CHECK_FALSE(train(fixture().corpus, fixture().pairs, t).log == a.log);
}

TEST_CASE("logged schedule values match their formulas") {
  const TrainConfig t = small_config();
  const TrainResult r = train(fixture().corpus, fixture().pairs, t);
  const int ipe = static_cast<int>((labeled_count(fixture().corpus) + t.batch - 1) / t.batch);
  const long long max_iters = static_cast<long long>(t.epochs) * ipe;
  REQUIRE(r.log.iterations.size() == static_cast<std::size_t>(max_iters));
  REQUIRE(r.log.epochs.size() == static_cast<std::size_t>(t.epochs));
  for (const auto& m : r.log.iterations) {
    const double frac = static_cast<double>(m.iter) / static_cast<double>(max_iters);
    CHECK(m.epoch == m.iter / ipe);
    CHECK(m.lambda == doctest::Approx(frac).epsilon(1e-15));
    CHECK(m.lr == doctest::Approx(0.02 * std::pow(1.0 - frac, 0.9)).epsilon(1e-14));
    CHECK(m.loss_total == doctest::Approx(m.loss_sup + m.loss_pair).epsilon(1e-15));
    CHECK(std::isfinite(m.loss_total));
    CHECK(m.mean_eta >= 0.0);
    CHECK(m.mean_eta <= 1.0);
  }
  for (int e = 0; e < t.epochs; ++e) {
    CHECK(r.log.epochs[e].epoch == e);
    CHECK(r.log.epochs[e].val_miou >= 0.0);
    CHECK(r.log.epochs[e].val_miou <= 1.0);
  }
  double best = -1.0;
  for (const auto& e : r.log.epochs) best = std::max(best, e.val_miou);
  CHECK(r.best.best_val_miou == best);
  CHECK(r.log.epochs[r.best.best_epoch].val_miou == best);
  for (const auto& tensor : r.last.params) {
    for (double v : tensor.data) CHECK(std::isfinite(v));
  }

  TrainConfig flat = t;
  flat.use_lambda = false;
  for (const auto& m : train(fixture().corpus, fixture().pairs, flat).log.iterations) CHECK(m.lambda == 1.0);
}

TEST_CASE("duplicate pairs give equal halves when eta and lambda are one") {
  const Corpus& base = fixture().corpus;
  std::vector<ImageRecord> records;
  PairSet pairs;
  for (const auto& r : base.records()) {
    if (!r.is_labeled_train() && r.split != Split::val) continue;
    records.push_back(r);
    if (!r.is_labeled_train()) continue;
    ImageRecord dup = r;
    dup.id = "dup_" + r.id;
    dup.index = r.index + 10;
    dup.mask_path.reset();
    dup.split = Split::unlabeled;
    records.push_back(dup);
    pairs.pairs.push_back(Pair{r.id, dup.id, 1.0, 1});
  }
  const Corpus corpus(records, base.class_names(), base.root());
  TrainConfig t = small_config();
  t.use_eta = false;
  t.use_lambda = false;
  t.batch = static_cast<int>(labeled_count(corpus));
  t.epochs = 4;
  const TrainResult r = train(corpus, pairs, t);
  REQUIRE(r.log.iterations.size() == 4);
  for (const auto& m : r.log.iterations) {
    // Both streams see every image once per iteration, so the pair loss is
    // the labeled half plus an equal pseudo half.
    CHECK(std::abs(m.loss_pair - 2.0 * m.loss_sup) <= 1e-9);
    CHECK(m.lambda == 1.0);
    CHECK(m.mean_eta == 1.0);
  }
}

TEST_CASE("training input errors") {
  const Corpus unlabeled({slr::test::record("u", "s", 1, 1, Split::unlabeled)}, {"background", "thing"});
  CHECK_THROWS_AS(train(unlabeled, PairSet{}, small_config()), Error);
  PairSet bad{{Pair{"missing", "also_missing", 1.0, 1}}};
  CHECK_THROWS_AS(train(fixture().corpus, bad, small_config()), Error);
  TrainConfig t = small_config();
  t.epochs = -1;
  CHECK_THROWS_AS(train(fixture().corpus, PairSet{}, t), Error);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir;
  const TrainResult r = train(fixture().corpus, fixture().pairs, small_config());
  save_checkpoint(r.last, dir / "last.slrc");
  save_checkpoint(r.best, dir / "best.slrc");
  CHECK(load_checkpoint(dir / "last.slrc") == r.last);
  CHECK(load_checkpoint(dir / "best.slrc") == r.best);
  CHECK(net_from_checkpoint(r.last).params() == r.last.params);

  const std::string bytes = slr::test::read_file(dir / "last.slrc");
  CHECK(bytes.substr(0, 5) == "SLRC1");
  slr::test::write_file(dir / "cut.slrc", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.slrc"), Error);
  slr::test::write_file(dir / "tail.slrc", bytes + "x");
  CHECK_THROWS_AS(load_checkpoint(dir / "tail.slrc"), Error);
  slr::test::write_file(dir / "magic.slrc", "SLRC9" + bytes.substr(5));
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.slrc"), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "none.slrc"), Error);
}

TEST_CASE("resuming from an epoch checkpoint is bit-identical") {
  TrainConfig t = small_config();
  t.epochs = 4;
  std::vector<std::pair<Checkpoint, Checkpoint>> saved;
  t.on_epoch = [&](const Checkpoint& last, const Checkpoint& best) { saved.emplace_back(last, best); };
  const TrainResult full = train(fixture().corpus, fixture().pairs, t);
  REQUIRE(saved.size() == 4);
  CHECK(saved.back().first == full.last);
  CHECK(saved.back().second == full.best);

  TempDir dir;
  save_checkpoint(saved[1].first, dir / "last.slrc");
  save_checkpoint(saved[1].second, dir / "best.slrc");
  t.on_epoch = nullptr;
  const ResumeState state{load_checkpoint(dir / "last.slrc"), load_checkpoint(dir / "best.slrc")};
  const TrainResult resumed = train(fixture().corpus, fixture().pairs, t, state);
  CHECK(resumed.log == full.log);
  CHECK(resumed.last == full.last);
  CHECK(resumed.best == full.best);

  TrainConfig other = t;
  other.config_hash = "beef";
  CHECK_THROWS_AS(train(fixture().corpus, fixture().pairs, other, state), Error);
  other = t;
  other.epochs = 5;
  CHECK_THROWS_AS(train(fixture().corpus, fixture().pairs, other, state), Error);
}

TEST_CASE("split evaluation covers every masked pixel") {
  const ToyNet net(ToyNetShape{4, 4, 3}, 2);
  const ConfusionMatrix cm = evaluate_split(net, fixture().corpus, Split::val, 8);
  std::size_t images = 0;
  for (const auto& r : fixture().corpus.records()) images += r.split == Split::val ? 1 : 0;
  CHECK(cm.total() == images * 64);
  CHECK(evaluate_split(net, fixture().corpus, Split::val, 8, 4) == cm);
}

TEST_CASE("relative error") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == 0.5);
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-10, 0.0) == doctest::Approx(1e-2));
}

TEST_CASE("gradient check of the full objective") {
  const ToyNet net(ToyNetShape{4, 4, 3}, 9);
  const RgbImage image = slr::test::smooth_image(8, 8, 3);
  LabelMask mask(8, 8, 3);
  Rng rng(4);
  for (auto& v : mask.labels) v = static_cast<std::uint8_t>(rng.below(3));
  const GradCheckReport fine = grad_check(net, image, mask, 1e-5);
  CHECK(fine.checked >= 200);
  CHECK(fine.max_rel_error < 1e-4);
  const GradCheckReport again = grad_check(net, image, mask, 1e-5);
  CHECK(again.max_rel_error == fine.max_rel_error);
  CHECK(again.worst_parameter == fine.worst_parameter);
  const GradCheckReport coarse = grad_check(net, image, mask, 1e-1);
  CHECK(coarse.max_rel_error > fine.max_rel_error);
}
