#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>

#include "ptsearch/experiment.hpp"
#include "ptsearch/metrics.hpp"
#include "ptsearch/synthetic.hpp"
#include "ptsearch/tape.hpp"
#include "ptsearch/trainer.hpp"

using namespace ptsearch;
namespace fs = std::filesystem;

namespace {

// one separable synthetic dataset shared by the training tests
const Dataset& separable_dataset() {
  static const Dataset data = [] {
    const fs::path dir =
        fs::temp_directory_path() / ("ptsearch_trainer_syn_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    SyntheticConfig cfg;
    cfg.num_nodes = 1000;
    cfg.bot_fraction = 0.5;
    cfg.separation = 3.0;
    cfg.seed = 7;
    generate_synthetic(cfg, dir);
    Dataset loaded = load_dataset(dir);
    loaded.features = normalize_numerical(loaded.features, loaded.split);
    fs::remove_all(dir);
    return loaded;
  }();
  return data;
}

}  // namespace

TEST_CASE("confusion_matrix") {
  SUBCASE("perfect predictions on ten nodes, six bots") {
    Matrix logits(10, 2);
    std::vector<int> labels(10);
    for (int i = 0; i < 10; ++i) {
      labels[i] = i < 6 ? 1 : 0;
      logits.at(i, labels[i]) = 5;
    }
    std::vector<int> rows = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const ConfusionMatrix cm = confusion_matrix(logits, labels, rows);
    CHECK(cm.tp == 6);
    CHECK(cm.tn == 4);
    CHECK(cm.fp == 0);
    CHECK(cm.fn == 0);
  }

  SUBCASE("all-bot predictions on a balanced set") {
    Matrix logits(8, 2);
    std::vector<int> labels(8);
    for (int i = 0; i < 8; ++i) {
      labels[i] = i % 2;
      logits.at(i, 1) = 1;
    }
    const ConfusionMatrix cm = confusion_matrix(logits, labels, {0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(cm.tp == 4);
    CHECK(cm.fp == 4);
    CHECK(cm.tn == 0);
    CHECK(cm.fn == 0);
  }

  SUBCASE("logit ties go to class zero") {
    Matrix logits(1, 2);
    logits.at(0, 0) = logits.at(0, 1) = real(0.7);
    const ConfusionMatrix cm = confusion_matrix(logits, {1}, {0});
    CHECK(cm.fn == 1);
    CHECK(cm.tp == 0);
  }

  SUBCASE("empty mask is rejected") {
    Matrix logits(1, 2);
    CHECK_THROWS_AS(confusion_matrix(logits, {1}, {}), std::invalid_argument);
  }
}

TEST_CASE("compute_metrics") {
  SUBCASE("perfect prediction") {
    const MetricsReport r = compute_metrics(ConfusionMatrix{6, 0, 4, 0});
    CHECK(r.accuracy == doctest::Approx(1.0));
    CHECK(r.f1 == doctest::Approx(1.0));
    CHECK(r.mcc == doctest::Approx(1.0));
    CHECK(!r.degenerate);
  }

  SUBCASE("all-positive prediction on a balanced set") {
    const MetricsReport r = compute_metrics(ConfusionMatrix{5, 5, 0, 0});
    CHECK(r.accuracy == doctest::Approx(0.5));
    CHECK(r.recall == doctest::Approx(1.0));
    CHECK(r.specificity == doctest::Approx(0.0));
    CHECK(r.precision == doctest::Approx(0.5));
    CHECK(r.mcc == doctest::Approx(0.0));
    CHECK(r.degenerate);  // the mcc denominator collapses
  }

  SUBCASE("reference confusion matrix values") {
    const MetricsReport r = compute_metrics(ConfusionMatrix{40, 10, 35, 15});
    CHECK(std::abs(r.accuracy - 0.75) < 1e-4);
    CHECK(std::abs(r.precision - 0.8) < 1e-4);
    CHECK(std::abs(r.recall - 0.727273) < 1e-4);
    CHECK(std::abs(r.specificity - 0.777778) < 1e-4);
    CHECK(std::abs(r.f1 - 0.761905) < 1e-4);
    CHECK(std::abs(r.mcc - 0.502519) < 1e-4);
  }

  SUBCASE("inverted predictions reach mcc of minus one") {
    const MetricsReport r = compute_metrics(ConfusionMatrix{0, 10, 0, 15});
    CHECK(r.mcc == doctest::Approx(-1.0));
  }

  SUBCASE("f1 is the harmonic mean of precision and recall") {
    const MetricsReport r = compute_metrics(ConfusionMatrix{30, 12, 40, 18});
    CHECK(r.f1 ==
          doctest::Approx(2 * r.precision * r.recall / (r.precision + r.recall)).epsilon(1e-12));
  }
}

TEST_CASE("train_model on the separable synthetic dataset") {
  const Dataset& data = separable_dataset();
  PipelineConfig pcfg;
  pcfg.hidden_dim = 32;

  SUBCASE("genotype PT reaches 0.90 validation accuracy at 50 epochs") {
    TrainConfig tcfg;
    tcfg.epochs = 50;
    tcfg.lr = 0.04;
    tcfg.weight_decay = 2e-4;
    tcfg.seed = 3;
    const TrainResult result = train_model(Genotype::parse("PT"), data, pcfg, tcfg);
    CHECK(result.val_accuracy >= 0.90);
  }

  SUBCASE("zero learning rate leaves parameters and accuracy untouched") {
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.lr = 0.0;
    tcfg.weight_decay = 0.0;
    tcfg.seed = 4;
    const TrainResult result = train_model(Genotype::parse("PT"), data, pcfg, tcfg);
    PipelineModel untrained = compile(Genotype::parse("PT"), data.meta, pcfg, derive_seed(4, 0));
    for (const std::string& name : untrained.params.names())
      CHECK(result.model.params.value(name).data == untrained.params.value(name).data);

    PipelineModel fresh = compile(Genotype::parse("PT"), data.meta, pcfg, derive_seed(4, 0));
    const Matrix logits = inference_logits(fresh, data);
    CHECK(result.val_accuracy == doctest::Approx(accuracy_on(logits, data, Split::val)));
  }

  SUBCASE("the same seed trains to bit-identical parameters") {
    TrainConfig tcfg;
    tcfg.epochs = 5;
    tcfg.lr = 0.04;
    tcfg.seed = 5;
    const TrainResult a = train_model(Genotype::parse("TP"), data, pcfg, tcfg);
    const TrainResult b = train_model(Genotype::parse("TP"), data, pcfg, tcfg);
    for (const std::string& name : a.model.params.names())
      CHECK(a.model.params.value(name).data == b.model.params.value(name).data);
    CHECK(a.val_accuracy == b.val_accuracy);
  }

  SUBCASE("test labels never touch the training gradient") {
    Dataset scrambled = data;
    Rng rng(6);
    for (int i = 0; i < scrambled.features.num_nodes(); ++i)
      if (scrambled.split.tag[i] == Split::test)
        scrambled.features.labels[i] = rng.bernoulli(0.5) ? 1 : 0;

    auto train_grads = [&](const Dataset& d) {
      PipelineModel model = compile(Genotype::parse("PT"), d.meta, pcfg, 99);
      Rng dropout_rng(17);
      Tape tape;
      const ForwardTrace trace =
          forward(model, d.graph, d.features, tape, true, &dropout_rng);
      const ValueId loss =
          tape.cross_entropy(trace.logits, d.features.labels, d.split.rows(Split::train));
      model.params.zero_grad();
      tape.backward(loss);
      std::vector<real> flat;
      for (const std::string& name : model.params.names())
        for (real g : model.params.grad(name).data) flat.push_back(g);
      return flat;
    };
    CHECK(train_grads(data) == train_grads(scrambled));
  }

  SUBCASE("absurd learning rate raises a diverged error with the epoch") {
    TrainConfig tcfg;
    tcfg.epochs = 10;
    tcfg.lr = 1e18;
    tcfg.seed = 8;
    // deep all-T pipeline: overflow compounds through fourteen layers
    try {
      train_model(Genotype::parse("TTTTTTTTTTTTTT"), data, pcfg, tcfg);
      FAIL("expected DivergedError");
    } catch (const DivergedError& e) {
      CHECK(e.epoch >= 1);
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
}

TEST_CASE("aggregation") {
  SUBCASE("mean is the exact arithmetic mean; single run has zero std") {
    MetricsReport a, b, c;
    a.accuracy = 0.91;
    b.accuracy = 0.94;
    c.accuracy = 0.89;
    const AggregateReport agg = aggregate_runs("x", {a, b, c}, 3, 0);
    CHECK(std::abs(agg.metrics[0].mean - (0.91 + 0.94 + 0.89) / 3.0) < 1e-12);
    const AggregateReport single = aggregate_runs("y", {a}, 1, 0);
    CHECK(single.metrics[0].stddev == 0.0);
  }

  SUBCASE("diverged runs are flagged and excluded") {
    MetricsReport a;
    a.accuracy = 0.8;
    const AggregateReport agg = aggregate_runs("x", {a}, 3, 2);
    CHECK(agg.runs_completed == 1);
    CHECK(agg.runs_diverged == 2);
    CHECK(agg.metrics[0].mean == doctest::Approx(0.8));
  }

  SUBCASE("table formatting is well formed") {
    MetricsReport a;
    a.accuracy = 0.857;
    a.f1 = 0.871;
    const std::string table = format_table({aggregate_runs("with gate", {a}, 1, 0)});
    CHECK(table.find("Model") != std::string::npos);
    CHECK(table.find("Accuracy") != std::string::npos);
    CHECK(table.find("0.857") != std::string::npos);
    CHECK(table.find("with gate") != std::string::npos);
  }
}

TEST_CASE("run_repeated and ablation harness") {
  const Dataset& data = separable_dataset();
  PipelineConfig pcfg;
  pcfg.hidden_dim = 16;
  TrainConfig tcfg;
  tcfg.epochs = 8;
  tcfg.lr = 0.04;
  tcfg.seed = 40;

  SUBCASE("full feature mask reproduces the unablated run exactly") {
    const auto plain = run_repeated("plain", Genotype::parse("PT"), data, pcfg, tcfg, 2);
    const auto masked =
        run_repeated("masked", Genotype::parse("PT"), data, pcfg, tcfg, 2, FeatureMask{});
    for (std::size_t m = 0; m < metric_names().size(); ++m)
      CHECK(plain.report.metrics[m].values == masked.report.metrics[m].values);
  }

  SUBCASE("skip ablation on a single-T genotype changes nothing") {
    PipelineConfig on = pcfg, off = pcfg;
    off.skip_enabled = false;
    const auto with_skip = run_repeated("on", Genotype::parse("PT"), data, on, tcfg, 2);
    const auto without = run_repeated("off", Genotype::parse("PT"), data, off, tcfg, 2);
    for (std::size_t m = 0; m < metric_names().size(); ++m)
      CHECK(with_skip.report.metrics[m].values == without.report.metrics[m].values);
  }

  SUBCASE("ablation grids have the documented shapes") {
    CHECK(ablation_arms(AblationMode::features).size() == 11);
    CHECK(ablation_arms(AblationMode::gate).size() == 2);
    CHECK(ablation_arms(AblationMode::skip).size() == 2);
    const auto arms = ablation_arms(AblationMode::features);
    CHECK(arms[0].label == "full");
    CHECK(arms[6].label == "cat + num");
    int selected = arms[6].mask.count();
    CHECK(selected == 2);
  }

  SUBCASE("five-seed accuracy spread stays tight at the desk configuration") {
    PipelineConfig desk = pcfg;
    desk.hidden_dim = 32;
    TrainConfig cfg = tcfg;
    cfg.epochs = 30;
    const auto result = run_repeated("PT", Genotype::parse("PT"), data, desk, cfg, 5);
    CHECK(result.report.runs_completed == 5);
    CHECK(result.report.metrics[0].stddev <= 0.05);
  }

  SUBCASE("gate ablation table runs to completion with two rows") {
    const auto rows = run_ablation(AblationMode::gate, Genotype::parse("PPT"), data, pcfg, tcfg, 2);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == "with gate");
    CHECK(rows[1].label == "without gate");
    CHECK(rows[0].runs_completed + rows[0].runs_diverged == 2);
    const std::string table = format_table(rows);
    CHECK(table.find("without gate") != std::string::npos);
  }
}
