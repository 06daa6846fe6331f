// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
#include <boost/math/distributions/students_t.hpp>
#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "openbias/cli/commands.hpp"
#include "openbias/metrics/report.hpp"
#include "openbias/metrics/stats.hpp"
#include "openbias/refine/refine.hpp"
#include "openbias/train/diagnostics.hpp"
#include "openbias/train/pipeline.hpp"
#include "openbias/train/synthetic.hpp"

using namespace openbias;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = OPENBIAS_FIXTURE_DIR;

/// Collects failures for one criterion; the first few are reported.
struct Check {
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::fabs(got - want) <= tol)) {
      std::ostringstream s;
      s.precision(17);
      s << what << ": got " << got << ", want " << want << " +- " << tol;
      failures.push_back(s.str());
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int decimals = 3) { return format_fixed(v, decimals); }

// ---------------------------------------------------------------------------

void gradient_correctness(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = train::model_grad_check(seed);
    worst = std::max(worst, r.max_rel_error);
    c.expect(r.max_rel_error < 1e-4, "seed " + std::to_string(seed) + ": " + r.worst_name + " rel error " +
                                         std::to_string(r.max_rel_error));
    c.expect(r.checked > 0, "seed " + std::to_string(seed) + ": nothing checked");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, "runtime " + fmt(secs, 1) + " s");
  std::ostringstream s;
  s << "max rel error " << worst << ", " << fmt(secs, 1) << " s";
  c.detail = s.str();
}

void identity_at_init(Check& c) {
  auto spec = train::default_synthetic_spec(2);
  const auto instances = train::generate_synthetic(spec, 100, Rng(2024), "id");
  std::vector<std::string> texts;
  for (const auto& q : instances) {
    texts.push_back(q.context + " " + q.question);
    for (const auto& o : q.options) texts.push_back(o);
  }
  const auto tok = qa::Tokenizer::build(texts);
  train::ModelSpec ms;
  ms.backbone.d_model = 16;
  ms.backbone.d_ffn = 32;
  ms.backbone.n_layers = 2;
  ms.backbone.n_heads = 2;
  ms.backbone.max_sequence_length = 48;
  const auto state = train::build_model(ms, {"age", "gender"}, tok.vocab_size(), 7);
  const auto backbone = model::set_mode(state, model::Mode::backbone_only());
  const auto single = model::set_mode(state, model::Mode::single_adapter("gender"));
  const auto fused = model::set_mode(state, model::Mode::fusion());
  std::size_t compared = 0;
  for (const auto& q : instances) {
    const auto cands = qa::format_candidates(q, tok, ms.backbone.max_sequence_length);
    const auto a = model::forward_score(backbone, cands);
    const auto b = model::forward_score(single, cands);
    const auto f = model::forward_score(fused, cands);
    for (std::size_t i = 0; i < a.size(); ++i) {
      c.expect(std::bit_cast<std::uint64_t>(a[i]) == std::bit_cast<std::uint64_t>(b[i]), q.id + ": single adapter differs");
      c.expect(std::bit_cast<std::uint64_t>(a[i]) == std::bit_cast<std::uint64_t>(f[i]), q.id + ": fusion differs");
      ++compared;
    }
  }
  c.detail = std::to_string(instances.size()) + " instances, " + std::to_string(compared) + " logits bitwise equal";
}

train::PipelineConfig desk_config(std::uint64_t seed) {
  train::PipelineConfig cfg;
  cfg.model.backbone.d_model = 32;
  cfg.model.backbone.d_ffn = 64;
  cfg.model.backbone.max_sequence_length = 32;
  cfg.model.reduction_factor = 4;
  cfg.train.seed = seed;
  cfg.train.base.learning_rate = 1e-3;
  cfg.train.epochs = 3;
  return cfg;
}

struct DeskData {
  std::vector<qa::QAInstance> base;
  std::unique_ptr<train::Corpus> corpus;
  train::PipelineData data;
};

DeskData desk_data(std::uint64_t seed, std::size_t base_count, std::size_t count, std::size_t per_category) {
  DeskData d;
  const auto spec = train::default_synthetic_spec(2);
  auto base_spec = spec;
  base_spec.ambig_fraction = 0.0;
  const Rng root(seed);
  d.base = train::generate_synthetic(base_spec, base_count, root.split("base"), "race");
  d.corpus = std::make_unique<train::Corpus>(train::generate_synthetic(spec, count, root.split("bbq"), "bbq"));
  d.data.base_corpus = d.base;
  d.data.corpus = d.corpus.get();
  d.data.plan = train::build_split(*d.corpus, nullptr, train::ConfigKind::Config1, {"age", "gender"}, per_category, seed);
  return d;
}

void frozen_backbone(Check& c) {
  auto d = desk_data(11, 200, 400, 100);
  auto cfg = desk_config(11);
  cfg.train.epochs = 1;
  const auto r = train::run_pipeline(cfg, d.data);
  c.expect(r.base_state.has_value(), "no base checkpoint");
  if (!r.base_state) return;
  const auto before = r.base_state->params.checksum("backbone.");
  const auto after = r.state.params.checksum("backbone.");
  c.expect(before == after, "backbone checksum changed");
  c.expect(r.base_state->params.checksum("adapter.") != r.state.params.checksum("adapter."), "adapters did not train");
  c.expect(r.base_state->params.checksum("fusion.") != r.state.params.checksum("fusion."), "fusion did not train");
  c.detail = "backbone checksum " + std::to_string(after) + " unchanged";
}

void loss_oracle(Check& c) {
  using nn::Tensor;
  const double v = train::kl_uniformity_loss(Tensor::vector({std::log(3.0), 0.0}));
  c.near(v, 0.5 * std::log(4.0 / 3.0), 1e-12, "k=2 example");
  Rng rng(4);
  double worst_shift = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    std::vector<double> z(k);
    for (double& x : z) x = rng.normal(0.0, 3.0);
    const double l = train::kl_uniformity_loss(Tensor::vector(z));
    c.expect(l > 1e-12, "non-uniform logits gave zero loss");
    auto shifted = z;
    const double s = rng.normal(0.0, 100.0);
    for (double& x : shifted) x += s;
    const double ls = train::kl_uniformity_loss(Tensor::vector(shifted));
    worst_shift = std::max(worst_shift, std::fabs(ls - l));
    c.near(ls, l, 1e-12, "shift invariance");

    std::vector<double> flat(k, rng.normal(0.0, 100.0));
    c.near(train::kl_uniformity_loss(Tensor::vector(flat)), 0.0, 1e-12, "uniform logits");
  }
  std::ostringstream s;
  s << "k=2 value " << v << ", worst shift drift " << worst_shift;
  c.detail = s.str();
}

void synthetic_debiasing(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto d = desk_data(seed, 1000, 1500, 500);
    const auto r = train::run_pipeline(desk_config(seed), d.data);
    const std::string tag = "seed " + std::to_string(seed);
    c.expect(!r.fault.has_value(), tag + ": numerical fault");
    c.expect(r.base_state.has_value(), tag + ": no base checkpoint");
    if (!r.base_state) continue;
    const auto eval_set = train::eval_instances(d.data);
    c.expect(d.data.plan.train_size() == 1000 && eval_set.size() == 500, tag + ": expected 1000 train / 500 eval");
    const auto base = train::evaluate(*r.base_state, r.tokenizer, eval_set);
    const auto fused = train::evaluate(r.state, r.tokenizer, eval_set);
    const metrics::Filter amb{std::nullopt, qa::Condition::Ambig}, dis{std::nullopt, qa::Condition::Disambig};
    const double base_amb = metrics::accuracy(base.log, amb);
    const double amb_acc = metrics::accuracy(fused.log, amb);
    const double dis_acc = metrics::accuracy(fused.log, dis);
    const auto s_amb = metrics::bbq_bias_score(fused.log, amb).s_amb;
    c.expect(base_amb <= 0.50, tag + ": base ambiguous accuracy " + fmt(base_amb));
    c.expect(amb_acc >= 0.90, tag + ": fused ambiguous accuracy " + fmt(amb_acc));
    c.expect(dis_acc >= 0.95, tag + ": fused disambiguated accuracy " + fmt(dis_acc));
    c.expect(s_amb.has_value() && std::fabs(*s_amb) <= 0.10, tag + ": s_amb " + (s_amb ? fmt(*s_amb) : "undefined"));
    detail << "s" << seed << " base amb " << fmt(base_amb, 2) << " fused amb " << fmt(amb_acc, 2) << " dis "
           << fmt(dis_acc, 2) << " s_amb " << (s_amb ? fmt(*s_amb, 2) : "-") << "; ";
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 600.0, "runtime " + fmt(secs, 1) + " s");
  detail << fmt(secs, 1) << " s";
  c.detail = detail.str();
}

void split_counts(Check& c) {
  const train::Corpus corpus(train::generate_synthetic(train::default_synthetic_spec(5), 3000, Rng(6), "bbq"));
  const auto names = corpus.categories();
  std::vector<std::string> cats(names.begin(), names.end());
  c.expect(cats.size() == 5, "corpus has " + std::to_string(cats.size()) + " categories");
  const auto c1 = train::build_split(corpus, nullptr, train::ConfigKind::Config1, cats, 500, 1);
  const auto c2 = train::build_split(corpus, nullptr, train::ConfigKind::Config2, cats, 300, 1);
  const train::Corpus kobbq(train::generate_synthetic(train::default_synthetic_spec(4), 1234, Rng(7), "kobbq"));
  const auto c3 = train::build_split(corpus, &kobbq, train::ConfigKind::Config3, cats, 500, 1);
  c.expect(c1.train_size() == 2500, "config1 train " + std::to_string(c1.train_size()));
  c.expect(c2.train_size() == 1500, "config2 train " + std::to_string(c2.train_size()));
  c.expect(c3.eval_sets.at("eval").size() == kobbq.size(), "config3 eval " + std::to_string(c3.eval_sets.at("eval").size()));
  c.detail = "config1 " + std::to_string(c1.train_size()) + ", config2 " + std::to_string(c2.train_size()) +
             ", config3 eval " + std::to_string(c3.eval_sets.at("eval").size()) + "/" + std::to_string(kobbq.size());
}

double reference_p(const std::vector<double>& d) {
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double t = mean / std::sqrt(ss / (n - 1.0) / n);
  boost::math::students_t dist(n - 1.0);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

void statistics_oracles(Check& c) {
  c.near(metrics::cohens_kappa(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 0, 1}), 0.0, 0.0, "A/B example");
  c.near(metrics::cohens_kappa(std::vector<int>{1, 0, 1, 1, 0}, std::vector<int>{1, 0, 1, 1, 0}), 1.0, 0.0, "identical");
  // 10 items: both yes 4, both no 3, a-only 2, b-only 1 -> po 0.7, pe 0.5, kappa 0.4
  c.near(metrics::cohens_kappa(std::vector<int>{1, 1, 1, 1, 0, 0, 0, 1, 1, 0}, std::vector<int>{1, 1, 1, 1, 0, 0, 0, 0, 0, 1}),
         0.4, 1e-12, "hand example");
  Rng rng(8);
  double worst = 0.0;
  for (int df : {1, 3, 10, 30}) {
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> d(df + 1);
      for (double& x : d) x = rng.normal(0.3, 1.0);
      const double got = metrics::paired_ttest_differences(d).p_two_sided;
      const double want = reference_p(d);
      worst = std::max(worst, std::fabs(got - want));
      c.near(got, want, 1e-6, "t-test p at df " + std::to_string(df));
    }
  }
  c.near(metrics::bonferroni(std::vector<double>{0.01}, 22)[0], 0.22, 1e-15, "bonferroni(0.01, 22)");
  c.near(metrics::bonferroni(std::vector<double>{0.3}, 22)[0], 1.0, 0.0, "bonferroni cap");
  std::ostringstream s;
  s << "worst p-value gap " << worst;
  c.detail = s.str();
}

metrics::PredictionRow row(std::size_t i, qa::Condition cond, std::size_t pred, std::size_t gold) {
  metrics::PredictionRow r;
  r.instance_id = "r" + std::to_string(i);
  r.category = i % 2 ? "age" : "gender";
  r.condition = cond;
  r.predicted_index = pred;
  r.gold_index = cond == qa::Condition::Ambig ? 2 : gold;
  r.neutral_index = 2;
  r.stereotyped_index = 0;
  r.option_count = 3;
  return r;
}

void metric_fixed_points(Check& c) {
  metrics::PredictionLog sym;
  for (std::size_t i = 0; i < 10; ++i) sym.add(row(i, qa::Condition::Disambig, i < 5 ? 0 : 1, 0));
  const auto s_dis = metrics::bbq_bias_score(sym).s_dis;
  c.expect(s_dis.has_value() && *s_dis == 0.0, "s_dis on 5-of-10");

  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    metrics::PredictionLog log;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) log.add(row(i, qa::Condition::Ambig, 2, 2));
    for (std::size_t i = n; i < n + rng.below(30); ++i) log.add(row(i, qa::Condition::Disambig, rng.below(3), rng.below(2)));
    const auto s = metrics::bbq_bias_score(log).s_amb;
    c.expect(s.has_value() && *s == 0.0, "s_amb with perfect ambiguous accuracy");
  }

  const std::vector<metrics::PairScore> balanced = {{-1.0, -2.0}, {-2.0, -1.0}, {-0.5, -3.0}, {-3.0, -0.5}};
  c.expect(metrics::crows_score(balanced) == 50.0, "crows balanced");
  for (double lm : {0.0, 37.5, 80.0, 100.0}) {
    c.expect(metrics::icat_score(lm, 50.0) == lm, "icat at ss=50");
    c.expect(metrics::icat_score(lm, 0.0) == 0.0, "icat at ss=0");
    c.expect(metrics::icat_score(lm, 100.0) == 0.0, "icat at ss=100");
  }
  c.detail = "s_dis 0, s_amb 0 over 200 logs, crows 50, icat exact";
}

double oracle_silhouette(const std::vector<refine::Vec>& pts, const std::vector<int>& labels, std::size_t k) {
  auto cosd = [](const refine::Vec& a, const refine::Vec& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
    }
    return 1.0 - ab / std::sqrt(aa * bb);
  };
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      sum[labels[j]] += cosd(pts[i], pts[j]);
      ++cnt[labels[j]];
    }
    if (cnt[labels[i]] == 0) continue;
    const double a = sum[labels[i]] / cnt[labels[i]];
    double b = 1e300;
    for (std::size_t q = 0; q < k; ++q)
      if (q != static_cast<std::size_t>(labels[i]) && cnt[q] > 0) b = std::min(b, sum[q] / cnt[q]);
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(pts.size());
}

void clustering_pipeline(Check& c) {
  const auto records = forge::load_records(kFixtures / "blobs_records.jsonl");
  refine::FileEmbeddingProvider provider(kFixtures / "blobs_embeddings.jsonl");
  std::vector<refine::Vec> pts;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < records.size(); ++i) {
    pts.push_back(refine::unit(provider.embed(refine::embedding_text(records[i]))));
    ids.push_back(std::to_string(i));
  }
  c.expect(pts.size() == 60 && pts.front().size() == 16, "fixture is not 60 x 16");

  const auto chosen = refine::kmeans_silhouette(ids, pts, {2, 3, 4, 5, 6}, 0);
  c.expect(chosen.k() == 3, "selected k=" + std::to_string(chosen.k()));
  std::size_t best_k = 0;
  double best = -2.0;
  for (std::size_t k = 2; k <= 6; ++k) {
    const auto fit = refine::kmeans_fit(ids, pts, k, 0);
    const double s = oracle_silhouette(pts, fit.assignment, k);
    c.near(fit.silhouette, s, 1e-9, "silhouette at k=" + std::to_string(k));
    if (s > best) best = s, best_k = k;
  }
  c.expect(best_k == 3, "brute force prefers k=" + std::to_string(best_k));

  const std::vector<double> d = {1, 1, 1, 1, 10};
  c.expect(refine::outlier_mask(d) == std::vector<bool>{false, false, false, false, true}, "[1,1,1,1,10] mask");

  refine::RefineConfig cfg;
  cfg.k_min = 2;
  cfg.k_max = 6;
  for (std::size_t min_size : {1, 5, 25}) {
    cfg.subcluster.min_size = min_size;
    for (bool merge : {false, true}) {
      cfg.merge_map = merge ? refine::load_merge_map(kFixtures / "merge_map.json") : refine::MergeMap{};
      const auto r = refine::refine_records(records, provider, cfg);
      c.expect(r.accounting.balanced() && r.accounting.input == records.size(),
               "conservation with min_size " + std::to_string(min_size) + (merge ? " + merge" : ""));
    }
  }
  c.detail = "k=3 (silhouette " + fmt(chosen.silhouette) + "), outlier fixture ok, conservation on 6 runs";
}

struct CliRun {
  int code = 0;
  std::string out, err;
};

CliRun cli_run(const std::string& command, const std::vector<std::string>& overrides) {
  std::istringstream in;
  std::ostringstream out, err;
  cli::Io io{in, out, err};
  CliRun r;
  r.code = cli::run_command(command, cli::Config::load(std::nullopt, overrides), io);
  r.out = out.str();
  r.err = err.str();
  return r;
}

void forge_determinism(Check& c, const fs::path& scratch) {
  std::vector<std::string> base = {"forge.captions=" + (kFixtures / "doctor_captions.txt").string(),
                                   "forge.provider.kind=replay",
                                   "forge.provider.transcript=" + (kFixtures / "doctor_transcript.jsonl").string(),
                                   "forge.retry.initial_backoff_ms=0"};
  std::vector<std::string> bytes;
  for (const char* name : {"forge-a", "forge-b"}) {
    auto o = base;
    o.push_back("run_dir=" + (scratch / name).string());
    const auto r = cli_run("forge", o);
    c.expect(r.code == 0, std::string(name) + " exited " + std::to_string(r.code) + ": " + r.err);
    bytes.push_back(fs::exists(scratch / name / "records.jsonl") ? read_file(scratch / name / "records.jsonl") : "");
  }
  c.expect(!bytes[0].empty() && bytes[0] == bytes[1], "records.jsonl differs between runs");
  const auto records = forge::load_records(scratch / "forge-a" / "records.jsonl");
  c.expect(records.size() == 2, "expected 2 doctor records, got " + std::to_string(records.size()));
  if (records.size() == 2) {
    c.expect(records[0].bias_category == "Person Gender" && !records[0].presence_indicator, "gender record");
    c.expect(records[1].bias_category == "Person Occupation" && records[1].presence_indicator &&
                 records[1].answer == std::optional<std::string>("Doctor"),
             "occupation record");
  }
  c.detail = std::to_string(bytes[0].size()) + " bytes identical, " + std::to_string(records.size()) + " records";
}

void lambda_ablation(Check& c, const fs::path& scratch) {
  const auto dir = scratch / "ablate";
  const auto r = cli_run("ablate-lambda", {"run_dir=" + dir.string(), "seed=3", "data.synthetic.categories=2",
                                           "data.synthetic.count=400", "data.synthetic.base_count=200",
                                           "data.per_category_count=100", "model.backbone.d_model=16",
                                           "model.backbone.d_ffn=32", "model.backbone.max_sequence_length=32",
                                           "train.epochs=1"});
  c.expect(r.code == 0, "ablate-lambda exited " + std::to_string(r.code) + ": " + r.err);
  std::size_t complete = 0;
  for (const char* v : {"0.1", "0.5", "0.7", "1.4"}) {
    const auto run = dir / (std::string("lambda-") + v);
    bool ok = true;
    for (const char* f : {"config.json", "split_plan.json", "vocab.json", "eval_set.jsonl", "eval/metrics.csv",
                          "eval/predictions.jsonl", "model"})
      ok = ok && fs::exists(run / f);
    c.expect(ok, run.filename().string() + " incomplete");
    complete += ok;
  }
  const std::string md = fs::exists(dir / "comparison.md") ? read_file(dir / "comparison.md") : "";
  const auto lines = split_lines(md);
  c.expect(lines.size() >= 3, "comparison.md missing");
  if (lines.size() >= 3) {
    for (const char* v : {"0.1", "0.5", "0.7", "1.4"})
      for (const char* col : {" Amb Acc", " Amb BS", " Disamb Acc", " Disamb BS"})
        c.expect(lines[0].find(std::string("lambda=") + v + col) != std::string::npos,
                 std::string("missing column lambda=") + v + col);
    bool overall = false;
    for (const auto& l : lines) overall = overall || l.rfind("| overall |", 0) == 0;
    c.expect(overall, "no overall row");
  }
  c.detail = std::to_string(complete) + "/4 run directories, comparison table with " +
             std::to_string(lines.size() > 2 ? lines.size() - 2 : 0) + " rows";
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number; default runs all.
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));

  const fs::path scratch = fs::temp_directory_path() / ("openbias-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(scratch);

  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"identity at init", identity_at_init},
      {"frozen backbone", frozen_backbone},
      {"loss formula oracle", loss_oracle},
      {"synthetic debiasing end-to-end", synthetic_debiasing},
      {"split plan counts", split_counts},
      {"statistics oracles", statistics_oracles},
      {"metric fixed points", metric_fixed_points},
      {"clustering pipeline", clustering_pipeline},
      {"forge determinism", [&](Check& c) { forge_determinism(c, scratch); }},
      {"lambda ablation harness", [&](Check& c) { lambda_ablation(c, scratch); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Check c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = c.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
    for (std::size_t f = 0; f < c.failures.size() && f < 5; ++f) std::cout << "     " << c.failures[f] << "\n";
    if (c.failures.size() > 5) std::cout << "     ... " << c.failures.size() - 5 << " more\n";
    std::cout.flush();
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
