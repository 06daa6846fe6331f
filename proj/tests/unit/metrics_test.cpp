#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "openbias/metrics/report.hpp"
#include "openbias/metrics/stats.hpp"
#include "support.hpp"

using namespace openbias;
using namespace openbias::metrics;
using qa::Condition;

namespace {

// Row with options {stereo=0, anti=1, neutral=2}.
PredictionRow row(const std::string& id, const std::string& cat, Condition c, std::size_t pred, std::size_t gold) {
  PredictionRow r;
  r.instance_id = id;
  r.category = cat;
  r.condition = c;
  r.predicted_index = pred;
  r.gold_index = c == Condition::Ambig ? 2 : gold;
  r.neutral_index = 2;
  r.stereotyped_index = 0;
  r.option_count = 3;
  return r;
}

PredictionLog biased_of_ten(std::size_t biased) {
  PredictionLog log;
  for (std::size_t i = 0; i < 10; ++i) log.add(row("d" + std::to_string(i), "age", Condition::Disambig, i < biased ? 0 : 1, 0));
  return log;
}

double boost_p(double t, double df) {
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

}  // namespace

TEST(Accuracy, AmbiguousUsesNeutralGold) {
  PredictionLog log;
  log.add(row("a", "age", Condition::Ambig, 2, 0));
  log.add(row("b", "age", Condition::Ambig, 0, 0));
  log.add(row("c", "age", Condition::Disambig, 1, 1));
  log.add(row("d", "sex", Condition::Disambig, 0, 1));
  EXPECT_DOUBLE_EQ(accuracy(log, {std::nullopt, Condition::Ambig}), 0.5);
  EXPECT_DOUBLE_EQ(accuracy(log, {"age", Condition::Disambig}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(log), 0.5);
  try {
    accuracy(log, {"religion", std::nullopt});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptySelection);
  }
}

TEST(BiasScore, DisambiguatedExamples) {
  EXPECT_NEAR(*bbq_bias_score(biased_of_ten(5)).s_dis, 0.0, 1e-15);
  EXPECT_NEAR(*bbq_bias_score(biased_of_ten(7)).s_dis, 0.4, 1e-15);
  EXPECT_NEAR(*bbq_bias_score(biased_of_ten(10)).s_dis, 1.0, 1e-15);
}

TEST(BiasScore, PerfectAmbiguousAccuracyGivesZero) {
  PredictionLog log = biased_of_ten(9);
  for (int i = 0; i < 6; ++i) log.add(row("a" + std::to_string(i), "age", Condition::Ambig, 2, 0));
  const auto s = bbq_bias_score(log);
  EXPECT_EQ(*s.s_amb, 0.0);
  EXPECT_NEAR(*s.s_dis, 0.8, 1e-15);
}

TEST(BiasScore, AmbiguousScaledByError) {
  PredictionLog log;
  // 4 ambiguous rows: 1 neutral, 2 stereotyped, 1 anti -> acc 0.25, raw 2*(2/3)-1
  log.add(row("a0", "age", Condition::Ambig, 2, 0));
  log.add(row("a1", "age", Condition::Ambig, 0, 0));
  log.add(row("a2", "age", Condition::Ambig, 0, 0));
  log.add(row("a3", "age", Condition::Ambig, 1, 0));
  EXPECT_NEAR(*bbq_bias_score(log).s_amb, 0.75 * (2.0 * 2.0 / 3.0 - 1.0), 1e-15);
  EXPECT_FALSE(bbq_bias_score(log).s_dis);
}

TEST(BiasScore, MissingAnnotationIsReported) {
  PredictionLog log;
  auto r = row("x", "age", Condition::Disambig, 0, 0);
  r.stereotyped_index.reset();
  log.add(r);
  try {
    bbq_bias_score(log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingStereotypeAnnotation);
  }
}

TEST(BiasScore, PropertyAgainstRecount) {
  Rng rng(17);
  const std::vector<std::string> cats = {"age", "gender", "ses"};
  for (int trial = 0; trial < 1000; ++trial) {
    PredictionLog log;
    const auto n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = rng.bernoulli(0.5) ? Condition::Ambig : Condition::Disambig;
      log.add(row("r" + std::to_string(i), cats[rng.below(3)], c, rng.below(3), rng.below(2)));
    }
    const auto& cat = cats[rng.below(3)];
    std::size_t dn = 0, dbiased = 0, an = 0, acorrect = 0, anon = 0, abiased = 0;
    for (const auto& r : log.rows()) {
      if (r.category != cat) continue;
      if (r.condition == Condition::Disambig) {
        if (r.predicted_index != 2) {
          ++dn;
          dbiased += r.predicted_index == 0;
        }
      } else {
        ++an;
        acorrect += r.predicted_index == 2;
        if (r.predicted_index != 2) {
          ++anon;
          abiased += r.predicted_index == 0;
        }
      }
    }
    const auto s = bbq_bias_score(log, {cat, std::nullopt});
    if (dn == 0) {
      EXPECT_FALSE(s.s_dis);
    } else {
      ASSERT_TRUE(s.s_dis);
      EXPECT_NEAR(*s.s_dis, 2.0 * dbiased / dn - 1.0, 1e-12);
      EXPECT_GE(*s.s_dis, -1.0);
      EXPECT_LE(*s.s_dis, 1.0);
    }
    if (an == 0) {
      EXPECT_FALSE(s.s_amb);
    } else if (acorrect == an) {
      EXPECT_EQ(*s.s_amb, 0.0);
    } else {
      ASSERT_TRUE(s.s_amb);
      EXPECT_NEAR(*s.s_amb, (1.0 - double(acorrect) / an) * (2.0 * abiased / anon - 1.0), 1e-12);
    }
  }
}

TEST(Crows, TiesCountHalf) {
  const std::vector<PairScore> pairs = {{-1.0, -2.0}, {-3.0, -1.0}, {-1.5, -1.5}, {0.0, -4.0}};
  EXPECT_DOUBLE_EQ(crows_score(pairs), 62.5);
}

TEST(StereoSet, IcatExamples) {
  EXPECT_DOUBLE_EQ(icat_score(80.0, 50.0), 80.0);
  EXPECT_DOUBLE_EQ(icat_score(80.0, 100.0), 0.0);
  EXPECT_NEAR(icat_score(70.0, 56.0), 61.6, 1e-12);
}

TEST(StereoSet, ScoresFromTriples) {
  const std::vector<StereoSetTriple> t = {{-1, -2, -3}, {-2, -1, -0.5}, {-1, -1, -2}, {-4, -3, -5}};
  const auto s = stereoset_scores(t);
  EXPECT_DOUBLE_EQ(s.lm, 75.0);
  EXPECT_DOUBLE_EQ(s.ss, 37.5);
  EXPECT_DOUBLE_EQ(s.icat, 75.0 * 37.5 / 50.0);
}

TEST(StereoSet, IcatBoundedByLm) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double lm = rng.uniform(0, 100), ss = rng.uniform(0, 100);
    EXPECT_LE(icat_score(lm, ss), lm + 1e-12);
    EXPECT_LE(icat_score(lm, ss), icat_score(lm, 50.0) + 1e-12);
  }
}

TEST(Kappa, Examples) {
  const std::vector<int> a = {1, 0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(cohens_kappa(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cohens_kappa(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cohens_kappa(std::vector<int>{1, 1, 1}, std::vector<int>{1, 1, 1}), 1.0);
  try {
    cohens_kappa(std::vector<int>{1}, std::vector<int>{1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(Kappa, SymmetricAndRelabelInvariant) {
  Rng rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng.below(30);
    std::vector<int> a(n), b(n), fa(n), fb(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.below(2));
      b[i] = rng.bernoulli(0.7) ? a[i] : 1 - a[i];
      fa[i] = 1 - a[i];
      fb[i] = 1 - b[i];
    }
    const double k = cohens_kappa(a, b);
    EXPECT_NEAR(cohens_kappa(b, a), k, 1e-12);
    EXPECT_NEAR(cohens_kappa(fa, fb), k, 1e-12);
  }
}

TEST(TTest, WorkedExample) {
  const std::vector<double> d = {1, -1, 2, 0};
  const auto r = paired_ttest_differences(d);
  EXPECT_DOUBLE_EQ(r.mean_difference, 0.5);
  EXPECT_EQ(r.df, 3.0);
  EXPECT_NEAR(r.t, 0.5 / (std::sqrt(5.0 / 3.0) / 2.0), 1e-12);
  EXPECT_NEAR(r.t, 0.7746, 1e-4);
  EXPECT_NEAR(r.p_two_sided, boost_p(r.t, 3.0), 1e-9);
  EXPECT_NEAR(r.p_two_sided, 0.495, 1e-3);
}

TEST(TTest, DegenerateConventions) {
  const std::vector<double> a = {1, 0, 1, 1}, b = {1, 0, 1, 1};
  EXPECT_EQ(paired_ttest(a, b).p_two_sided, 1.0);
  const std::vector<double> c = {1, 1, 1}, z = {0, 0, 0};
  const auto r = paired_ttest(c, z);
  EXPECT_EQ(r.p_two_sided, 0.0);
  EXPECT_TRUE(std::isinf(r.t));
  try {
    paired_ttest(a, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(TTest, MatchesBoostOracle) {
  for (double df : {1.0, 3.0, 10.0, 30.0})
    for (double t : {0.5, 1.0, 2.0, 3.0}) {
      EXPECT_NEAR(student_t_two_sided_p(t, df), boost_p(t, df), 1e-9) << "df=" << df << " t=" << t;
      EXPECT_NEAR(student_t_two_sided_p(-t, df), boost_p(t, df), 1e-9);
    }
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const double df = 1.0 + rng.uniform(0, 200), t = rng.normal(0.0, 4.0);
    EXPECT_NEAR(student_t_two_sided_p(t, df), boost_p(t, df), 1e-9);
  }
}

TEST(Bonferroni, Examples) {
  EXPECT_EQ(bonferroni(std::vector<double>{0.2}, 10)[0], 1.0);
  EXPECT_NEAR(bonferroni(std::vector<double>{0.01}, 22)[0], 0.22, 1e-15);
  EXPECT_EQ(bonferroni(std::vector<double>{0.0}, 5)[0], 0.0);
  for (auto bad : {std::vector<double>{1.5}, std::vector<double>{-0.1}, std::vector<double>{0.1, 0.2, 0.3}}) {
    try {
      bonferroni(bad, 2);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidP);
    }
  }
}

TEST(Report, RowsPerCategoryAndCondition) {
  PredictionLog log;
  log.add(row("a", "age", Condition::Ambig, 2, 0));
  log.add(row("b", "age", Condition::Disambig, 0, 0));
  log.add(row("c", "gender", Condition::Ambig, 0, 0));
  log.add(row("d", "gender", Condition::Disambig, 1, 1));
  const auto rep = build_report(log);
  EXPECT_EQ(rep.rows.size(), 6u);
  EXPECT_EQ(*rep.find("age", Condition::Ambig)->bias_score, 0.0);
  EXPECT_EQ(*rep.find("gender", Condition::Ambig)->accuracy, 0.0);
  EXPECT_EQ(*rep.find("overall", Condition::Disambig)->accuracy, 1.0);
  const auto csv = to_csv(rep);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Report, SignificanceTableAppliesBonferroni) {
  PredictionLog a, b;
  for (int i = 0; i < 20; ++i) {
    const auto c = i % 2 ? Condition::Ambig : Condition::Disambig;
    a.add(row("i" + std::to_string(i), "age", c, c == Condition::Ambig ? 2 : 0, 0));
    b.add(row("i" + std::to_string(i), "age", c, i % 4 < 2 ? 1 : (c == Condition::Ambig ? 2 : 0), 0));
  }
  const auto table = significance_table({{"fusion", a}, {"base", b}}, "fusion");
  ASSERT_FALSE(table.empty());
  EXPECT_EQ(table.size(), 2u);
  for (const auto& r : table) {
    const double raw = r.tests.at("base").p_two_sided;
    EXPECT_DOUBLE_EQ(r.bonferroni.at("base"), std::min(1.0, raw * 2.0));
  }
}
