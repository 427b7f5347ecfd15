#include <gtest/gtest.h>

#include <array>
#include <random>
#include <vector>

#include "rulemon/error.hpp"
#include "rulemon/logic.hpp"

namespace rulemon {
namespace {

LogicSystem make_logic(Family f) {
  LogicSystem l;
  l.family = f;
  return l;
}

constexpr std::array<Family, 3> kFuzzy = {Family::Lukasiewicz, Family::Goedel, Family::Product};
constexpr std::array<Family, 4> kAll = {Family::Lukasiewicz, Family::Goedel, Family::Product, Family::Boolean};

TEST(TruthValue, RejectsNanAndOutOfRange) {
  EXPECT_THROW(TruthValue(std::nan("")), DataError);
  EXPECT_THROW(TruthValue(-0.01), DataError);
  EXPECT_THROW(TruthValue(1.01), DataError);
  EXPECT_EQ(TruthValue(0.25).value(), 0.25);
}

TEST(Connectives, Negation) {
  for (auto f : kFuzzy) EXPECT_EQ(neg(TruthValue(0.0), make_logic(f)).value(), 1.0);
  EXPECT_DOUBLE_EQ(neg(TruthValue(0.3), make_logic(Family::Product)).value(), 0.7);
  EXPECT_EQ(neg(TruthValue(0.4), make_logic(Family::Boolean)).value(), 1.0);
  EXPECT_EQ(neg(TruthValue(0.5), make_logic(Family::Boolean)).value(), 0.0);
}

TEST(Connectives, Conjunction) {
  EXPECT_NEAR(conj(TruthValue(0.7), TruthValue(0.6), make_logic(Family::Lukasiewicz)).value(), 0.3, 1e-15);
  EXPECT_EQ(conj(TruthValue(0.5), TruthValue(0.5), make_logic(Family::Product)).value(), 0.25);
  for (auto f : kFuzzy) {
    EXPECT_EQ(conj(TruthValue(0.37), TruthValue(1.0), make_logic(f)).value(), 0.37);
  }
}

TEST(Connectives, Disjunction) {
  EXPECT_EQ(disj(TruthValue(0.5), TruthValue(0.5), make_logic(Family::Product)).value(), 0.75);
  EXPECT_EQ(disj(TruthValue(0.7), TruthValue(0.6), make_logic(Family::Lukasiewicz)).value(), 1.0);
  for (auto f : kFuzzy) {
    EXPECT_EQ(disj(TruthValue(0.37), TruthValue(0.0), make_logic(f)).value(), 0.37);
  }
}

TEST(Connectives, Implication) {
  const auto luk = make_logic(Family::Lukasiewicz);
  EXPECT_NEAR(impl(TruthValue(0.3), TruthValue(0.2), luk, ImplicationStyle::S).value(), 0.9, 1e-15);
  EXPECT_NEAR(impl(TruthValue(0.3), TruthValue(0.2), luk, ImplicationStyle::R).value(), 0.9, 1e-15);
  EXPECT_EQ(impl(TruthValue(0.3), TruthValue(0.2), make_logic(Family::Goedel), ImplicationStyle::R).value(), 0.2);
  EXPECT_EQ(impl(TruthValue(0.0), TruthValue(0.0), make_logic(Family::Product), ImplicationStyle::R).value(), 1.0);
  EXPECT_DOUBLE_EQ(impl(TruthValue(0.5), TruthValue(0.2), make_logic(Family::Product), ImplicationStyle::R).value(),
                   0.4);
  EXPECT_DOUBLE_EQ(impl(TruthValue(0.5), TruthValue(0.2), make_logic(Family::Product), ImplicationStyle::S).value(),
                   0.6);
  EXPECT_EQ(impl(TruthValue(0.9), TruthValue(0.1), make_logic(Family::Goedel), ImplicationStyle::S).value(), 0.1);
}

TEST(Connectives, BooleanThresholdIsInclusive) {
  auto b = make_logic(Family::Boolean);
  b.bool_threshold = TruthValue(0.5);
  EXPECT_EQ(b.conj(0.5, 0.5), 1.0);
  EXPECT_EQ(b.conj(0.49, 0.9), 0.0);
  EXPECT_EQ(b.disj(0.49, 0.49), 0.0);
  EXPECT_EQ(b.impl(0.6, 0.4, ImplicationStyle::R), 0.0);
  EXPECT_EQ(b.impl(0.4, 0.4, ImplicationStyle::R), 1.0);
}

// Every family reproduces the classical truth tables on {0,1}.
TEST(Connectives, BooleanDegeneration) {
  for (auto f : kAll) {
    const auto l = make_logic(f);
    for (int a = 0; a <= 1; ++a) {
      for (int b = 0; b <= 1; ++b) {
        const bool A = a, B = b;
        EXPECT_EQ(l.neg(a), !A ? 1.0 : 0.0);
        EXPECT_EQ(l.conj(a, b), (A && B) ? 1.0 : 0.0);
        EXPECT_EQ(l.disj(a, b), (A || B) ? 1.0 : 0.0);
        EXPECT_EQ(l.impl(a, b, ImplicationStyle::S), (!A || B) ? 1.0 : 0.0);
        EXPECT_EQ(l.impl(a, b, ImplicationStyle::R), (!A || B) ? 1.0 : 0.0);
      }
    }
  }
}

TEST(Connectives, TNormAxioms) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto f : kFuzzy) {
    const auto l = make_logic(f);
    for (int i = 0; i < 2000; ++i) {
      const double a = u(rng), b = u(rng), c = u(rng);
      EXPECT_NEAR(l.conj(a, b), l.conj(b, a), 1e-12);
      EXPECT_NEAR(l.conj(a, l.conj(b, c)), l.conj(l.conj(a, b), c), 1e-12);
      EXPECT_NEAR(l.disj(a, l.disj(b, c)), l.disj(l.disj(a, b), c), 1e-12);
      EXPECT_NEAR(l.conj(a, 1.0), a, 1e-12);
      EXPECT_EQ(l.conj(a, 0.0), 0.0);
      EXPECT_NEAR(l.disj(a, 0.0), a, 1e-12);
      const double lo = std::min(b, c), hi = std::max(b, c);
      EXPECT_LE(l.conj(a, lo), l.conj(a, hi) + 1e-12);
      EXPECT_LE(l.disj(a, lo), l.disj(a, hi) + 1e-12);
    }
  }
}

TEST(Connectives, SImplicationIsNegThenDisj) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto f : kAll) {
    const auto l = make_logic(f);
    for (int i = 0; i < 500; ++i) {
      const double a = u(rng), b = u(rng);
      EXPECT_EQ(l.impl(a, b, ImplicationStyle::S), l.disj(l.neg(a), b));
    }
  }
}

TEST(Connectives, OutputsStayInUnitInterval) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto f : kAll) {
    const auto l = make_logic(f);
    for (int i = 0; i < 2000; ++i) {
      const double a = u(rng), b = i % 10 == 0 ? 0.0 : u(rng);
      for (double v : {l.neg(a), l.conj(a, b), l.disj(a, b), l.impl(a, b, ImplicationStyle::S),
                       l.impl(a, b, ImplicationStyle::R)}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(Quantifiers, ForallReductions) {
  auto l = make_logic(Family::Goedel);
  const std::vector<double> v = {0.2, 0.4, 0.9};
  EXPECT_NEAR(reduce_forall(v, l), 0.5, 1e-15);
  EXPECT_EQ(reduce_forall(std::span<const double>{}, l), 1.0);
  l.family = Family::Lukasiewicz;
  l.forall_mode = ForallMode::TNormReduce;
  EXPECT_NEAR(reduce_forall(std::vector<double>{0.9, 0.8}, l), 0.7, 1e-12);
  EXPECT_EQ(reduce_forall(std::span<const double>{}, l), 1.0);
}

TEST(Quantifiers, ExistsReductions) {
  auto l = make_logic(Family::Goedel);
  EXPECT_EQ(reduce_exists(std::vector<double>{0.3, 0.8, 0.1}, l), 0.8);
  EXPECT_EQ(reduce_exists(std::span<const double>{}, l), 0.0);
  l.family = Family::Product;
  l.exists_mode = ExistsMode::TConormReduce;
  EXPECT_EQ(reduce_exists(std::vector<double>{0.5, 0.5}, l), 0.75);
  l.exists_mode = ExistsMode::Mean;
  EXPECT_EQ(reduce_exists(std::vector<double>{0.5, 0.25}, l), 0.375);
  EXPECT_EQ(reduce_exists(std::span<const double>{}, l), 0.0);
}

TEST(Quantifiers, GoedelExistsIsMostConservative) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> n(0, 20);
  LogicSystem g = make_logic(Family::Goedel);
  LogicSystem p = make_logic(Family::Product);
  LogicSystem l = make_logic(Family::Lukasiewicz);
  p.exists_mode = ExistsMode::TConormReduce;
  l.exists_mode = ExistsMode::TConormReduce;
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(static_cast<std::size_t>(n(rng)));
    for (auto& x : v) x = u(rng);
    const double eg = reduce_exists(v, g), ep = reduce_exists(v, p), el = reduce_exists(v, l);
    EXPECT_LE(eg, ep + 1e-12);
    EXPECT_LE(ep, el + 1e-12);
  }
}

TEST(Quantifiers, DeMorganDualityReport) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto f : kAll) {
    for (auto fm : {ForallMode::Mean, ForallMode::TNormReduce}) {
      for (auto em : {ExistsMode::GoedelMax, ExistsMode::TConormReduce, ExistsMode::Mean}) {
        LogicSystem l = make_logic(f);
        l.forall_mode = fm;
        l.exists_mode = em;
        if (!quantifiers_are_dual(l)) continue;
        for (int i = 0; i < 50; ++i) {
          std::vector<double> v(7), nv(7);
          for (std::size_t k = 0; k < v.size(); ++k) {
            v[k] = f == Family::Boolean ? std::round(u(rng)) : u(rng);
            nv[k] = l.neg(v[k]);
          }
          EXPECT_NEAR(reduce_exists(v, l), l.neg(reduce_forall(nv, l)), 1e-12) << l.describe();
        }
      }
    }
  }
  LogicSystem mixed = make_logic(Family::Product);
  mixed.forall_mode = ForallMode::Mean;
  mixed.exists_mode = ExistsMode::GoedelMax;
  EXPECT_FALSE(quantifiers_are_dual(mixed));
}

TEST(Parsing, EnumSpellings) {
  EXPECT_EQ(parse_family("Product"), Family::Product);
  EXPECT_EQ(parse_family("luk"), Family::Lukasiewicz);
  EXPECT_EQ(parse_family("bool"), Family::Boolean);
  EXPECT_EQ(parse_exists_mode("max"), ExistsMode::GoedelMax);
  EXPECT_EQ(parse_forall_mode("mean"), ForallMode::Mean);
  EXPECT_EQ(parse_implication("R"), ImplicationStyle::R);
  EXPECT_THROW(parse_family("hamacher"), UsageError);
}

}  // namespace
}  // namespace rulemon
