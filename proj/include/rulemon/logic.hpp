#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace rulemon {

enum class Family { Lukasiewicz, Goedel, Product, Boolean };
enum class ImplicationStyle { S, R };
enum class ForallMode { Mean, TNormReduce };
enum class ExistsMode { GoedelMax, TConormReduce, Mean };
enum class Quantifier { ForAll, Exists };

std::string to_string(Family f);
std::string to_string(ImplicationStyle s);
std::string to_string(ForallMode m);
std::string to_string(ExistsMode m);

// Accept the canonical names plus the short CLI spellings
// ("luk", "goedel"/"godel"/"min", "product", "bool", "max", ...).
// Throw UsageError on anything else.
Family parse_family(std::string_view s);
ImplicationStyle parse_implication(std::string_view s);
ForallMode parse_forall_mode(std::string_view s);
ExistsMode parse_exists_mode(std::string_view s);

/// A truth degree in [0,1]. NaN and out-of-range values are rejected.
class TruthValue {
 public:
  constexpr TruthValue() = default;
  explicit TruthValue(double v);

  double value() const { return value_; }
  explicit operator double() const { return value_; }

  friend bool operator==(TruthValue, TruthValue) = default;

 private:
  double value_ = 0.0;
};

/// A connective family together with the quantifier reduction modes.
///
/// The member connectives work on raw doubles so that mask kernels can call
/// them in tight loops; callers guarantee inputs lie in [0,1]. The Boolean
/// family binarizes every connective input at bool_threshold (a >= t) and
/// returns exactly 0 or 1.
struct LogicSystem {
  Family family = Family::Goedel;
  TruthValue bool_threshold{0.5};
  ImplicationStyle implication = ImplicationStyle::S;
  ForallMode forall_mode = ForallMode::Mean;
  ExistsMode exists_mode = ExistsMode::GoedelMax;

  bool is_boolean() const { return family == Family::Boolean; }
  double binarize(double a) const { return a >= bool_threshold.value() ? 1.0 : 0.0; }

  double neg(double a) const;
  double conj(double a, double b) const;
  double disj(double a, double b) const;
  double impl(double a, double b) const { return impl(a, b, implication); }
  double impl(double a, double b, ImplicationStyle style) const;

  std::string describe() const;
};

TruthValue neg(TruthValue a, const LogicSystem& logic);
TruthValue conj(TruthValue a, TruthValue b, const LogicSystem& logic);
TruthValue disj(TruthValue a, TruthValue b, const LogicSystem& logic);
TruthValue impl(TruthValue a, TruthValue b, const LogicSystem& logic, ImplicationStyle style);

// Quantifier reductions. Empty input gives 1 for forall and 0 for exists.
double reduce_forall(std::span<const double> values, const LogicSystem& logic);
double reduce_exists(std::span<const double> values, const LogicSystem& logic);
TruthValue reduce_forall(std::span<const TruthValue> values, const LogicSystem& logic);
TruthValue reduce_exists(std::span<const TruthValue> values, const LogicSystem& logic);

/// Streaming form of the quantifier reductions, used by the mask kernels.
///
/// finish(n) treats the domain as having n elements of which only the added
/// ones may be nonzero; this only changes the mean modes (sum / n), since 0 is
/// neutral for every t-conorm. For forall the omitted elements would have to be
/// 1, so finish(n) with n > count() is only meaningful for exists.
class Reducer {
 public:
  Reducer(Quantifier q, const LogicSystem& logic);

  void add(double v);
  double finish() const { return finish(count_); }
  double finish(std::size_t domain_size) const;
  std::size_t count() const { return count_; }

 private:
  enum class Mode { Mean, Fold, Max };
  const LogicSystem* logic_;
  Quantifier quantifier_;
  Mode mode_ = Mode::Mean;
  double acc_ = 0.0;
  std::size_t count_ = 0;
};

/// Whether (exists x: f) == !(forall x: !f) holds for the configured pair of
/// quantifier modes, so that the simple region monitor equals !R(P).
bool quantifiers_are_dual(const LogicSystem& logic);

}  // namespace rulemon
