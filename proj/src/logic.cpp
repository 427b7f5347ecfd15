#include "rulemon/logic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "rulemon/error.hpp"

namespace rulemon {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::Lukasiewicz: return "lukasiewicz";
    case Family::Goedel: return "goedel";
    case Family::Product: return "product";
    case Family::Boolean: return "boolean";
  }
  return "?";
}

std::string to_string(ImplicationStyle s) { return s == ImplicationStyle::S ? "S" : "R"; }

std::string to_string(ForallMode m) { return m == ForallMode::Mean ? "mean" : "tnorm_reduce"; }

std::string to_string(ExistsMode m) {
  switch (m) {
    case ExistsMode::GoedelMax: return "goedel_max";
    case ExistsMode::TConormReduce: return "tconorm_reduce";
    case ExistsMode::Mean: return "mean";
  }
  return "?";
}

Family parse_family(std::string_view s) {
  const auto v = lower(s);
  if (v == "lukasiewicz" || v == "luk" || v == "l") return Family::Lukasiewicz;
  if (v == "goedel" || v == "godel" || v == "g" || v == "min") return Family::Goedel;
  if (v == "product" || v == "p" || v == "goguen") return Family::Product;
  if (v == "boolean" || v == "bool") return Family::Boolean;
  throw UsageError("unknown logic family '" + std::string(s) + "'");
}

ImplicationStyle parse_implication(std::string_view s) {
  const auto v = lower(s);
  if (v == "s" || v == "strong") return ImplicationStyle::S;
  if (v == "r" || v == "residuated" || v == "residuum") return ImplicationStyle::R;
  throw UsageError("unknown implication style '" + std::string(s) + "'");
}

ForallMode parse_forall_mode(std::string_view s) {
  const auto v = lower(s);
  if (v == "mean") return ForallMode::Mean;
  if (v == "tnorm_reduce" || v == "tnorm" || v == "fold") return ForallMode::TNormReduce;
  throw UsageError("unknown forall mode '" + std::string(s) + "'");
}

ExistsMode parse_exists_mode(std::string_view s) {
  const auto v = lower(s);
  if (v == "goedel_max" || v == "max") return ExistsMode::GoedelMax;
  if (v == "tconorm_reduce" || v == "tconorm" || v == "fold") return ExistsMode::TConormReduce;
  if (v == "mean") return ExistsMode::Mean;
  throw UsageError("unknown exists mode '" + std::string(s) + "'");
}

TruthValue::TruthValue(double v) : value_(v) {
  if (std::isnan(v) || v < 0.0 || v > 1.0) {
    throw DataError("truth value out of [0,1]: " + std::to_string(v));
  }
}

double LogicSystem::neg(double a) const {
  if (is_boolean()) return 1.0 - binarize(a);
  return 1.0 - a;
}

double LogicSystem::conj(double a, double b) const {
  switch (family) {
    case Family::Lukasiewicz: return std::max(0.0, std::min(a, b) - (1.0 - std::max(a, b)));
    case Family::Goedel: return std::min(a, b);
    case Family::Product: return a * b;
    case Family::Boolean: return binarize(a) * binarize(b);
  }
  return 0.0;
}

double LogicSystem::disj(double a, double b) const {
  switch (family) {
    case Family::Lukasiewicz: return std::min(1.0, a + b);
    case Family::Goedel: return std::max(a, b);
    case Family::Product: return std::min(1.0, a + b - a * b);
    case Family::Boolean: return std::max(binarize(a), binarize(b));
  }
  return 0.0;
}

double LogicSystem::impl(double a, double b, ImplicationStyle style) const {
  if (style == ImplicationStyle::S) return disj(neg(a), b);
  switch (family) {
    case Family::Lukasiewicz: return std::min(1.0, 1.0 - a + b);
    case Family::Goedel: return a <= b ? 1.0 : b;
    case Family::Product:
      if (a <= b) return 1.0;  // covers a == 0
      return b / a;
    case Family::Boolean: return disj(neg(a), b);
  }
  return 0.0;
}

std::string LogicSystem::describe() const {
  std::string s = to_string(family);
  if (is_boolean()) s += "(t=" + std::to_string(bool_threshold.value()) + ")";
  s += " impl=" + to_string(implication);
  s += " forall=" + to_string(forall_mode);
  s += " exists=" + to_string(exists_mode);
  return s;
}

TruthValue neg(TruthValue a, const LogicSystem& logic) { return TruthValue(logic.neg(a.value())); }

TruthValue conj(TruthValue a, TruthValue b, const LogicSystem& logic) {
  return TruthValue(logic.conj(a.value(), b.value()));
}

TruthValue disj(TruthValue a, TruthValue b, const LogicSystem& logic) {
  return TruthValue(logic.disj(a.value(), b.value()));
}

TruthValue impl(TruthValue a, TruthValue b, const LogicSystem& logic, ImplicationStyle style) {
  return TruthValue(logic.impl(a.value(), b.value(), style));
}

Reducer::Reducer(Quantifier q, const LogicSystem& logic) : logic_(&logic), quantifier_(q) {
  if (q == Quantifier::ForAll) {
    mode_ = logic.forall_mode == ForallMode::Mean ? Mode::Mean : Mode::Fold;
    acc_ = mode_ == Mode::Mean ? 0.0 : 1.0;
  } else {
    switch (logic.exists_mode) {
      case ExistsMode::Mean: mode_ = Mode::Mean; break;
      case ExistsMode::GoedelMax: mode_ = Mode::Max; break;
      case ExistsMode::TConormReduce: mode_ = Mode::Fold; break;
    }
    acc_ = 0.0;
  }
}

void Reducer::add(double v) {
  switch (mode_) {
    case Mode::Mean: acc_ += v; break;
    case Mode::Max: acc_ = std::max(acc_, v); break;
    case Mode::Fold:
      acc_ = quantifier_ == Quantifier::ForAll ? logic_->conj(acc_, v) : logic_->disj(acc_, v);
      break;
  }
  ++count_;
}

double Reducer::finish(std::size_t domain_size) const {
  if (mode_ == Mode::Mean) {
    if (domain_size == 0) return quantifier_ == Quantifier::ForAll ? 1.0 : 0.0;
    return std::clamp(acc_ / static_cast<double>(domain_size), 0.0, 1.0);
  }
  return acc_;
}

double reduce_forall(std::span<const double> values, const LogicSystem& logic) {
  Reducer r(Quantifier::ForAll, logic);
  for (double v : values) r.add(v);
  return r.finish();
}

double reduce_exists(std::span<const double> values, const LogicSystem& logic) {
  Reducer r(Quantifier::Exists, logic);
  for (double v : values) r.add(v);
  return r.finish();
}

TruthValue reduce_forall(std::span<const TruthValue> values, const LogicSystem& logic) {
  Reducer r(Quantifier::ForAll, logic);
  for (auto v : values) r.add(v.value());
  return TruthValue(r.finish());
}

TruthValue reduce_exists(std::span<const TruthValue> values, const LogicSystem& logic) {
  Reducer r(Quantifier::Exists, logic);
  for (auto v : values) r.add(v.value());
  return TruthValue(r.finish());
}

bool quantifiers_are_dual(const LogicSystem& logic) {
  const bool fold_pair = logic.forall_mode == ForallMode::TNormReduce &&
                         logic.exists_mode == ExistsMode::TConormReduce;
  if (logic.is_boolean()) return fold_pair;
  if (fold_pair) return true;
  if (logic.forall_mode == ForallMode::Mean && logic.exists_mode == ExistsMode::Mean) return true;
  // max is the t-conorm of Goedel logic, so it dualizes the min-fold there.
  return logic.family == Family::Goedel && logic.forall_mode == ForallMode::TNormReduce &&
         logic.exists_mode == ExistsMode::GoedelMax;
}

}  // namespace rulemon
