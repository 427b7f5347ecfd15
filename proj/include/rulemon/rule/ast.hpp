#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rulemon/logic.hpp"
#include "rulemon/spatial.hpp"

namespace rulemon::rule {

struct SourceSpan {
  int line = 0;
  int column = 0;
  int end_line = 0;
  int end_column = 0;
};

std::string to_string(const SourceSpan& s);

enum class NodeKind { Predicate, CloseBy, Membership, Not, And, Or, Implies, Quantified, Denoise };

/// Pixel set a quantifier ranges over.
///   Image:        every pixel of the working grid (the literal P)
///   Region:       pixels where the named channel is >= 0.5
///   Neighborhood: pixels q with CloseBy(center, q) > 0, optionally excluding
///                 the center itself
struct Domain {
  enum class Kind { Image, Region, Neighborhood };
  Kind kind = Kind::Image;
  std::string name;    // region channel
  std::string center;  // neighborhood center variable
  CloseByParams closeby;
  bool include_self = true;

  friend bool operator==(const Domain&, const Domain&) = default;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  NodeKind kind = NodeKind::Predicate;
  std::string name;                        // Predicate: channel; Membership: region channel
  std::vector<std::string> vars;           // Predicate/Membership: 1 var; CloseBy: 2 vars
  CloseByParams closeby;                   // CloseBy
  std::optional<ImplicationStyle> style;   // Implies; nullopt: use the logic's default
  Quantifier quantifier = Quantifier::ForAll;
  std::string bound;                       // Quantified
  Domain domain;                           // Quantified
  double threshold = 0.0;                  // Denoise
  std::vector<FormulaPtr> children;
  SourceSpan span;

  static FormulaPtr predicate(std::string name, std::string var, SourceSpan s = {});
  static FormulaPtr close_by(std::string p, std::string q, CloseByParams params, SourceSpan s = {});
  static FormulaPtr membership(std::string var, std::string region, SourceSpan s = {});
  static FormulaPtr negation(FormulaPtr a, SourceSpan s = {});
  static FormulaPtr conjunction(FormulaPtr a, FormulaPtr b, SourceSpan s = {});
  static FormulaPtr disjunction(FormulaPtr a, FormulaPtr b, SourceSpan s = {});
  static FormulaPtr implication(FormulaPtr a, FormulaPtr b, std::optional<ImplicationStyle> style = {},
                                SourceSpan s = {});
  static FormulaPtr quantified(Quantifier q, std::string var, Domain domain, FormulaPtr body, SourceSpan s = {});
  static FormulaPtr denoised(FormulaPtr a, double threshold, SourceSpan s = {});
};

/// Equality of everything but source spans.
bool structurally_equal(const Formula& a, const Formula& b);

std::set<std::string> free_variables(const Formula& f);

/// Every channel name the formula reads, predicates and regions alike.
std::set<std::string> referenced_channels(const Formula& f);

/// Canonical text; parse(print_formula(f)) is structurally equal to f.
std::string print_formula(const Formula& f);

/// Parses one rule. Lines starting with # are comments. Throws ParseError on
/// lexical, syntax and scoping errors (more than one free variable, a
/// variable bound twice on the same path).
FormulaPtr parse(std::string_view text);

/// Rewrites region-restricted quantifiers into the guarded whole-image form:
///   forall q in R: F  ->  forall q in P: in(q, R) -> F
///   exists q in R: F  ->  exists q in P: in(q, R) & F
FormulaPtr expand_region_guards(const FormulaPtr& f);

/// The open body F(p) of a closed rule "forall p in D: F(p)"; open formulas
/// are returned unchanged. Returns the free variable name alongside.
std::pair<FormulaPtr, std::string> open_body(const FormulaPtr& f);

}  // namespace rulemon::rule
