#pragma once

#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "rulemon/logic.hpp"
#include "rulemon/mask.hpp"
#include "rulemon/rule/ast.hpp"
#include "rulemon/scene.hpp"
#include "rulemon/spatial.hpp"

namespace rulemon::rule {

enum class ScalingPolicy { Upscale, Downscale };

std::string to_string(ScalingPolicy p);
ScalingPolicy parse_scaling_policy(std::string_view s);

struct CompileOptions {
  ScalingPolicy scaling = ScalingPolicy::Upscale;
  // Evaluate "forall q in R: F" as "forall q in P: in(q,R) -> F" (and the
  // exists analogue) instead of reducing over the pixels of R only.
  bool literal_guards = false;
  bool fuse = true;
};

struct ChannelBinding {
  std::string name;
  ChannelKind kind = ChannelKind::Mask;
  MaskShape source;
};

/// A formula whose channel names have been resolved against a scene schema
/// and whose mixed resolutions have been reconciled onto one working grid.
struct BoundFormula {
  FormulaPtr formula;
  std::optional<std::string> free_variable;
  MaskShape image;
  MaskShape working;
  std::map<std::string, ChannelBinding> channels;
  CompileOptions options;
};

/// Throws BindError for unknown channels, irreconcilable shapes and formulas
/// with subterms over more than two pixel variables.
BoundFormula bind(const FormulaPtr& f, const SceneSchema& schema, const CompileOptions& options = {});

enum class OpKind {
  LoadMask,         // channel as stored
  RasterizeBoxes,   // box channel onto a grid
  Upscale,          // bilinear
  Downscale,        // block max
  Binarize,         // >= threshold
  Denoise,          // < threshold -> 0
  Not,
  And,
  Or,
  Implies,
  Pointwise,        // fused elementwise program
  CloseToA,         // exists q in P: B(q) & CloseBy(p,q), windowed
  NeighborhoodReduce,  // quantifier over nbh(p) of a q-only body, windowed
  Reduce,           // quantifier over P or a region, to a scalar
  AllPairs,         // generic two-variable quantifier, O(#P * #Q)
};

std::string to_string(OpKind k);

/// Stack program evaluated per pixel (Pointwise) or per pixel pair (AllPairs).
struct Instr {
  enum class Op { Input, CloseBy, Not, And, Or, Implies, Binarize, Denoise };
  Op op;
  int arg = 0;        // Input: operand slot; CloseBy: params slot
  bool at_q = false;  // Input: index the operand by the inner variable
  bool swap = false;  // CloseBy: arguments given as (q, p)
  ImplicationStyle style = ImplicationStyle::S;
  double threshold = 0.0;
  friend bool operator==(const Instr&, const Instr&) = default;
};

struct PlanNode {
  OpKind op = OpKind::LoadMask;
  std::vector<int> inputs;
  bool scalar = false;          // output is a single truth value

  std::string channel;          // LoadMask, RasterizeBoxes
  MaskShape shape;              // RasterizeBoxes, Upscale, Downscale target
  double threshold = 0.0;       // Binarize, Denoise
  ImplicationStyle style = ImplicationStyle::S;
  CloseByParams closeby;        // CloseToA, NeighborhoodReduce, AllPairs domain
  Quantifier quantifier = Quantifier::ForAll;
  Domain::Kind domain = Domain::Kind::Image;  // Reduce, AllPairs
  bool include_self = true;     // neighborhood domains
  bool has_domain_mask = false; // region domain: last input is the region mask
  bool binarize_output = false; // Boolean family: open quantifier outputs
  std::vector<Instr> program;   // Pointwise, AllPairs
  std::vector<CloseByParams> program_closeby;

  SourceSpan span;
};

struct EvalPlan {
  std::vector<PlanNode> nodes;  // topologically ordered
  int output = -1;
  bool open_output = false;  // the formula has a free variable: the result is a mask
  LogicSystem logic;
  MaskShape image;
  MaskShape working;
  std::map<std::string, ChannelBinding> channels;
  std::vector<std::string> warnings;

  bool scalar_output() const { return !open_output; }
  std::string describe() const;
};

/// Compiles a bound formula into a kernel DAG.
///   * "exists q in P: B(q) & CloseBy(p,q)" becomes one close_to_a kernel
///   * quantifiers over nbh(p) with q-only bodies become windowed reductions
///   * elementwise chains are fused when options.fuse is set
///   * the Boolean family gets binarize nodes after every predicate load and
///     every open quantifier
/// Two-variable bodies that match none of the windowed patterns fall back to
/// an all-pairs node and add a warning to the plan.
EvalPlan lower(const BoundFormula& bf, const LogicSystem& logic);

/// Merges single-consumer elementwise nodes into Pointwise programs.
EvalPlan fuse(const EvalPlan& plan);

using EvalResult = std::variant<TruthMask, TruthValue>;

/// Per-node intermediate values, for inspection.
struct EvalTrace {
  std::vector<std::variant<std::monostate, TruthMask, double>> values;
};

EvalResult evaluate(const EvalPlan& plan, const SceneBundle& scene, EvalTrace* trace = nullptr);

/// Convenience: parse, bind against the scene, lower, evaluate.
EvalResult evaluate_rule(std::string_view text, const SceneBundle& scene, const LogicSystem& logic,
                         const CompileOptions& options = {});

}  // namespace rulemon::rule
