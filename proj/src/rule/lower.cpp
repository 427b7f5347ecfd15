#include <algorithm>
#include <map>
#include <sstream>

#include "rulemon/error.hpp"
#include "rulemon/rule/plan.hpp"

namespace rulemon::rule {

std::string to_string(OpKind k) {
  switch (k) {
    case OpKind::LoadMask: return "load";
    case OpKind::RasterizeBoxes: return "rasterize";
    case OpKind::Upscale: return "upscale";
    case OpKind::Downscale: return "downscale";
    case OpKind::Binarize: return "binarize";
    case OpKind::Denoise: return "denoise";
    case OpKind::Not: return "not";
    case OpKind::And: return "and";
    case OpKind::Or: return "or";
    case OpKind::Implies: return "implies";
    case OpKind::Pointwise: return "pointwise";
    case OpKind::CloseToA: return "close_to_a";
    case OpKind::NeighborhoodReduce: return "nbh_reduce";
    case OpKind::Reduce: return "reduce";
    case OpKind::AllPairs: return "all_pairs";
  }
  return "?";
}

namespace {

std::string program_text(const std::vector<Instr>& prog, const std::vector<CloseByParams>& cb) {
  std::ostringstream os;
  for (const auto& in : prog) {
    switch (in.op) {
      case Instr::Op::Input: os << (in.at_q ? "q$" : "p$") << in.arg; break;
      case Instr::Op::CloseBy: os << "cb" << (in.swap ? "'" : "") << "[" << cb[static_cast<std::size_t>(in.arg)].describe() << "]"; break;
      case Instr::Op::Not: os << "!"; break;
      case Instr::Op::And: os << "&"; break;
      case Instr::Op::Or: os << "|"; break;
      case Instr::Op::Implies: os << "->" << to_string(in.style); break;
      case Instr::Op::Binarize: os << ">=" << in.threshold; break;
      case Instr::Op::Denoise: os << "dn" << in.threshold; break;
    }
    os << ' ';
  }
  return os.str();
}

std::string quant_text(Quantifier q) { return q == Quantifier::ForAll ? "forall" : "exists"; }

std::string node_text(const PlanNode& n) {
  std::ostringstream os;
  os << to_string(n.op);
  switch (n.op) {
    case OpKind::LoadMask: os << "(" << n.channel << ")"; break;
    case OpKind::RasterizeBoxes: os << "(" << n.channel << " @ " << to_string(n.shape) << ")"; break;
    case OpKind::Upscale:
    case OpKind::Downscale: os << "(" << to_string(n.shape) << ")"; break;
    case OpKind::Binarize:
    case OpKind::Denoise: os << "(t=" << n.threshold << ")"; break;
    case OpKind::Implies: os << "(" << to_string(n.style) << ")"; break;
    case OpKind::Pointwise: os << "[" << program_text(n.program, n.program_closeby) << "]"; break;
    case OpKind::CloseToA: os << "(" << n.closeby.describe() << ")"; break;
    case OpKind::NeighborhoodReduce:
      os << "(" << quant_text(n.quantifier) << ", " << n.closeby.describe() << (n.include_self ? "" : ", no self")
         << ")";
      break;
    case OpKind::Reduce: os << "(" << quant_text(n.quantifier) << (n.has_domain_mask ? ", region" : "") << ")"; break;
    case OpKind::AllPairs:
      os << "(" << quant_text(n.quantifier) << ", domain=";
      if (n.domain == Domain::Kind::Neighborhood) {
        os << "nbh " << n.closeby.describe() << (n.include_self ? "" : " no self");
      } else {
        os << (n.domain == Domain::Kind::Region ? "region" : "P");
      }
      os << ") [" << program_text(n.program, n.program_closeby) << "]";
      break;
    case OpKind::Not:
    case OpKind::And:
    case OpKind::Or: break;
  }
  if (n.binarize_output) os << " +binarize";
  return os.str();
}

std::string node_key(const PlanNode& n) {
  std::ostringstream os;
  os << node_text(n) << " <-";
  for (int i : n.inputs) os << ' ' << i;
  return os.str();
}

bool elementwise(OpKind k) {
  switch (k) {
    case OpKind::Binarize:
    case OpKind::Denoise:
    case OpKind::Not:
    case OpKind::And:
    case OpKind::Or:
    case OpKind::Implies:
    case OpKind::Pointwise: return true;
    default: return false;
  }
}

class Lowerer {
 public:
  Lowerer(const BoundFormula& bf, const LogicSystem& logic) : bf_(bf) {
    plan_.logic = logic;
    plan_.image = bf.image;
    plan_.working = bf.working;
    plan_.channels = bf.channels;
  }

  EvalPlan run() {
    plan_.output = lower(*bf_.formula);
    plan_.open_output = bf_.free_variable.has_value();
    return std::move(plan_);
  }

 private:
  const LogicSystem& logic() const { return plan_.logic; }

  const std::set<std::string>& fv(const Formula& f) {
    auto it = fv_.find(&f);
    if (it == fv_.end()) it = fv_.emplace(&f, free_variables(f)).first;
    return it->second;
  }

  int add(PlanNode n) {
    if (n.op != OpKind::LoadMask && n.op != OpKind::RasterizeBoxes) {
      n.scalar = !n.inputs.empty() && std::all_of(n.inputs.begin(), n.inputs.end(), [&](int i) {
        return plan_.nodes[static_cast<std::size_t>(i)].scalar;
      });
      if (n.op == OpKind::Reduce) n.scalar = true;
      if (n.op == OpKind::CloseToA || n.op == OpKind::NeighborhoodReduce || n.op == OpKind::AllPairs) {
        n.scalar = false;
      }
      if (n.op == OpKind::Pointwise && n.inputs.empty()) n.scalar = true;
    }
    const auto key = node_key(n);
    if (const auto it = cse_.find(key); it != cse_.end()) return it->second;
    plan_.nodes.push_back(std::move(n));
    const int id = static_cast<int>(plan_.nodes.size()) - 1;
    cse_.emplace(key, id);
    return id;
  }

  int channel_mask(const std::string& name, SourceSpan span) {
    const auto& ch = bf_.channels.at(name);
    PlanNode n;
    n.channel = name;
    n.span = span;
    int id;
    if (ch.kind == ChannelKind::Mask) {
      n.op = OpKind::LoadMask;
      n.shape = ch.source;
      id = add(n);
    } else {
      n.op = OpKind::RasterizeBoxes;
      n.shape = bf_.options.scaling == ScalingPolicy::Upscale ? bf_.working : bf_.image;
      id = add(n);
    }
    const MaskShape have = plan_.nodes[static_cast<std::size_t>(id)].shape;
    if (!(have == bf_.working)) {
      PlanNode s;
      s.op = bf_.options.scaling == ScalingPolicy::Upscale ? OpKind::Upscale : OpKind::Downscale;
      s.shape = bf_.working;
      s.inputs = {id};
      s.span = span;
      id = add(s);
    }
    return id;
  }

  int binarize(int input, double t, SourceSpan span) {
    PlanNode n;
    n.op = OpKind::Binarize;
    n.threshold = t;
    n.inputs = {input};
    n.span = span;
    return add(n);
  }

  int lower(const Formula& f) {
    switch (f.kind) {
      case NodeKind::Predicate: {
        const int id = channel_mask(f.name, f.span);
        return logic().is_boolean() ? binarize(id, logic().bool_threshold.value(), f.span) : id;
      }
      case NodeKind::Membership: return binarize(channel_mask(f.name, f.span), 0.5, f.span);
      case NodeKind::CloseBy: {
        // closeby(p, p): the weight at distance zero.
        PlanNode n;
        n.op = OpKind::Pointwise;
        n.program_closeby = {f.closeby};
        n.program = {Instr{Instr::Op::CloseBy, 0, false, false, ImplicationStyle::S, 0.0}};
        n.span = f.span;
        return add(n);
      }
      case NodeKind::Not:
      case NodeKind::And:
      case NodeKind::Or:
      case NodeKind::Implies:
      case NodeKind::Denoise: {
        PlanNode n;
        n.op = f.kind == NodeKind::Not      ? OpKind::Not
               : f.kind == NodeKind::And    ? OpKind::And
               : f.kind == NodeKind::Or     ? OpKind::Or
               : f.kind == NodeKind::Denoise ? OpKind::Denoise
                                             : OpKind::Implies;
        for (const auto& c : f.children) n.inputs.push_back(lower(*c));
        n.style = f.style.value_or(logic().implication);
        n.threshold = f.threshold;
        n.span = f.span;
        return add(n);
      }
      case NodeKind::Quantified: return lower_quantifier(f);
    }
    throw BindError("unsupported formula node");
  }

  int region_mask(const Domain& d, SourceSpan span) { return binarize(channel_mask(d.name, span), 0.5, span); }

  int lower_quantifier(const Formula& f) {
    const Formula& body = *f.children[0];
    const auto& body_vars = fv(body);
    std::set<std::string> others = body_vars;
    others.erase(f.bound);
    const bool windowed_domain = f.domain.kind == Domain::Kind::Neighborhood;

    if (others.empty()) {
      const int b = lower(body);
      if (windowed_domain) {
        if (!f.domain.closeby.bounded()) {
          return all_pairs(f, f.domain.center, "neighbourhood with unbounded closeby support");
        }
        PlanNode n;
        n.op = OpKind::NeighborhoodReduce;
        n.quantifier = f.quantifier;
        n.closeby = f.domain.closeby;
        n.include_self = f.domain.include_self;
        n.inputs = {b};
        n.binarize_output = logic().is_boolean();
        n.span = f.span;
        return add(n);
      }
      PlanNode n;
      n.op = OpKind::Reduce;
      n.quantifier = f.quantifier;
      n.domain = f.domain.kind;
      n.inputs = {b};
      if (f.domain.kind == Domain::Kind::Region) {
        n.inputs.push_back(region_mask(f.domain, f.span));
        n.has_domain_mask = true;
      }
      n.span = f.span;
      return add(n);
    }

    if (others.size() > 1 || (windowed_domain && *others.begin() != f.domain.center)) {
      throw BindError("quantifier at " + to_string(f.span) + " ranges over more than two pixel variables");
    }
    const std::string p = *others.begin();

    if (f.domain.kind == Domain::Kind::Image && f.quantifier == Quantifier::Exists) {
      if (auto id = close_to_a_pattern(f, p)) return *id;
    }
    const char* reason = windowed_domain ? "body depends on the neighbourhood center"
                         : f.domain.kind == Domain::Kind::Region ? "two-variable body over a region domain"
                                                                 : "two-variable body matches no windowed pattern";
    return all_pairs(f, p, reason);
  }

  static void flatten_and(const FormulaPtr& f, std::vector<FormulaPtr>& out) {
    if (f->kind == NodeKind::And) {
      flatten_and(f->children[0], out);
      flatten_and(f->children[1], out);
    } else {
      out.push_back(f);
    }
  }

  // exists q in P: X1(q) & ... & CloseBy(p,q) & ... & Xn(q)
  std::optional<int> close_to_a_pattern(const Formula& f, const std::string& p) {
    const std::string& q = f.bound;
    std::vector<FormulaPtr> factors;
    flatten_and(f.children[0], factors);
    const Formula* closeby = nullptr;
    std::vector<FormulaPtr> rest;
    for (const auto& x : factors) {
      const bool is_cb = x->kind == NodeKind::CloseBy &&
                         ((x->vars[0] == p && x->vars[1] == q) || (x->vars[0] == q && x->vars[1] == p));
      if (is_cb && !closeby) {
        closeby = x.get();
        continue;
      }
      const auto& v = fv(*x);
      if (v.count(p)) return std::nullopt;
      rest.push_back(x);
    }
    if (!closeby || rest.empty()) return std::nullopt;
    FormulaPtr b = rest[0];
    for (std::size_t i = 1; i < rest.size(); ++i) b = Formula::conjunction(b, rest[i], rest[i]->span);
    keep_.push_back(b);
    if (fv(*b).empty()) return std::nullopt;
    if (!closeby->closeby.bounded()) {
      plan_.warnings.push_back("closeby at " + to_string(closeby->span) +
                               " has unbounded support; windowed lowering refused");
      return all_pairs(f, p, "unbounded closeby support");
    }
    const int bid = lower(*b);
    if (closeby->closeby.kind == CloseByKind::Trivial && logic().exists_mode != ExistsMode::Mean) {
      return bid;
    }
    PlanNode n;
    n.op = OpKind::CloseToA;
    n.closeby = closeby->closeby;
    n.inputs = {bid};
    n.binarize_output = logic().is_boolean();
    n.span = f.span;
    return add(n);
  }

  struct ProgramBuilder {
    std::vector<Instr> program;
    std::vector<CloseByParams> closeby;
    std::vector<int> inputs;

    int slot(int node) {
      const auto it = std::find(inputs.begin(), inputs.end(), node);
      if (it != inputs.end()) return static_cast<int>(it - inputs.begin());
      inputs.push_back(node);
      return static_cast<int>(inputs.size()) - 1;
    }
  };

  void compile_pair(const Formula& f, const std::string& p, const std::string& q, ProgramBuilder& pb) {
    const auto& v = fv(f);
    const bool has_p = v.count(p) > 0;
    const bool has_q = v.count(q) > 0;
    if (!(has_p && has_q)) {
      const int node = lower(f);
      Instr in{Instr::Op::Input, pb.slot(node), has_q, false, ImplicationStyle::S, 0.0};
      pb.program.push_back(in);
      return;
    }
    Instr in{Instr::Op::Not, 0, false, false, ImplicationStyle::S, 0.0};
    switch (f.kind) {
      case NodeKind::CloseBy:
        in.op = Instr::Op::CloseBy;
        in.arg = static_cast<int>(pb.closeby.size());
        in.swap = f.vars[0] == q;
        pb.closeby.push_back(f.closeby);
        pb.program.push_back(in);
        return;
      case NodeKind::Not: in.op = Instr::Op::Not; break;
      case NodeKind::And: in.op = Instr::Op::And; break;
      case NodeKind::Or: in.op = Instr::Op::Or; break;
      case NodeKind::Implies:
        in.op = Instr::Op::Implies;
        in.style = f.style.value_or(logic().implication);
        break;
      case NodeKind::Denoise:
        in.op = Instr::Op::Denoise;
        in.threshold = f.threshold;
        break;
      default:
        throw BindError("subformula at " + to_string(f.span) + " ranges over more than two pixel variables");
    }
    for (const auto& c : f.children) compile_pair(*c, p, q, pb);
    pb.program.push_back(in);
  }

  int all_pairs(const Formula& f, const std::string& p, const std::string& reason) {
    ProgramBuilder pb;
    compile_pair(*f.children[0], p, f.bound, pb);
    PlanNode n;
    n.op = OpKind::AllPairs;
    n.quantifier = f.quantifier;
    n.domain = f.domain.kind;
    n.closeby = f.domain.closeby;
    n.include_self = f.domain.include_self;
    n.program = std::move(pb.program);
    n.program_closeby = std::move(pb.closeby);
    n.inputs = std::move(pb.inputs);
    if (f.domain.kind == Domain::Kind::Region) {
      n.inputs.push_back(region_mask(f.domain, f.span));
      n.has_domain_mask = true;
    }
    n.binarize_output = logic().is_boolean();
    n.span = f.span;
    plan_.warnings.push_back("quantifier at " + to_string(f.span) + " evaluated over all pixel pairs (" + reason +
                             "); cost grows with the square of the pixel count");
    return add(n);
  }

  const BoundFormula& bf_;
  EvalPlan plan_;
  std::map<std::string, int> cse_;
  std::map<const Formula*, std::set<std::string>> fv_;
  std::vector<FormulaPtr> keep_;  // synthesized subformulas referenced by fv_
};

}  // namespace

EvalPlan lower(const BoundFormula& bf, const LogicSystem& logic) {
  EvalPlan plan = Lowerer(bf, logic).run();
  return bf.options.fuse ? fuse(plan) : plan;
}

// ---------------------------------------------------------------------------
// Fusion

namespace {

struct Expanded {
  std::vector<Instr> program;
  std::vector<CloseByParams> closeby;
  std::vector<int> leaves;  // old node ids
};

Instr primitive(const PlanNode& n) {
  Instr in{Instr::Op::Not, 0, false, false, n.style, n.threshold};
  switch (n.op) {
    case OpKind::Not: in.op = Instr::Op::Not; break;
    case OpKind::And: in.op = Instr::Op::And; break;
    case OpKind::Or: in.op = Instr::Op::Or; break;
    case OpKind::Implies: in.op = Instr::Op::Implies; break;
    case OpKind::Binarize: in.op = Instr::Op::Binarize; break;
    case OpKind::Denoise: in.op = Instr::Op::Denoise; break;
    default: break;
  }
  return in;
}

int leaf_slot(Expanded& e, int node) {
  const auto it = std::find(e.leaves.begin(), e.leaves.end(), node);
  if (it != e.leaves.end()) return static_cast<int>(it - e.leaves.begin());
  e.leaves.push_back(node);
  return static_cast<int>(e.leaves.size()) - 1;
}

void expand(const EvalPlan& plan, int id, const std::vector<int>& consumers, Expanded& out, bool root) {
  const auto& n = plan.nodes[static_cast<std::size_t>(id)];
  const bool inline_me = root || (elementwise(n.op) && consumers[static_cast<std::size_t>(id)] == 1 &&
                                  id != plan.output);
  if (!inline_me) {
    out.program.push_back(Instr{Instr::Op::Input, leaf_slot(out, id), false, false, ImplicationStyle::S, 0.0});
    return;
  }
  if (n.op == OpKind::Pointwise) {
    const int cb_base = static_cast<int>(out.closeby.size());
    out.closeby.insert(out.closeby.end(), n.program_closeby.begin(), n.program_closeby.end());
    for (Instr in : n.program) {
      if (in.op == Instr::Op::Input) {
        expand(plan, n.inputs[static_cast<std::size_t>(in.arg)], consumers, out, false);
        continue;
      }
      if (in.op == Instr::Op::CloseBy) in.arg += cb_base;
      out.program.push_back(in);
    }
    return;
  }
  for (int i : n.inputs) expand(plan, i, consumers, out, false);
  out.program.push_back(primitive(n));
}

}  // namespace

EvalPlan fuse(const EvalPlan& plan) {
  const std::size_t n = plan.nodes.size();
  std::vector<int> consumers(n, 0);
  for (const auto& node : plan.nodes)
    for (int i : node.inputs) ++consumers[static_cast<std::size_t>(i)];

  // A node disappears when it is elementwise, feeds exactly one elementwise
  // consumer and is not the output.
  std::vector<bool> absorbed(n, false);
  for (const auto& node : plan.nodes) {
    if (!elementwise(node.op)) continue;
    for (int i : node.inputs) {
      const auto& in = plan.nodes[static_cast<std::size_t>(i)];
      if (elementwise(in.op) && consumers[static_cast<std::size_t>(i)] == 1 && i != plan.output) {
        absorbed[static_cast<std::size_t>(i)] = true;
      }
    }
  }

  EvalPlan out;
  out.logic = plan.logic;
  out.image = plan.image;
  out.working = plan.working;
  out.channels = plan.channels;
  out.warnings = plan.warnings;
  out.open_output = plan.open_output;
  std::vector<int> remap(n, -1);
  for (std::size_t id = 0; id < n; ++id) {
    if (absorbed[id]) continue;
    PlanNode node = plan.nodes[id];
    if (elementwise(node.op)) {
      Expanded e;
      expand(plan, static_cast<int>(id), consumers, e, true);
      node.op = OpKind::Pointwise;
      node.program = std::move(e.program);
      node.program_closeby = std::move(e.closeby);
      node.inputs = std::move(e.leaves);
    }
    for (int& i : node.inputs) i = remap[static_cast<std::size_t>(i)];
    out.nodes.push_back(std::move(node));
    remap[id] = static_cast<int>(out.nodes.size()) - 1;
  }
  out.output = remap[static_cast<std::size_t>(plan.output)];
  return out;
}

std::string EvalPlan::describe() const {
  std::ostringstream os;
  os << "working grid " << to_string(working) << ", image " << to_string(image) << ", " << logic.describe() << "\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    os << (static_cast<int>(i) == output ? "=> " : "   ") << "#" << i << " " << node_text(n);
    if (!n.inputs.empty()) {
      os << " <-";
      for (int in : n.inputs) os << " #" << in;
    }
    os << (n.scalar ? " : scalar" : " : mask") << "  @" << to_string(n.span) << "\n";
  }
  for (const auto& w : warnings) os << "warning: " << w << "\n";
  return os.str();
}

}  // namespace rulemon::rule
