#include "rulemon/rule/ast.hpp"

#include <charconv>
#include <sstream>

#include "rulemon/error.hpp"

namespace rulemon::rule {

std::string to_string(const SourceSpan& s) {
  return std::to_string(s.line) + ":" + std::to_string(s.column) + "-" + std::to_string(s.end_line) + ":" +
         std::to_string(s.end_column);
}

namespace {

FormulaPtr make(Formula f) { return std::make_shared<const Formula>(std::move(f)); }

}  // namespace

FormulaPtr Formula::predicate(std::string name, std::string var, SourceSpan s) {
  Formula f;
  f.kind = NodeKind::Predicate;
  f.name = std::move(name);
  f.vars = {std::move(var)};
  f.span = s;
  return make(std::move(f));
}

FormulaPtr Formula::close_by(std::string p, std::string q, CloseByParams params, SourceSpan s) {
  Formula f;
  f.kind = NodeKind::CloseBy;
  f.vars = {std::move(p), std::move(q)};
  f.closeby = params;
  f.span = s;
  return make(std::move(f));
}

FormulaPtr Formula::membership(std::string var, std::string region, SourceSpan s) {
  Formula f;
  f.kind = NodeKind::Membership;
  f.name = std::move(region);
  f.vars = {std::move(var)};
  f.span = s;
  return make(std::move(f));
}

FormulaPtr Formula::negation(FormulaPtr a, SourceSpan s) {
  Formula f;
  f.kind = NodeKind::Not;
  f.children = {std::move(a)};
  f.span = s;
  return make(std::move(f));
}

FormulaPtr Formula::conjunction(FormulaPtr a, FormulaPtr b, SourceSpan s) {
  Formula f;
  f.kind = NodeKind::And;
  f.children = {std::move(a), std::move(b)};
  f.span = s;
  return make(std::move(f));
}

FormulaPtr Formula::disjunction(FormulaPtr a, FormulaPtr b, SourceSpan s) {
  Formula f;
  f.kind = NodeKind::Or;
  f.children = {std::move(a), std::move(b)};
  f.span = s;
  return make(std::move(f));
}

FormulaPtr Formula::implication(FormulaPtr a, FormulaPtr b, std::optional<ImplicationStyle> style, SourceSpan s) {
  Formula f;
  f.kind = NodeKind::Implies;
  f.children = {std::move(a), std::move(b)};
  f.style = style;
  f.span = s;
  return make(std::move(f));
}

FormulaPtr Formula::quantified(Quantifier q, std::string var, Domain domain, FormulaPtr body, SourceSpan s) {
  Formula f;
  f.kind = NodeKind::Quantified;
  f.quantifier = q;
  f.bound = std::move(var);
  f.domain = std::move(domain);
  f.children = {std::move(body)};
  f.span = s;
  return make(std::move(f));
}

FormulaPtr Formula::denoised(FormulaPtr a, double threshold, SourceSpan s) {
  Formula f;
  f.kind = NodeKind::Denoise;
  f.threshold = threshold;
  f.children = {std::move(a)};
  f.span = s;
  return make(std::move(f));
}

bool structurally_equal(const Formula& a, const Formula& b) {
  if (a.kind != b.kind || a.children.size() != b.children.size()) return false;
  switch (a.kind) {
    case NodeKind::Predicate:
    case NodeKind::Membership:
      if (a.name != b.name || a.vars != b.vars) return false;
      break;
    case NodeKind::CloseBy:
      if (a.vars != b.vars || !(a.closeby == b.closeby)) return false;
      break;
    case NodeKind::Implies:
      if (a.style != b.style) return false;
      break;
    case NodeKind::Quantified:
      if (a.quantifier != b.quantifier || a.bound != b.bound || !(a.domain == b.domain)) return false;
      break;
    case NodeKind::Denoise:
      if (a.threshold != b.threshold) return false;
      break;
    case NodeKind::Not:
    case NodeKind::And:
    case NodeKind::Or:
      break;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!structurally_equal(*a.children[i], *b.children[i])) return false;
  }
  return true;
}

std::set<std::string> free_variables(const Formula& f) {
  switch (f.kind) {
    case NodeKind::Predicate:
    case NodeKind::Membership:
    case NodeKind::CloseBy:
      return {f.vars.begin(), f.vars.end()};
    case NodeKind::Quantified: {
      auto body = free_variables(*f.children[0]);
      body.erase(f.bound);
      if (f.domain.kind == Domain::Kind::Neighborhood) body.insert(f.domain.center);
      return body;
    }
    default: {
      std::set<std::string> out;
      for (const auto& c : f.children) {
        auto s = free_variables(*c);
        out.insert(s.begin(), s.end());
      }
      return out;
    }
  }
}

std::set<std::string> referenced_channels(const Formula& f) {
  std::set<std::string> out;
  if (f.kind == NodeKind::Predicate || f.kind == NodeKind::Membership) out.insert(f.name);
  if (f.kind == NodeKind::Quantified && f.domain.kind == Domain::Kind::Region) out.insert(f.domain.name);
  for (const auto& c : f.children) {
    auto s = referenced_channels(*c);
    out.insert(s.begin(), s.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Printer

namespace {

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string closeby_params(const CloseByParams& p) {
  switch (p.kind) {
    case CloseByKind::Trivial: return "";
    case CloseByKind::Gaussian: {
      std::string s = ", sigma=" + number(p.sigma);
      if (p.radius) s += ", r=" + std::to_string(*p.radius);
      if (p.low_cut != 0.1) s += ", cut=" + number(p.low_cut);
      return s;
    }
    case CloseByKind::L1Window: return ", r=" + std::to_string(*p.radius);
    case CloseByKind::SquareWindow: return ", window=" + std::to_string(2 * *p.radius + 1);
  }
  return "";
}

// Syntactic positions, loosest first.
enum class Ctx { Formula, OrOperand, AndOperand, Unary };

void print(const Formula& f, Ctx ctx, std::string& out);

void print_domain(const Domain& d, std::string& out) {
  switch (d.kind) {
    case Domain::Kind::Image: out += "P"; break;
    case Domain::Kind::Region: out += d.name; break;
    case Domain::Kind::Neighborhood:
      out += "nbh(" + d.center + closeby_params(d.closeby);
      if (!d.include_self) out += ", self=0";
      out += ")";
      break;
  }
}

void print(const Formula& f, Ctx ctx, std::string& out) {
  const auto open = [&](bool need) {
    if (need) out += "(";
    return need;
  };
  switch (f.kind) {
    case NodeKind::Predicate: out += f.name + "(" + f.vars[0] + ")"; return;
    case NodeKind::Membership: out += "in(" + f.vars[0] + ", " + f.name + ")"; return;
    case NodeKind::CloseBy:
      out += "closeby(" + f.vars[0] + ", " + f.vars[1] + closeby_params(f.closeby) + ")";
      return;
    case NodeKind::Denoise:
      out += "denoise(";
      print(*f.children[0], Ctx::Formula, out);
      out += ", t=" + number(f.threshold) + ")";
      return;
    case NodeKind::Not:
      out += "!";
      print(*f.children[0], Ctx::Unary, out);
      return;
    case NodeKind::And: {
      const bool p = open(ctx == Ctx::Unary);
      print(*f.children[0], Ctx::AndOperand, out);
      out += " & ";
      print(*f.children[1], Ctx::Unary, out);
      if (p) out += ")";
      return;
    }
    case NodeKind::Or: {
      const bool p = open(ctx == Ctx::Unary || ctx == Ctx::AndOperand);
      print(*f.children[0], Ctx::OrOperand, out);
      out += " | ";
      print(*f.children[1], Ctx::AndOperand, out);
      if (p) out += ")";
      return;
    }
    case NodeKind::Implies: {
      const bool p = open(ctx != Ctx::Formula);
      print(*f.children[0], Ctx::OrOperand, out);
      out += " ->";
      if (f.style) out += *f.style == ImplicationStyle::S ? "[S]" : "[R]";
      out += " ";
      print(*f.children[1], Ctx::Formula, out);
      if (p) out += ")";
      return;
    }
    case NodeKind::Quantified: {
      const bool p = open(ctx != Ctx::Formula);
      out += f.quantifier == Quantifier::ForAll ? "forall " : "exists ";
      out += f.bound + " in ";
      print_domain(f.domain, out);
      out += ": ";
      print(*f.children[0], Ctx::Formula, out);
      if (p) out += ")";
      return;
    }
  }
}

}  // namespace

std::string print_formula(const Formula& f) {
  std::string out;
  print(f, Ctx::Formula, out);
  return out;
}

FormulaPtr expand_region_guards(const FormulaPtr& f) {
  std::vector<FormulaPtr> kids;
  bool changed = false;
  for (const auto& c : f->children) {
    kids.push_back(expand_region_guards(c));
    changed |= kids.back() != c;
  }
  if (f->kind == NodeKind::Quantified && f->domain.kind == Domain::Kind::Region) {
    const auto guard = Formula::membership(f->bound, f->domain.name, f->span);
    const auto body = f->quantifier == Quantifier::ForAll
                          ? Formula::implication(guard, kids[0], std::nullopt, f->span)
                          : Formula::conjunction(guard, kids[0], f->span);
    return Formula::quantified(f->quantifier, f->bound, Domain{}, body, f->span);
  }
  if (!changed) return f;
  Formula copy = *f;
  copy.children = std::move(kids);
  return make(std::move(copy));
}

std::pair<FormulaPtr, std::string> open_body(const FormulaPtr& f) {
  const auto fv = free_variables(*f);
  if (!fv.empty()) return {f, *fv.begin()};
  if (f->kind != NodeKind::Quantified || f->quantifier != Quantifier::ForAll ||
      f->domain.kind == Domain::Kind::Neighborhood) {
    throw UsageError("rule is closed and not of the form 'forall p in D: F(p)'; no pixel-wise body");
  }
  const auto& body = f->children[0];
  if (f->domain.kind == Domain::Kind::Region) {
    return {Formula::implication(Formula::membership(f->bound, f->domain.name, f->span), body, std::nullopt,
                                 f->span),
            f->bound};
  }
  return {body, f->bound};
}

}  // namespace rulemon::rule
