#include <algorithm>
#include <cmath>

#include "rulemon/error.hpp"
#include "rulemon/rule/plan.hpp"

namespace rulemon::rule {
namespace {

using Slot = std::variant<std::monostate, TruthMask, double>;

// An operand of a program: either a mask over the working grid or a constant.
struct Operand {
  const double* data = nullptr;
  double constant = 0.0;
  double at(std::size_t i) const { return data ? data[i] : constant; }
};

Operand operand(const Slot& s) {
  if (const auto* m = std::get_if<TruthMask>(&s)) return {m->values().data(), 0.0};
  return {nullptr, std::get<double>(s)};
}

class Machine {
 public:
  Machine(const std::vector<Instr>& prog, const std::vector<CloseByParams>& cb, const LogicSystem& logic)
      : prog_(prog), cb_(cb), logic_(logic) {
    int depth = 0, max_depth = 0;
    for (const auto& in : prog) {
      if (in.op == Instr::Op::Input || in.op == Instr::Op::CloseBy) {
        max_depth = std::max(max_depth, ++depth);
      } else if (in.op == Instr::Op::And || in.op == Instr::Op::Or || in.op == Instr::Op::Implies) {
        --depth;
      }
    }
    stack_.resize(static_cast<std::size_t>(std::max(max_depth, 1)));
  }

  // p, q: flat pixel indices; (pr,pc), (qr,qc) their coordinates.
  double run(const std::vector<Operand>& ops, std::size_t p, std::size_t q, int pr, int pc, int qr, int qc) {
    std::size_t sp = 0;
    double* st = stack_.data();
    for (const auto& in : prog_) {
      switch (in.op) {
        case Instr::Op::Input: st[sp++] = ops[static_cast<std::size_t>(in.arg)].at(in.at_q ? q : p); break;
        case Instr::Op::CloseBy: {
          const auto& params = cb_[static_cast<std::size_t>(in.arg)];
          st[sp++] = in.swap ? params.weight(pr - qr, pc - qc) : params.weight(qr - pr, qc - pc);
          break;
        }
        case Instr::Op::Not: st[sp - 1] = logic_.neg(st[sp - 1]); break;
        case Instr::Op::Binarize: st[sp - 1] = st[sp - 1] >= in.threshold ? 1.0 : 0.0; break;
        case Instr::Op::Denoise: st[sp - 1] = st[sp - 1] < in.threshold ? 0.0 : st[sp - 1]; break;
        case Instr::Op::And:
          --sp;
          st[sp - 1] = logic_.conj(st[sp - 1], st[sp]);
          break;
        case Instr::Op::Or:
          --sp;
          st[sp - 1] = logic_.disj(st[sp - 1], st[sp]);
          break;
        case Instr::Op::Implies:
          --sp;
          st[sp - 1] = logic_.impl(st[sp - 1], st[sp], in.style);
          break;
      }
    }
    return st[0];
  }

 private:
  const std::vector<Instr>& prog_;
  const std::vector<CloseByParams>& cb_;
  const LogicSystem& logic_;
  std::vector<double> stack_;
};

std::vector<Instr> primitive_program(const PlanNode& n) {
  std::vector<Instr> prog;
  for (std::size_t i = 0; i < n.inputs.size(); ++i) {
    prog.push_back(Instr{Instr::Op::Input, static_cast<int>(i), false, false, ImplicationStyle::S, 0.0});
  }
  Instr in{Instr::Op::Not, 0, false, false, n.style, n.threshold};
  switch (n.op) {
    case OpKind::Not: in.op = Instr::Op::Not; break;
    case OpKind::And: in.op = Instr::Op::And; break;
    case OpKind::Or: in.op = Instr::Op::Or; break;
    case OpKind::Implies: in.op = Instr::Op::Implies; break;
    case OpKind::Binarize: in.op = Instr::Op::Binarize; break;
    case OpKind::Denoise: in.op = Instr::Op::Denoise; break;
    default: throw NumericError("internal: not an elementwise node");
  }
  prog.push_back(in);
  return prog;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

class Evaluator {
 public:
  Evaluator(const EvalPlan& plan, const SceneBundle& scene) : plan_(plan), scene_(scene) {
    vals_.resize(plan.nodes.size());
  }

  Slot& run() {
    for (std::size_t i = 0; i < plan_.nodes.size(); ++i) vals_[i] = eval(plan_.nodes[i]);
    return vals_[static_cast<std::size_t>(plan_.output)];
  }

  std::vector<Slot>& values() { return vals_; }

 private:
  const Slot& in(const PlanNode& n, std::size_t k) const {
    return vals_[static_cast<std::size_t>(n.inputs[k])];
  }
  const TruthMask& mask_in(const PlanNode& n, std::size_t k) const {
    const auto& s = in(n, k);
    if (const auto* m = std::get_if<TruthMask>(&s)) return *m;
    throw NumericError("internal: expected a mask operand");
  }

  // Scalars feeding a mask kernel are broadcast onto the working grid.
  TruthMask as_mask(const Slot& s) const {
    if (const auto* m = std::get_if<TruthMask>(&s)) return *m;
    return TruthMask(plan_.working, std::get<double>(s));
  }

  TruthMask finish_open(TruthMask m, const PlanNode& n) const {
    return n.binarize_output ? binarize(m, plan_.logic.bool_threshold) : m;
  }

  Slot eval(const PlanNode& n) {
    const LogicSystem& logic = plan_.logic;
    switch (n.op) {
      case OpKind::LoadMask: {
        const auto it = scene_.masks.find(n.channel);
        if (it == scene_.masks.end()) {
          throw DataError("scene '" + scene_.id + "' has no mask channel '" + n.channel + "'");
        }
        if (!(it->second.shape() == n.shape)) {
          throw DataError("channel '" + n.channel + "' of scene '" + scene_.id + "' is " +
                          to_string(it->second.shape()) + ", the plan was bound for " + to_string(n.shape));
        }
        return it->second;
      }
      case OpKind::RasterizeBoxes: {
        const auto it = scene_.boxes.find(n.channel);
        if (it == scene_.boxes.end()) {
          throw DataError("scene '" + scene_.id + "' has no box channel '" + n.channel + "'");
        }
        if (!(scene_.image == plan_.image)) {
          throw DataError("scene '" + scene_.id + "' image is " + to_string(scene_.image) +
                          ", the plan was bound for " + to_string(plan_.image));
        }
        if (n.shape == plan_.image) return boxes_to_mask(it->second, n.shape, logic);
        const double sx = static_cast<double>(n.shape.width) / plan_.image.width;
        const double sy = static_cast<double>(n.shape.height) / plan_.image.height;
        std::vector<BoundingBox> scaled;
        scaled.reserve(it->second.size());
        for (const auto& b : it->second) {
          scaled.emplace_back(b.x0() * sx, b.y0() * sy, b.x1() * sx, b.y1() * sy, b.score());
        }
        return boxes_to_mask(scaled, n.shape, logic);
      }
      case OpKind::Upscale: return upscale_bilinear(mask_in(n, 0), n.shape);
      case OpKind::Downscale: return downscale_maxpool(mask_in(n, 0), n.shape);
      case OpKind::Binarize:
      case OpKind::Denoise:
      case OpKind::Not:
      case OpKind::And:
      case OpKind::Or:
      case OpKind::Implies: return pointwise(n, primitive_program(n), {});
      case OpKind::Pointwise: return pointwise(n, n.program, n.program_closeby);
      case OpKind::CloseToA: {
        const auto b = as_mask(in(n, 0));
        return finish_open(close_to_a(b, n.closeby, logic, plan_.working), n);
      }
      case OpKind::NeighborhoodReduce:
        return finish_open(neighborhood_reduce(as_mask(in(n, 0)), n.quantifier, n.closeby, n.include_self, logic),
                           n);
      case OpKind::Reduce: {
        const auto body = operand(in(n, 0));
        const TruthMask* region = n.has_domain_mask ? &mask_in(n, 1) : nullptr;
        Reducer red(n.quantifier, logic);
        for (std::size_t i = 0; i < plan_.working.size(); ++i) {
          if (region && (*region)[i] < 0.5) continue;
          red.add(body.at(i));
        }
        return red.finish();
      }
      case OpKind::AllPairs: return all_pairs(n);
    }
    throw NumericError("internal: unknown plan node");
  }

  Slot pointwise(const PlanNode& n, const std::vector<Instr>& prog, const std::vector<CloseByParams>& cb) {
    Machine m(prog, cb, plan_.logic);
    std::vector<Operand> ops;
    bool any_mask = false;
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      ops.push_back(operand(in(n, k)));
      any_mask |= ops.back().data != nullptr;
    }
    if (!any_mask) return clamp01(m.run(ops, 0, 0, 0, 0, 0, 0));
    std::vector<double> out(plan_.working.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = clamp01(m.run(ops, i, i, 0, 0, 0, 0));
    return TruthMask(plan_.working, std::move(out));
  }

  Slot all_pairs(const PlanNode& n) {
    const LogicSystem& logic = plan_.logic;
    const int h = plan_.working.height;
    const int w = plan_.working.width;
    Machine m(n.program, n.program_closeby, logic);
    std::vector<Operand> ops;
    const std::size_t n_ops = n.inputs.size() - (n.has_domain_mask ? 1 : 0);
    for (std::size_t k = 0; k < n_ops; ++k) ops.push_back(operand(in(n, k)));
    const TruthMask* region = n.has_domain_mask ? &mask_in(n, n.inputs.size() - 1) : nullptr;

    std::optional<CloseByKernel> window;
    if (n.domain == Domain::Kind::Neighborhood && n.closeby.bounded()) window = closeby_kernel(n.closeby);

    std::vector<double> out(plan_.working.size());
    for (int pr = 0; pr < h; ++pr) {
      for (int pc = 0; pc < w; ++pc) {
        const std::size_t p = static_cast<std::size_t>(pr) * w + pc;
        Reducer red(n.quantifier, logic);
        const auto visit = [&](int qr, int qc) {
          const std::size_t q = static_cast<std::size_t>(qr) * w + qc;
          red.add(m.run(ops, p, q, pr, pc, qr, qc));
        };
        if (window) {
          const int r = window->radius;
          for (int qr = std::max(0, pr - r); qr <= std::min(h - 1, pr + r); ++qr)
            for (int qc = std::max(0, pc - r); qc <= std::min(w - 1, pc + r); ++qc) {
              if (window->at(qr - pr, qc - pc) <= 0.0) continue;
              if (!n.include_self && qr == pr && qc == pc) continue;
              visit(qr, qc);
            }
        } else {
          for (int qr = 0; qr < h; ++qr)
            for (int qc = 0; qc < w; ++qc) {
              if (region && (*region)(qr, qc) < 0.5) continue;
              if (n.domain == Domain::Kind::Neighborhood) {
                if (n.closeby.weight(qr - pr, qc - pc) <= 0.0) continue;
                if (!n.include_self && qr == pr && qc == pc) continue;
              }
              visit(qr, qc);
            }
        }
        out[p] = red.finish();
      }
    }
    return finish_open(TruthMask(plan_.working, std::move(out)), n);
  }

  const EvalPlan& plan_;
  const SceneBundle& scene_;
  std::vector<Slot> vals_;
};

}  // namespace

EvalResult evaluate(const EvalPlan& plan, const SceneBundle& scene, EvalTrace* trace) {
  Evaluator ev(plan, scene);
  Slot& out = ev.run();
  EvalResult result;
  if (const auto* m = std::get_if<TruthMask>(&out)) {
    result = *m;
  } else if (plan.open_output) {
    result = TruthMask(plan.working, std::get<double>(out));
  } else {
    result = TruthValue(std::get<double>(out));
  }
  if (trace) trace->values = std::move(ev.values());
  return result;
}

EvalResult evaluate_rule(std::string_view text, const SceneBundle& scene, const LogicSystem& logic,
                         const CompileOptions& options) {
  const auto f = parse(text);
  const auto bf = rule::bind(f, scene.schema(), options);
  return evaluate(lower(bf, logic), scene);
}

}  // namespace rulemon::rule
