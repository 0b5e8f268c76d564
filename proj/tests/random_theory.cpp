#include "random_theory.hpp"

#include <algorithm>
#include <sstream>

#include "mebn/theory_format.hpp"

namespace mebn::testing {

namespace {

struct Gen {
  std::mt19937& rng;

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng); }
  template <class T>
  const T& one_of(const std::vector<T>& v) { return v[pick(v.size())]; }

  double probability() {
    static const std::vector<double> nice = {0, 0.05, 0.1, 0.125, 0.2, 0.25, 0.3, 0.5, 0.75, 1};
    if (coin(0.7)) return one_of(nice);
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }

  MTheory theory;
  std::map<std::string, std::vector<std::string>> ids;  // by type

  std::vector<std::string> values_of(const RVTemplate& r) {
    if (r.entity_valued()) return ids[r.entity_range];
    auto d = r.states.declared();
    return {d.begin(), d.end()};
  }

  Term rv_term(const RVTemplate& r, const std::vector<std::string>& vars) {
    Term t = Term::apply(r.name, {});
    for (std::size_t i = 0; i < r.params.size(); ++i) {
      if (!vars.empty() && coin(0.85)) t.args.push_back(Term::var(one_of(vars)));
      else t.args.push_back(Term::entity(one_of(ids[r.params[i].type])));
    }
    return t;
  }

  Formula atom(const std::vector<std::string>& vars) {
    const auto& r = one_of(theory.rvs);
    switch (pick(4)) {
      case 0:
        if (!vars.empty()) return Formula::isa(one_of(theory.types).name, Term::var(one_of(vars)));
        [[fallthrough]];
      case 1: {
        auto vals = values_of(r);
        Term rhs = r.entity_valued() ? Term::entity(one_of(vals)) : Term::symbol(one_of(vals));
        if (!vars.empty() && r.entity_valued() && coin()) rhs = Term::var(one_of(vars));
        return coin(0.7) ? Formula::equals(rv_term(r, vars), rhs) : Formula::not_equals(rv_term(r, vars), rhs);
      }
      case 2:
        if (vars.size() >= 2) return Formula::not_equals(Term::var(vars[0]), Term::var(vars[1]));
        [[fallthrough]];
      default: return Formula::atom(rv_term(r, vars));
    }
  }

  Formula formula(std::vector<std::string> vars, int depth) {
    if (depth <= 0 || coin(0.35)) return atom(vars);
    switch (pick(4)) {
      case 0: return Formula::negate(formula(vars, depth - 1));
      case 1: {
        static const std::vector<Formula::Kind> kinds = {Formula::Kind::And, Formula::Kind::Or,
                                                         Formula::Kind::Implies, Formula::Kind::Iff};
        return Formula::binary(one_of(kinds), formula(vars, depth - 1), formula(vars, depth - 1));
      }
      case 2: {
        std::string v = "q" + std::to_string(depth);
        vars.push_back(v);
        return Formula::quantifier(coin() ? Formula::Kind::ForAll : Formula::Kind::Exists, v,
                                   one_of(theory.types).name, formula(vars, depth - 1));
      }
      default: return atom(vars);
    }
  }

  Pattern pattern(const std::vector<const RVTemplate*>& parents) {
    Pattern p;
    if (parents.empty()) return p;
    std::size_t n = pick(3);
    for (std::size_t i = 0; i < n; ++i) {
      const auto* r = parents[pick(parents.size())];
      auto vals = values_of(*r);
      vals.push_back(std::string(kAbsurd));
      p.constraints.push_back({r->name, one_of(vals)});
    }
    return p;
  }

  Guard guard(const std::vector<const RVTemplate*>& parents, int depth) {
    if (depth > 0 && coin(0.3)) {
      switch (pick(3)) {
        case 0: return Guard::conj(guard(parents, depth - 1), guard(parents, depth - 1));
        case 1: return Guard::disj(guard(parents, depth - 1), guard(parents, depth - 1));
        default: return Guard::negate(guard(parents, depth - 1));
      }
    }
    static const std::vector<CmpOp> ops = {CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge};
    return Guard::compare(pattern(parents), one_of(ops), static_cast<std::int64_t>(pick(4)));
  }

  Distribution distribution(const RVTemplate& r, const std::vector<const RVTemplate*>& parents) {
    Distribution d;
    if (coin(0.1)) {
      d.uniform = true;
      return d;
    }
    auto states = values_of(r);
    if (coin(0.1)) states.push_back(std::string(kAbsurd));
    std::shuffle(states.begin(), states.end(), rng);
    states.resize(1 + pick(states.size()));
    bool remainder = false;
    for (const auto& s : states) {
      ProbTerm t = ProbTerm::constant_of(probability());
      if (!remainder && coin(0.2)) {
        t = ProbTerm::remainder();
        remainder = true;
      } else if (coin(0.2)) {
        double slope = probability() * (coin() ? 1 : -1);
        t = ProbTerm::saturated(probability(), probability(), slope, pattern(parents),
                                static_cast<std::int64_t>(1 + pick(5)));
      }
      d.entries.emplace_back(s, t);
    }
    return d;
  }

  LocalExpression local(const RVTemplate& r, const std::vector<const RVTemplate*>& parents) {
    LocalExpression e;
    std::size_t n = pick(4);
    for (std::size_t i = 0; i < n; ++i) e.clauses.push_back({guard(parents, 2), distribution(r, parents)});
    e.otherwise = distribution(r, parents);
    return e;
  }

  MTheory build() {
    theory.name = "Random" + std::to_string(pick(1000));
    std::size_t ntypes = 1 + pick(3);
    for (std::size_t i = 0; i < ntypes; ++i) {
      std::string name = std::string("Kind") + static_cast<char>('A' + i);
      theory.types.push_back({name, coin(0.3)});
      EntityDecl e{name, {}};
      std::size_t n = 1 + pick(3);
      for (std::size_t k = 0; k < n; ++k) e.ids.push_back("!" + std::string(1, static_cast<char>('A' + i)) + std::to_string(k));
      ids[name] = e.ids;
      if (coin(0.9)) theory.entities.push_back(std::move(e));
    }
    std::size_t nrv = 2 + pick(4);
    for (std::size_t i = 0; i < nrv; ++i) {
      RVTemplate r;
      r.name = "Rv" + std::to_string(i);
      std::size_t arity = pick(3);
      for (std::size_t k = 0; k < arity; ++k) r.params.push_back({"p" + std::to_string(k), one_of(theory.types).name});
      switch (pick(4)) {
        case 0: r.entity_range = one_of(theory.types).name; break;
        case 1: r.states = StateSpace::boolean(); break;
        default: {
          std::vector<std::string> s;
          std::size_t n = 1 + pick(4);
          for (std::size_t k = 0; k < n; ++k) s.push_back("S" + std::to_string(k));
          r.states = StateSpace(s);
        }
      }
      theory.rvs.push_back(std::move(r));
    }
    std::size_t ndef = pick(3);
    for (std::size_t i = 0; i < ndef; ++i) {
      Define d;
      d.name = "Def" + std::to_string(i);
      std::vector<std::string> vars;
      std::size_t arity = pick(3);
      for (std::size_t k = 0; k < arity; ++k) {
        d.params.push_back({"d" + std::to_string(k), one_of(theory.types).name});
        vars.push_back(d.params.back().name);
      }
      d.body = formula(vars, 3);
      theory.defines.push_back(std::move(d));
    }
    for (std::size_t i = 0; i < theory.rvs.size(); ++i) {
      const auto& r = theory.rvs[i];
      MFrag m;
      m.name = "Frag" + std::to_string(i);
      std::vector<std::string> vars;
      Term res = Term::apply(r.name, {});
      for (std::size_t k = 0; k < r.params.size(); ++k) {
        std::string v = "v" + std::to_string(k);
        vars.push_back(v);
        res.args.push_back(Term::var(v));
        m.context.push_back(Formula::isa(r.params[k].type, Term::var(v)));
      }
      if (coin(0.4)) m.context.push_back(formula(vars, 2));
      std::vector<const RVTemplate*> parents;
      for (std::size_t j = 0; j < i; ++j) {
        if (!coin(0.4)) continue;
        Term in = rv_term(theory.rvs[j], vars);
        if (std::find(m.input.begin(), m.input.end(), in) != m.input.end()) continue;
        m.input.push_back(in);
        m.arcs.push_back({in, res});
        parents.push_back(&theory.rvs[j]);
      }
      m.resident.push_back(res);
      m.locals.push_back({r.name, local(r, parents)});
      for (std::size_t k = 0; k < r.params.size(); ++k)
        if (theory.find_type(r.params[k].type)->ordered && coin(0.5)) {
          m.recursion = Recursion{vars[k], "Prev"};
          break;
        }
      theory.mfrags.push_back(std::move(m));
    }
    return theory;
  }
};

}  // namespace

MTheory random_theory(std::mt19937& rng) {
  Gen g{rng, {}, {}};
  return g.build();
}

LogicTheory random_logic_theory(std::mt19937& rng) {
  Gen g{rng, {}, {}};
  LogicTheory out;
  out.entities = 1 + g.pick(3);
  std::ostringstream t;
  t << "mtheory Logic\n\ntype Thing\nentities Thing:";
  for (std::size_t i = 0; i < out.entities; ++i) t << " !E" << i;
  auto prob = [&] { return format_number(std::uniform_real_distribution<double>(0.05, 0.95)(rng)); };
  t << "\n\nrv P(x: Thing) : Bool\nrv Q(x: Thing) : Bool\n\n"
    << "mfrag Prior\n  context: Isa(Thing, x)\n  resident: P(x)\n  local P: {True: " << prob()
    << ", False: *}\nend\n\n"
    << "mfrag Effect\n  context: Isa(Thing, x)\n  input: P(x)\n  resident: Q(x)\n  graph: P(x) -> Q(x)\n"
    << "  local Q:\n    if count(P = True) >= 1 then {True: " << prob() << ", False: *}\n"
    << "    else {True: " << prob() << ", False: *}\nend\n";
  out.text = t.str();
  std::ostringstream e;
  for (std::size_t i = 0; i < out.entities; ++i)
    if (g.coin(0.4)) e << "Q(!E" << i << ") = " << (g.coin() ? "True" : "False") << "\n";
  out.evidence = e.str();
  return out;
}

}  // namespace mebn::testing
