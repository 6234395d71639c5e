#include "mfc/problem_file.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "mfc/config_text.hpp"

namespace mfc {

namespace {

struct Monomial {
  double coef = 0.0;
  std::vector<int> exps;
};

struct Polynomial {
  int dim = 0;
  std::vector<Monomial> terms;

  double eval(const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (const auto& t : terms) {
      double m = t.coef;
      for (int i = 0; i < dim; ++i)
        for (int e = 0; e < t.exps[static_cast<std::size_t>(i)]; ++e) m *= x(i);
      s += m;
    }
    return s;
  }

  Eigen::VectorXd grad(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    for (const auto& t : terms)
      for (int i = 0; i < dim; ++i) {
        int ei = t.exps[static_cast<std::size_t>(i)];
        if (ei == 0) continue;
        double m = t.coef * ei;
        for (int j = 0; j < dim; ++j) {
          int e = t.exps[static_cast<std::size_t>(j)] - (j == i ? 1 : 0);
          for (int r = 0; r < e; ++r) m *= x(j);
        }
        g(i) += m;
      }
    return g;
  }
};

std::vector<double> parse_numbers(const ConfigLine& cl, const std::string& text) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    if (tok == "inf") {
      out.push_back(std::numeric_limits<double>::infinity());
    } else if (tok == "-inf") {
      out.push_back(-std::numeric_limits<double>::infinity());
    } else {
      try {
        std::size_t pos = 0;
        out.push_back(std::stod(tok, &pos));
        if (pos != tok.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ParseError(cl.line, cl.key, "expected a number, got '" + tok + "'");
      }
    }
  }
  return out;
}

Monomial parse_monomial(const ConfigLine& cl, const std::string& text, int dim) {
  std::vector<double> nums = parse_numbers(cl, text);
  if (static_cast<int>(nums.size()) != dim + 1)
    throw ParseError(cl.line, cl.key,
                     "monomial needs coef plus " + std::to_string(dim) + " exponents");
  Monomial m;
  m.coef = nums[0];
  for (int i = 0; i < dim; ++i) {
    double e = nums[static_cast<std::size_t>(i) + 1];
    if (e < 0 || e != std::floor(e))
      throw ParseError(cl.line, cl.key, "exponents must be nonnegative integers");
    m.exps.push_back(static_cast<int>(e));
  }
  return m;
}

Polynomial parse_row(const ConfigLine& cl, int dim) {
  Polynomial p;
  p.dim = dim;
  std::string part;
  std::istringstream in(cl.value);
  while (std::getline(in, part, ';')) {
    std::string t = detail::trim(part);
    if (t.empty()) throw ParseError(cl.line, cl.key, "empty monomial in row");
    p.terms.push_back(parse_monomial(cl, t, dim));
  }
  if (p.terms.empty()) throw ParseError(cl.line, cl.key, "empty row");
  return p;
}

NlpProblem::VectorMap make_map(std::vector<Polynomial> rows) {
  return [rows = std::move(rows)](const Eigen::VectorXd& x, Eigen::MatrixXd* jac) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    if (jac) jac->resize(static_cast<Eigen::Index>(rows.size()), rows[0].dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      v(static_cast<Eigen::Index>(r)) = rows[r].eval(x);
      if (jac) jac->row(static_cast<Eigen::Index>(r)) = rows[r].grad(x).transpose();
    }
    return v;
  };
}

struct RawBlock {
  int first_line = 0;
  std::string cone_kind;  // ineq only; empty = orthant
  std::vector<std::vector<double>> gens;
  std::vector<Polynomial> rows;
};

}  // namespace

NlpProblem parse_problem_text(const std::string& text) {
  auto lines = read_config_lines(text);

  int dim = 0;
  for (const auto& cl : lines)
    if (cl.section.empty() && cl.key == "dim") {
      long long d = config_int(cl);
      if (d < 1) throw ParseError(cl.line, cl.key, "dim must be positive");
      dim = static_cast<int>(d);
    }
  if (dim == 0) throw ParseError(1, "dim", "missing top-level dim");

  std::vector<Polynomial> objective_terms_holder;
  Polynomial objective;
  objective.dim = dim;
  std::map<int, RawBlock> ineq, eq;
  std::vector<double> lower, upper;
  int split_index = 0;

  auto block_index = [](const ConfigLine& cl, const std::string& prefix) {
    std::string idx = cl.section.substr(prefix.size());
    try {
      std::size_t pos = 0;
      int k = std::stoi(idx, &pos);
      if (pos != idx.size() || k < 0) throw std::invalid_argument("bad");
      return k;
    } catch (const std::exception&) {
      throw ParseError(cl.line, cl.key, "bad block index in section [" + cl.section + "]");
    }
  };

  for (const auto& cl : lines) {
    if (cl.section.empty()) {
      if (cl.key == "dim") continue;
      if (cl.key == "split_index") {
        split_index = static_cast<int>(config_int(cl));
        continue;
      }
      throw ParseError(cl.line, cl.key, "unknown top-level key");
    }
    if (cl.section == "objective") {
      if (cl.key != "term") throw ParseError(cl.line, cl.key, "unknown key in [objective]");
      objective.terms.push_back(parse_monomial(cl, cl.value, dim));
    } else if (cl.section.rfind("ineq.", 0) == 0) {
      RawBlock& b = ineq[block_index(cl, "ineq.")];
      if (b.first_line == 0) b.first_line = cl.line;
      if (cl.key == "cone") {
        b.cone_kind = cl.value;
      } else if (cl.key == "gen") {
        b.gens.push_back(parse_numbers(cl, cl.value));
      } else if (cl.key == "row") {
        b.rows.push_back(parse_row(cl, dim));
      } else {
        throw ParseError(cl.line, cl.key, "unknown key in [" + cl.section + "]");
      }
    } else if (cl.section.rfind("eq.", 0) == 0) {
      RawBlock& b = eq[block_index(cl, "eq.")];
      if (b.first_line == 0) b.first_line = cl.line;
      if (cl.key != "row") throw ParseError(cl.line, cl.key, "unknown key in [" + cl.section + "]");
      b.rows.push_back(parse_row(cl, dim));
    } else if (cl.section == "box") {
      std::vector<double> vals = parse_numbers(cl, cl.value);
      if (static_cast<int>(vals.size()) != dim)
        throw ParseError(cl.line, cl.key, "box bound needs " + std::to_string(dim) + " entries");
      if (cl.key == "lower") {
        lower = vals;
      } else if (cl.key == "upper") {
        upper = vals;
      } else {
        throw ParseError(cl.line, cl.key, "unknown key in [box]");
      }
    } else {
      throw ParseError(cl.line, cl.key, "unknown section [" + cl.section + "]");
    }
  }

  if (objective.terms.empty()) throw ParseError(1, "term", "missing [objective] terms");

  NlpProblem p;
  p.dim = dim;
  p.split_index = split_index;
  p.objective = [objective](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) *grad = objective.grad(x);
    return objective.eval(x);
  };

  for (const auto& [k, b] : ineq) {
    if (b.rows.empty())
      throw ParseError(b.first_line, "row", "inequality block " + std::to_string(k) + " has no rows");
    int m = static_cast<int>(b.rows.size());
    ConeSpec cone = ConeSpec::orthant(m);
    std::string kind = b.cone_kind.empty() ? "orthant" : b.cone_kind;
    if (kind == "orthant") {
      cone = ConeSpec::orthant(m);
    } else if (kind == "zero") {
      cone = ConeSpec::zero(m);
    } else if (kind == "free") {
      cone = ConeSpec::free_space(m);
    } else if (kind == "polyhedral") {
      if (b.gens.empty())
        throw ParseError(b.first_line, "gen", "polyhedral cone needs generator lines");
      Eigen::MatrixXd G(m, static_cast<Eigen::Index>(b.gens.size()));
      for (std::size_t c = 0; c < b.gens.size(); ++c) {
        if (static_cast<int>(b.gens[c].size()) != m)
          throw ParseError(b.first_line, "gen", "generator length must match row count");
        for (int r = 0; r < m; ++r) G(r, static_cast<Eigen::Index>(c)) = b.gens[c][static_cast<std::size_t>(r)];
      }
      cone = ConeSpec::polyhedral(G);
    } else {
      throw ParseError(b.first_line, "cone", "unknown cone kind '" + kind + "'");
    }
    p.inequalities.push_back({make_map(b.rows), cone});
  }

  for (const auto& [k, b] : eq) {
    if (b.rows.empty())
      throw ParseError(b.first_line, "row", "equality block " + std::to_string(k) + " has no rows");
    p.equalities.push_back({make_map(b.rows), static_cast<int>(b.rows.size())});
  }

  if (lower.empty() != upper.empty())
    throw ParseError(1, "box", "box needs both lower and upper");
  if (!lower.empty()) {
    p.feasible_set = BoxSet(Eigen::Map<const Eigen::VectorXd>(lower.data(), dim),
                            Eigen::Map<const Eigen::VectorXd>(upper.data(), dim));
  } else {
    p.feasible_set = BoxSet::whole_space(dim);
  }
  return p;
}

NlpProblem parse_problem_file(const std::string& path) {
  return parse_problem_text(read_text_file(path));
}

}  // namespace mfc
