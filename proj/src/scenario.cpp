#include "mfc/scenario.hpp"

#include <sstream>

#include "mfc/config_text.hpp"

namespace mfc {

namespace {

const char* const kModes[] = {"lq-unconstrained", "lq-constrained", "mfg",
                              "bridge",           "fj-suite",       "mvsde-check"};

bool valid_mode(const std::string& m) {
  for (const char* k : kModes)
    if (m == k) return true;
  return false;
}

std::vector<double> parse_list(const ConfigLine& cl) {
  std::vector<double> out;
  std::string part;
  std::istringstream in(cl.value);
  while (std::getline(in, part, ',')) {
    std::string t = detail::trim(part);
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(t, &pos));
      if (pos != t.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError(cl.line, cl.key, "expected a number, got '" + t + "'");
    }
  }
  if (out.empty()) throw ParseError(cl.line, cl.key, "empty list");
  return out;
}

void apply_line(Scenario& sc, const ConfigLine& cl) {
  const std::string& s = cl.section;
  const std::string& k = cl.key;
  if (s.empty()) {
    if (k == "mode") {
      if (!valid_mode(cl.value))
        throw ParseError(cl.line, k, "unknown mode '" + cl.value + "'");
      sc.mode = cl.value;
      return;
    }
    throw ParseError(cl.line, k, "unknown top-level key");
  }
  if (s == "model") {
    double* slot = nullptr;
    if (k == "b1") slot = &sc.model.b1;
    else if (k == "b2") slot = &sc.model.b2;
    else if (k == "b3") slot = &sc.model.b3;
    else if (k == "b4") slot = &sc.model.b4;
    else if (k == "s1") slot = &sc.model.s1;
    else if (k == "s2") slot = &sc.model.s2;
    else if (k == "s3") slot = &sc.model.s3;
    else if (k == "s4") slot = &sc.model.s4;
    else if (k == "q") slot = &sc.model.q;
    else if (k == "v") slot = &sc.model.v;
    else if (k == "ell") slot = &sc.model.ell;
    else if (k == "T") slot = &sc.model.T;
    else if (k == "m0") slot = &sc.model.m0;
    else if (k == "v0") slot = &sc.model.v0;
    else throw ParseError(cl.line, k, "unknown key in [model]");
    *slot = config_double(cl);
    return;
  }
  if (s == "constraint") {
    if (k == "h") {
      sc.has_constraint = true;
      sc.h_value = config_double(cl);
      return;
    }
    throw ParseError(cl.line, k, "unknown key in [constraint]");
  }
  if (s == "run") {
    if (k == "N") {
      long long n = config_int(cl);
      if (n < 2) throw ParseError(cl.line, k, "N must be at least 2");
      sc.N = static_cast<int>(n);
    } else if (k == "M") {
      long long m = config_int(cl);
      if (m < 1) throw ParseError(cl.line, k, "M must be positive");
      sc.M = static_cast<std::size_t>(m);
    } else if (k == "seed") {
      sc.seed = static_cast<std::uint64_t>(config_int(cl));
    } else if (k == "max_iter") {
      sc.max_iter = static_cast<int>(config_int(cl));
    } else if (k == "damping") {
      sc.damping = config_double(cl);
    } else if (k == "tol") {
      sc.tol = config_double(cl);
    } else if (k == "outer_iter") {
      sc.outer_iter = static_cast<int>(config_int(cl));
    } else if (k == "picard_iter") {
      sc.picard_iter = static_cast<int>(config_int(cl));
    } else if (k == "dt_list") {
      sc.dt_list = parse_list(cl);
    } else if (k == "problems") {
      sc.problems = cl.value;
    } else {
      throw ParseError(cl.line, k, "unknown key in [run]");
    }
    return;
  }
  throw ParseError(cl.line, k, "unknown section [" + s + "]");
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  Scenario sc;
  sc.source_text = text;
  for (const auto& cl : read_config_lines(text)) apply_line(sc, cl);
  if (sc.mode.empty()) throw ParseError(1, "mode", "missing required key 'mode'");
  return sc;
}

Scenario parse_scenario_file(const std::string& path) {
  return parse_scenario_text(read_text_file(path));
}

void apply_override(Scenario& sc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ParseError(0, assignment, "override must be key=value");
  std::string full_key = detail::trim(assignment.substr(0, eq));
  ConfigLine cl;
  cl.line = 0;
  cl.value = detail::trim(assignment.substr(eq + 1));
  auto dot = full_key.find('.');
  if (dot == std::string::npos) {
    cl.key = full_key;
  } else {
    cl.section = full_key.substr(0, dot);
    cl.key = full_key.substr(dot + 1);
  }
  apply_line(sc, cl);
}

void finalize_scenario(Scenario& sc) {
  bool wants_h = sc.mode == "lq-constrained";
  if (wants_h && !sc.has_constraint)
    throw ParseError(0, "constraint.h", "mode '" + sc.mode + "' requires [constraint] h");
  if (sc.has_constraint) {
    double hv = sc.h_value;
    sc.model.h = [hv](double) { return hv; };
    sc.model.constrained = sc.mode != "lq-unconstrained" && sc.mode != "mvsde-check";
  }
  if (sc.mode == "mfg" && !sc.has_constraint) sc.model.constrained = false;
}

}  // namespace mfc
