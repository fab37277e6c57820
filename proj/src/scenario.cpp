#include "phtraffic/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

namespace phtraffic {

namespace pt = boost::property_tree;

namespace {

// Keys a manifest may carry besides the scenario itself. They describe a
// finished run and are ignored on input.
constexpr std::array kManifestResultKeys = {
    "command",         "samples",     "blowup", "blowup_step", "blowup_time", "overtake_flag",
    "stability_verdict", "spectral_abscissa_nonzero", "sufficient_lhs", "runs"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

class SectionReader {
 public:
  SectionReader(const pt::ptree& tree, std::string name) : name_(std::move(name)) {
    if (auto child = tree.get_child_optional(name_)) section_ = &*child;
  }

  bool present() const { return section_ != nullptr; }

  std::optional<std::string> optional(const std::string& key) {
    seen_.insert(key);
    if (!section_) return std::nullopt;
    auto v = section_->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }

  std::string required(const std::string& key) {
    auto v = optional(key);
    if (!v) throw ScenarioError("missing required key [" + name_ + "] " + key);
    return *v;
  }

  double number(const std::string& key) { return to_number(key, required(key)); }

  double number_or(const std::string& key, double fallback) {
    auto v = optional(key);
    return v ? to_number(key, *v) : fallback;
  }

  bool flag_or(const std::string& key, bool fallback) {
    auto v = optional(key);
    if (!v) return fallback;
    if (*v == "on" || *v == "true" || *v == "1") return true;
    if (*v == "off" || *v == "false" || *v == "0") return false;
    throw ScenarioError("[" + name_ + "] " + key + ": expected on/off, got '" + *v + "'");
  }

  template <class Int>
  Int integer(const std::string& key) {
    const std::string text = required(key);
    Int value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ScenarioError("[" + name_ + "] " + key + ": expected an integer, got '" + text + "'");
    }
    return value;
  }

  /// Every key in the section must have been requested.
  void reject_unknown(const std::set<std::string>& also_allowed = {}) const {
    if (!section_) return;
    for (const auto& [key, child] : *section_) {
      if (!child.empty()) throw ScenarioError("nested keys are not allowed in [" + name_ + "]");
      if (!seen_.contains(key) && !also_allowed.contains(key)) {
        throw ScenarioError("unknown key [" + name_ + "] " + key);
      }
    }
  }

 private:
  double to_number(const std::string& key, const std::string& text) const {
    try {
      return parse_number(text);
    } catch (const InvalidInput&) {
      throw ScenarioError("[" + name_ + "] " + key + ": expected a number, got '" + text + "'");
    }
  }

  std::string name_;
  const pt::ptree* section_ = nullptr;
  std::set<std::string> seen_;
};

Eigen::VectorXd parse_list(const std::string& key, const std::string& text) {
  std::vector<double> values;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string item = trim(rest.substr(0, comma));
    try {
      values.push_back(parse_number(item));
    } catch (const InvalidInput&) {
      throw ScenarioError("[sim] " + key + ": bad list entry '" + item + "'");
    }
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string format_list(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_number(v[i]);
  }
  return out;
}

ScenarioFile base_preset() {
  ScenarioFile s;
  s.model.n_vehicles = 20;
  s.model.ring_length = 141.0;
  s.model.beta = 1.0;
  s.model.sigma = 1.0;
  s.sim.dt = 0.001;
  s.sim.t_end = 250.0;
  s.sim.sample_stride = 100;
  s.sim.initial = UniformZeroSpeed{};
  return s;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf.data(), ptr);
}

double parse_number(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidInput("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string> preset_names() { return {"fig1", "fig2", "fig3"}; }

ScenarioFile preset(std::string_view name) {
  ScenarioFile s = base_preset();
  s.preset_name = std::string(name);
  if (name == "fig1") {
    s.model.alpha = 1.0;
    s.model.gamma = 0.0;
    s.model.regime = Uncontrolled{};
    s.sim.seed = 1;
  } else if (name == "fig2") {
    s.model.alpha = 0.5;
    s.model.gamma = 0.1;
    s.model.regime = OpenLoop{2.05};
    s.sim.seed = 2;
  } else if (name == "fig3") {
    s.model.alpha = 0.5;
    s.model.gamma = 1.0;
    s.model.regime = ClosedLoop{5.0, 1.0};
    s.sim.seed = 3;
  } else {
    throw InvalidInput("unknown preset '" + std::string(name) + "' (expected fig1, fig2 or fig3)");
  }
  return s;
}

ScenarioFile parse_scenario(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ScenarioError(std::string("scenario syntax error: ") + e.message() + " (line " +
                        std::to_string(e.line()) + ")");
  }
  static const std::set<std::string> sections{"model", "regime", "sim", "output", "manifest"};
  for (const auto& [name, child] : tree) {
    if (!sections.contains(name)) throw ScenarioError("unknown section or top-level key '" + name + "'");
    (void)child;
  }

  ScenarioFile s;

  SectionReader model(tree, "model");
  s.model.n_vehicles = model.integer<int>("n_vehicles");
  s.model.ring_length = model.number("ring_length");
  s.model.alpha = model.number("alpha");
  s.model.beta = model.number("beta");
  s.model.gamma = model.number("gamma");
  s.model.sigma = model.number("sigma");
  if (auto potential = model.optional("potential"); potential && *potential != "quadratic") {
    throw ScenarioError("[model] potential: only 'quadratic' can be expressed in a scenario file");
  }
  model.reject_unknown();

  SectionReader regime(tree, "regime");
  const std::string kind = regime.required("kind");
  if (kind == "uncontrolled") {
    s.model.regime = Uncontrolled{};
  } else if (kind == "open_loop") {
    s.model.regime = OpenLoop{regime.number("x")};
  } else if (kind == "closed_loop") {
    s.model.regime = ClosedLoop{regime.number("ell"), regime.number("t_gap")};
  } else {
    throw ScenarioError("[regime] kind: expected uncontrolled, open_loop or closed_loop, got '" + kind + "'");
  }
  regime.reject_unknown();

  SectionReader sim(tree, "sim");
  s.sim.dt = sim.number("dt");
  s.sim.t_end = sim.number("t_end");
  s.sim.sample_stride = sim.integer<int>("sample_stride");
  s.sim.seed = sim.integer<std::uint64_t>("seed");
  const std::string initial = sim.optional("initial").value_or("uniform_zero_speed");
  if (initial == "uniform_zero_speed") {
    s.sim.initial = UniformZeroSpeed{};
  } else if (initial == "uniform_stationary") {
    s.sim.initial = UniformStationary{};
  } else if (initial == "explicit") {
    s.sim.initial = ExplicitInitial{parse_list("initial_q", sim.required("initial_q")),
                                    parse_list("initial_p", sim.required("initial_p"))};
  } else {
    throw ScenarioError("[sim] initial: expected uniform_zero_speed, uniform_stationary or explicit");
  }
  sim.reject_unknown();

  SectionReader output(tree, "output");
  s.output.svg = output.flag_or("svg", true);
  s.output.unwrapped = output.flag_or("unwrapped", false);
  output.reject_unknown();

  SectionReader manifest(tree, "manifest");
  if (auto version = manifest.optional("schema_version")) {
    if (*version != std::to_string(kSchemaVersion)) {
      throw ScenarioError("[manifest] schema_version " + *version + " is not supported");
    }
  }
  manifest.optional("tool_version");
  s.preset_name = manifest.optional("preset").value_or("");
  manifest.reject_unknown({kManifestResultKeys.begin(), kManifestResultKeys.end()});

  try {
    s.model.validate();
    s.sim.validate(s.model);
  } catch (const ScenarioError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ScenarioError(std::string("invalid scenario: ") + e.what());
  }
  return s;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  return parse_scenario(in);
}

std::string format_scenario(const ScenarioFile& s, const KeyValues& manifest) {
  std::ostringstream out;
  const auto& m = s.model;
  out << "[model]\n"
      << "; number of vehicles\n"
      << "n_vehicles = " << m.n_vehicles << "\n"
      << "; ring length [length]\n"
      << "ring_length = " << format_number(m.ring_length) << "\n"
      << "; potential stiffness, U(x) = (alpha x)^2 / 2 [1/time]\n"
      << "alpha = " << format_number(m.alpha) << "\n"
      << "; speed alignment rate [1/time]\n"
      << "beta = " << format_number(m.beta) << "\n"
      << "; control relaxation rate [1/time]\n"
      << "gamma = " << format_number(m.gamma) << "\n"
      << "; noise volatility [length/time^1.5]\n"
      << "sigma = " << format_number(m.sigma) << "\n"
      << "potential = quadratic\n\n";

  out << "[regime]\n";
  if (m.is_uncontrolled()) {
    out << "kind = uncontrolled\n";
  } else if (const auto* open = std::get_if<OpenLoop>(&m.regime)) {
    out << "kind = open_loop\n"
        << "; controlled speed [length/time]\n"
        << "x = " << format_number(open->x) << "\n";
  } else {
    const auto& closed = std::get<ClosedLoop>(m.regime);
    out << "kind = closed_loop\n"
        << "; vehicle size in the feedback (dq - ell) / t_gap [length]\n"
        << "ell = " << format_number(closed.ell) << "\n"
        << "; time gap [time]\n"
        << "t_gap = " << format_number(closed.t_gap) << "\n";
  }
  out << "\n";

  out << "[sim]\n"
      << "; time step [time]\n"
      << "dt = " << format_number(s.sim.dt) << "\n"
      << "; horizon [time]\n"
      << "t_end = " << format_number(s.sim.t_end) << "\n"
      << "; steps between recorded samples\n"
      << "sample_stride = " << s.sim.sample_stride << "\n"
      << "seed = " << s.sim.seed << "\n";
  if (std::holds_alternative<UniformZeroSpeed>(s.sim.initial)) {
    out << "initial = uniform_zero_speed\n";
  } else if (std::holds_alternative<UniformStationary>(s.sim.initial)) {
    out << "initial = uniform_stationary\n";
  } else {
    const auto& ex = std::get<ExplicitInitial>(s.sim.initial);
    out << "initial = explicit\n"
        << "; positions in [0, L), strictly increasing [length]\n"
        << "initial_q = " << format_list(ex.q) << "\n"
        << "; speeds [length/time]\n"
        << "initial_p = " << format_list(ex.p) << "\n";
  }
  out << "\n";

  out << "[output]\n"
      << "svg = " << (s.output.svg ? "on" : "off") << "\n"
      << "unwrapped = " << (s.output.unwrapped ? "on" : "off") << "\n\n";

  out << "[manifest]\n"
      << "schema_version = " << kSchemaVersion << "\n"
      << "tool_version = " << kToolVersion << "\n"
      << "preset = " << s.preset_name << "\n";
  for (const auto& [key, value] : manifest) out << key << " = " << value << "\n";
  return out.str();
}

}  // namespace phtraffic
