#include "seeopt/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace seeopt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(int line, const std::string& message) {
  throw std::runtime_error("config line " + std::to_string(line) + ": " + message);
}

double parse_double(const std::string& value, int line) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    fail(line, "expected a number, got '" + value + "'");
  }
  if (used != value.size()) fail(line, "trailing characters after number in '" + value + "'");
  return out;
}

std::int64_t parse_int(const std::string& value, int line) {
  std::size_t used = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(value, &used);
  } catch (const std::exception&) {
    fail(line, "expected an integer, got '" + value + "'");
  }
  if (used != value.size()) fail(line, "trailing characters after integer in '" + value + "'");
  return out;
}

bool parse_bool(const std::string& value, int line) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  fail(line, "expected on/off, got '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& value, int line) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(line, "empty entry in list '" + value + "'");
    out.push_back(parse_double(item, line));
  }
  if (out.empty()) fail(line, "empty list");
  return out;
}

}  // namespace

Mutation parse_mutation(const std::string& name) {
  if (name == "none") return Mutation::none;
  if (name == "drop-sigma-nu-term") return Mutation::drop_sigma_nu_term;
  if (name == "flip-b-nu-sign") return Mutation::flip_b_nu_sign;
  if (name == "drop-ell-x-term") return Mutation::drop_ell_x_term;
  throw std::runtime_error(
      "unknown mutation '" + name +
      "' (expected none, drop-sigma-nu-term, flip-b-nu-sign, or drop-ell-x-term)");
}

std::string mutation_name(Mutation m) {
  switch (m) {
    case Mutation::none: return "none";
    case Mutation::drop_sigma_nu_term: return "drop-sigma-nu-term";
    case Mutation::flip_b_nu_sign: return "flip-b-nu-sign";
    case Mutation::drop_ell_x_term: return "drop-ell-x-term";
  }
  throw std::logic_error("unreachable mutation value");
}

void ScenarioConfig::validate() const {
  if (scenario != "lq-linear-phi" && scenario != "lq-quadratic-phi" && scenario != "tanh-drift")
    throw std::runtime_error("unknown scenario '" + scenario + "'");
  if (n_state < 0) throw std::runtime_error("n_state must be >= 0");
  if (!(horizon > 0.0)) throw std::runtime_error("horizon must be positive");
  if (n_steps < 1) throw std::runtime_error("n_steps must be >= 1");
  if (n_paths < 0) throw std::runtime_error("n_paths must be >= 0");
  if (workers < 1) throw std::runtime_error("workers must be >= 1");
  if (!(noise_scale >= 0.0)) throw std::runtime_error("noise_scale must be >= 0");
  if (regression_degree < 0) throw std::runtime_error("regression_degree must be >= 0");
  if (regression_modes < 0) throw std::runtime_error("regression_modes must be >= 0");
  if (!(step_size > 0.0)) throw std::runtime_error("step_size must be positive");
  if (max_iters < 0) throw std::runtime_error("max_iters must be >= 0");
  if (!(grad_tol > 0.0)) throw std::runtime_error("grad_tol must be positive");
  if (epsilons.size() < 4) throw std::runtime_error("epsilons needs at least 4 entries");
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (!(epsilons[k] > 0.0)) throw std::runtime_error("epsilons must be positive");
    if (k > 0 && !(epsilons[k] < epsilons[k - 1]))
      throw std::runtime_error("epsilons must be strictly decreasing");
  }
  if (!(slope_lo < slope_hi)) throw std::runtime_error("need slope_lo < slope_hi");
  if (!(decay_factor > 0.0 && decay_factor < 1.0))
    throw std::runtime_error("decay_factor must be in (0, 1)");
  if (!(sigma_mult > 0.0)) throw std::runtime_error("sigma_mult must be positive");
  if (!(linear_floor > 0.0)) throw std::runtime_error("linear_floor must be positive");
  if (!(certificate_tol_factor > 0.0))
    throw std::runtime_error("certificate_tol_factor must be positive");
  if (out_dir.empty()) throw std::runtime_error("out_dir must be nonempty");
}

ScenarioConfig parse_config_text(const std::string& text) {
  ScenarioConfig config;
  std::unordered_set<std::string> seen;
  std::stringstream ss(text);
  std::string raw;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const std::size_t eq = raw.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value', got '" + raw + "'");
    const std::string key = trim(raw.substr(0, eq));
    const std::string value = trim(raw.substr(eq + 1));
    if (key.empty()) fail(line, "empty key");
    if (value.empty()) fail(line, "empty value for key '" + key + "'");
    if (!seen.insert(key).second) fail(line, "duplicate key '" + key + "'");

    if (key == "scenario") config.scenario = value;
    else if (key == "n_state") config.n_state = static_cast<int>(parse_int(value, line));
    else if (key == "horizon") config.horizon = parse_double(value, line);
    else if (key == "n_steps") config.n_steps = static_cast<int>(parse_int(value, line));
    else if (key == "n_paths") config.n_paths = static_cast<int>(parse_int(value, line));
    else if (key == "seed") config.seed = parse_int(value, line);
    else if (key == "workers") config.workers = static_cast<int>(parse_int(value, line));
    else if (key == "noise_scale") config.noise_scale = parse_double(value, line);
    else if (key == "regression_degree")
      config.regression_degree = static_cast<int>(parse_int(value, line));
    else if (key == "regression_modes")
      config.regression_modes = static_cast<int>(parse_int(value, line));
    else if (key == "step_size") config.step_size = parse_double(value, line);
    else if (key == "max_iters") config.max_iters = static_cast<int>(parse_int(value, line));
    else if (key == "grad_tol") config.grad_tol = parse_double(value, line);
    else if (key == "armijo") config.armijo = parse_bool(value, line);
    else if (key == "epsilons") config.epsilons = parse_double_list(value, line);
    else if (key == "slope_lo") config.slope_lo = parse_double(value, line);
    else if (key == "slope_hi") config.slope_hi = parse_double(value, line);
    else if (key == "decay_factor") config.decay_factor = parse_double(value, line);
    else if (key == "sigma_mult") config.sigma_mult = parse_double(value, line);
    else if (key == "linear_floor") config.linear_floor = parse_double(value, line);
    else if (key == "certificate_tol_factor")
      config.certificate_tol_factor = parse_double(value, line);
    else if (key == "mutate") {
      try {
        config.mutate = parse_mutation(value);
      } catch (const std::exception& e) {
        fail(line, e.what());
      }
    } else if (key == "out_dir") config.out_dir = value;
    else fail(line, "unknown key '" + key + "'");
  }
  config.validate();
  return config;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string config_to_text(const ScenarioConfig& config) {
  std::ostringstream out;
  out.precision(17);
  out << "scenario = " << config.scenario << "\n";
  out << "n_state = " << config.n_state << "\n";
  out << "horizon = " << config.horizon << "\n";
  out << "n_steps = " << config.n_steps << "\n";
  out << "n_paths = " << config.n_paths << "\n";
  out << "seed = " << config.seed << "\n";
  out << "workers = " << config.workers << "\n";
  out << "noise_scale = " << config.noise_scale << "\n";
  out << "regression_degree = " << config.regression_degree << "\n";
  out << "regression_modes = " << config.regression_modes << "\n";
  out << "step_size = " << config.step_size << "\n";
  out << "max_iters = " << config.max_iters << "\n";
  out << "grad_tol = " << config.grad_tol << "\n";
  out << "armijo = " << (config.armijo ? "on" : "off") << "\n";
  out << "epsilons = ";
  for (std::size_t k = 0; k < config.epsilons.size(); ++k) {
    if (k > 0) out << ", ";
    out << config.epsilons[k];
  }
  out << "\n";
  out << "slope_lo = " << config.slope_lo << "\n";
  out << "slope_hi = " << config.slope_hi << "\n";
  out << "decay_factor = " << config.decay_factor << "\n";
  out << "sigma_mult = " << config.sigma_mult << "\n";
  out << "linear_floor = " << config.linear_floor << "\n";
  out << "certificate_tol_factor = " << config.certificate_tol_factor << "\n";
  out << "mutate = " << mutation_name(config.mutate) << "\n";
  out << "out_dir = " << config.out_dir << "\n";
  return out.str();
}

}  // namespace seeopt
