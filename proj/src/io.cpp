#include "seeopt/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace seeopt {

std::string format_double(double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  if (result.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, result.ptr);
}

std::uint64_t content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

void append_vector(std::string& out, const Eigen::Ref<const Eigen::VectorXd>& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    out += ',';
    out += format_double(v[k]);
  }
}

std::string vector_header(const std::string& prefix, int n) {
  std::string out;
  for (int k = 0; k < n; ++k) out += "," + prefix + std::to_string(k);
  return out;
}

}  // namespace

std::string states_csv(const StateEnsemble& ensemble, const TimeGrid& grid) {
  const int n = static_cast<int>(ensemble.state(0, 0).size());
  std::string out = "path,step,t" + vector_header("x", n) + "\n";
  for (int p = 0; p < ensemble.n_paths(); ++p) {
    for (int i = 0; i <= ensemble.n_steps(); ++i) {
      out += std::to_string(p);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += format_double(grid.t(i));
      append_vector(out, ensemble.state(p, i));
      out += '\n';
    }
  }
  return out;
}

std::string control_csv(const ControlProcess& control, const TimeGrid& grid) {
  const int m = control.n_control();
  std::string out;
  if (control.is_deterministic()) {
    out = "step,t" + vector_header("nu", m) + "\n";
    for (int i = 0; i < control.n_steps(); ++i) {
      out += std::to_string(i);
      out += ',';
      out += format_double(grid.t(i));
      append_vector(out, control.value(0, i));
      out += '\n';
    }
    return out;
  }
  out = "path,step,t" + vector_header("nu", m) + "\n";
  for (int p = 0; p < control.n_paths(); ++p) {
    for (int i = 0; i < control.n_steps(); ++i) {
      out += std::to_string(p);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += format_double(grid.t(i));
      append_vector(out, control.value(p, i));
      out += '\n';
    }
  }
  return out;
}

std::string adjoint_csv(const AdjointPair& pair, const TimeGrid& grid, int n_state, int n_noise) {
  std::string out = "path,step,t" + vector_header("y", n_state);
  for (int mm = 0; mm < n_noise; ++mm) {
    for (int k = 0; k < n_state; ++k) {
      out += ",z" + std::to_string(k) + "_" + std::to_string(mm);
    }
  }
  out += '\n';
  for (int p = 0; p < pair.n_paths(); ++p) {
    for (int i = 0; i <= pair.n_steps(); ++i) {
      out += std::to_string(p);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += format_double(grid.t(i));
      append_vector(out, pair.y(p, i));
      append_vector(out, pair.z(p, i));
      out += '\n';
    }
  }
  return out;
}

std::string trace_csv(const std::vector<IterationRecord>& trace) {
  std::string out = "iter,cost,cost_se,grad_norm,gamma,backtracks,accepted,polish\n";
  for (const IterationRecord& r : trace) {
    out += std::to_string(r.iter);
    out += ',';
    out += format_double(r.cost);
    out += ',';
    out += format_double(r.cost_se);
    out += ',';
    out += format_double(r.grad_norm);
    out += ',';
    out += format_double(r.gamma);
    out += ',';
    out += std::to_string(r.backtracks);
    out += ',';
    out += (r.accepted ? "1" : "0");
    out += ',';
    out += (r.polish ? "1" : "0");
    out += '\n';
  }
  return out;
}

Json to_json(const RatePoint& point) {
  return Json{{"eps", point.eps}, {"value", point.value}, {"std_error", point.std_error}};
}

Json to_json(const RateReport& report) {
  Json points = Json::array();
  for (const RatePoint& p : report.points) points.push_back(to_json(p));
  return Json{{"name", report.name},     {"points", points},
              {"slope", report.slope},   {"intercept", report.intercept},
              {"slope_valid", report.slope_valid}, {"pass", report.pass},
              {"note", report.note}};
}

Json to_json(const DualityReport& report) {
  return Json{{"lhs", report.lhs},
              {"rhs", report.rhs},
              {"gap", report.gap},
              {"std_error", report.std_error},
              {"budget", report.budget},
              {"pass", report.pass},
              {"note", report.note}};
}

Json to_json(const InequalityReport& report) {
  Json lhs = Json::array();
  for (const RatePoint& p : report.lhs_by_eps) lhs.push_back(to_json(p));
  return Json{{"lhs_by_eps", lhs},
              {"tolerance_by_eps", report.tolerance_by_eps},
              {"pass", report.pass},
              {"warning", report.warning},
              {"note", report.note}};
}

Json to_json(const DerivativeReport& report) {
  Json checks = Json::array();
  for (const DerivativeCheck& c : report.checks) {
    checks.push_back(Json{{"name", c.name}, {"max_rel_error", c.max_rel_error}, {"pass", c.pass}});
  }
  return Json{{"checks", checks}, {"all_pass", report.all_pass}, {"tolerance", report.tolerance}};
}

Json to_json(const OptimalityCertificate& cert) {
  Json violations = Json::array();
  for (const ProbeViolation& v : cert.violations) {
    violations.push_back(Json{
        {"step", v.step}, {"probe", v.probe}, {"value", v.value}, {"std_error", v.std_error}});
  }
  Json trace = Json::array();
  for (const IterationRecord& r : cert.trace) {
    trace.push_back(Json{{"iter", r.iter},
                         {"cost", r.cost},
                         {"cost_se", r.cost_se},
                         {"grad_norm", r.grad_norm},
                         {"gamma", r.gamma},
                         {"backtracks", r.backtracks},
                         {"accepted", r.accepted},
                         {"polish", r.polish}});
  }
  return Json{{"tol", cert.tol},
              {"final_cost", cert.final_cost},
              {"final_cost_se", cert.final_cost_se},
              {"grad_time_l2", cert.grad_time_l2},
              {"grad_norm_budget", cert.grad_norm_budget},
              {"max_probe_value", cert.max_probe_value},
              {"pass", cert.pass},
              {"grad_norm_by_step", cert.grad_norm_by_step},
              {"violations", violations},
              {"trace", trace},
              {"seed", cert.seed}};
}

Json to_json(const GateauxReport& report) {
  Json probes = Json::array();
  for (const GateauxProbe& p : report.probes) {
    probes.push_back(Json{{"probe", p.probe},
                          {"derivative", p.derivative},
                          {"std_error", p.std_error},
                          {"violation", p.violation}});
  }
  return Json{{"eps", report.eps},
              {"tol", report.tol},
              {"probes", probes},
              {"worst", report.worst},
              {"pass", report.pass}};
}

Json to_json(const AdjointDiagnostics& diagnostics) {
  return Json{{"degree_by_step", diagnostics.degree_by_step},
              {"fallback_count", diagnostics.fallback_count},
              {"z_noise_floor", diagnostics.z_noise_floor},
              {"max_abs_z", diagnostics.max_abs_z},
              {"notes", diagnostics.notes}};
}

WrittenFile write_file(const std::string& dir, const std::string& name,
                       const std::string& bytes) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path path = fs::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
  return WrittenFile{name, content_hash(bytes)};
}

Json make_manifest(const ScenarioConfig& config, const std::vector<WrittenFile>& files) {
  Json hashes = Json::object();
  for (const WrittenFile& f : files) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(f.hash));
    hashes[f.name] = buf;
  }
  return Json{{"config", config_to_text(config)}, {"seed", config.seed}, {"files", hashes}};
}

}  // namespace seeopt
