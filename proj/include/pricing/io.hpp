#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pricing/config.hpp"
#include "pricing/curves.hpp"
#include "pricing/errors.hpp"
#include "pricing/exante.hpp"
#include "pricing/mech.hpp"

namespace pricing {

inline std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_text(const std::string& path, const std::string& body) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericalError("cannot write " + path);
  out << body;
}

inline void write_curve_csv(const std::string& path, const std::vector<double>& qs,
                            const std::vector<double>& vals) {
  std::string body = "q,payoff\n";
  for (std::size_t i = 0; i < qs.size(); ++i)
    body += fmt12(qs[i]) + "," + fmt12(vals[i]) + "\n";
  write_text(path, body);
}

inline json closeness_to_json(const ClosenessReport& rep) {
  json per_q = json::array();
  for (const auto& row : rep.per_q)
    per_q.push_back({{"q", row.q}, {"A", row.A}, {"Pbar_runmax", row.Pbar_runmax}, {"ratio", row.ratio}});
  json j{{"zeta", rep.zeta},
         {"bound", rep.bound},
         {"objective", to_string(rep.objective)},
         {"solver", rep.solver},
         {"per_q", per_q}};
  if (std::isfinite(rep.kappa)) j["kappa"] = rep.kappa;
  return j;
}

inline json sim_to_json(const SimResult& r) {
  return json{{"objective", to_string(r.objective)}, {"mean", r.mean},
              {"std_error", r.std_error},           {"samples", r.samples},
              {"serve_prob", r.serve_prob},         {"seed", r.seed}};
}

}  // namespace pricing
