// core/src/wfsa.cc

// Copyright 2024-2026  Chainforge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "chainforge/wfsa.h"

#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>

namespace chainforge {

WfsaCheckReport ValidateWfsa(const Wfsa &g) {
  WfsaCheckReport report;
  auto add = [&report](const std::string &msg) {
    report.violations.push_back(msg);
  };

  if (g.num_states <= 0) {
    add("graph has no states");
    return report;
  }
  if (g.start < 0 || g.start >= g.num_states)
    add("start state " + std::to_string(g.start) + " out of range");
  if (int32(g.final_logw.size()) != g.num_states)
    add("final weight vector has size " + std::to_string(g.final_logw.size()) +
        ", expected " + std::to_string(g.num_states));

  bool endpoints_ok = true;
  for (size_t i = 0; i < g.arcs.size(); i++) {
    const WfsaArc &a = g.arcs[i];
    if (a.src < 0 || a.src >= g.num_states || a.dst < 0 ||
        a.dst >= g.num_states) {
      add("arc " + std::to_string(i) + " endpoint out of range");
      endpoints_ok = false;
    }
    if (a.pdf < 0 || a.pdf >= g.num_pdfs)
      add("arc " + std::to_string(i) + " pdf " + std::to_string(a.pdf) +
          " out of range");
  }

  bool has_final = false;
  for (size_t s = 0; s < g.final_logw.size(); s++)
    if (g.final_logw[s] != kLogZero) has_final = true;
  if (!has_final) add("no final state");

  // Reachability / co-reachability need sane endpoints and a sane start.
  if (!endpoints_ok || g.start < 0 || g.start >= g.num_states ||
      int32(g.final_logw.size()) != g.num_states)
    return report;

  std::vector<std::vector<int32>> fwd(g.num_states), bwd(g.num_states);
  for (const WfsaArc &a : g.arcs) {
    fwd[a.src].push_back(a.dst);
    bwd[a.dst].push_back(a.src);
  }
  auto bfs = [&](const std::vector<int32> &seeds,
                 const std::vector<std::vector<int32>> &adj) {
    std::vector<char> seen(g.num_states, 0);
    std::deque<int32> q(seeds.begin(), seeds.end());
    for (int32 s : seeds) seen[s] = 1;
    while (!q.empty()) {
      int32 s = q.front();
      q.pop_front();
      for (int32 d : adj[s])
        if (!seen[d]) {
          seen[d] = 1;
          q.push_back(d);
        }
    }
    return seen;
  };

  std::vector<char> reach = bfs({g.start}, fwd);
  std::vector<int32> finals;
  for (int32 s = 0; s < g.num_states; s++)
    if (g.final_logw[s] != kLogZero) finals.push_back(s);
  std::vector<char> coreach =
      finals.empty() ? std::vector<char>(g.num_states, 0) : bfs(finals, bwd);

  for (int32 s = 0; s < g.num_states; s++) {
    if (!reach[s]) add("state " + std::to_string(s) + " not reachable");
    if (has_final && !coreach[s])
      add("state " + std::to_string(s) + " not co-reachable");
  }
  return report;
}

void ValidateWfsaOrThrow(const Wfsa &g, const std::string &context) {
  WfsaCheckReport report = ValidateWfsa(g);
  if (report.ok()) return;
  std::string msg = context + ": invalid wfsa:";
  size_t n = std::min<size_t>(report.violations.size(), 4);
  for (size_t i = 0; i < n; i++) msg += " [" + report.violations[i] + "]";
  if (report.violations.size() > n)
    msg += " (+" + std::to_string(report.violations.size() - n) + " more)";
  throw std::invalid_argument(msg);
}

static std::string FormatWeight(double w) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", w);
  return buf;
}

void WriteWfsaText(const Wfsa &g, std::ostream &os,
                   const std::vector<int32> *arc_labels) {
  if (arc_labels != nullptr && arc_labels->size() != g.arcs.size())
    throw std::invalid_argument("WriteWfsaText: arc label count mismatch");
  os << "wfsa " << g.num_states << ' ' << g.start << ' ' << g.num_pdfs << '\n';
  for (size_t i = 0; i < g.arcs.size(); i++) {
    const WfsaArc &a = g.arcs[i];
    os << "a " << a.src << ' ' << a.dst << ' ' << a.pdf << ' '
       << FormatWeight(a.log_weight);
    if (arc_labels != nullptr) os << ' ' << (*arc_labels)[i];
    os << '\n';
  }
  for (int32 s = 0; s < g.num_states; s++)
    if (g.final_logw[s] != kLogZero)
      os << "f " << s << ' ' << FormatWeight(g.final_logw[s]) << '\n';
  os << ".\n";
}

Wfsa ReadWfsaText(std::istream &is, std::vector<int32> *arc_labels) {
  Wfsa g;
  std::string line;
  int line_no = 0;
  auto fail = [&line_no](const std::string &what) {
    throw std::runtime_error("wfsa parse error at line " +
                             std::to_string(line_no) + ": " + what);
  };

  // Header.
  for (;;) {
    if (!std::getline(is, line)) fail("missing header");
    line_no++;
    if (!line.empty()) break;
  }
  {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag >> g.num_states >> g.start >> g.num_pdfs) ||
        tag != "wfsa")
      fail("expected 'wfsa <num_states> <start> <num_pdfs>'");
    std::string rest;
    if (ss >> rest) fail("trailing tokens after header");
  }
  if (g.num_states < 0) fail("negative state count");
  g.final_logw.assign(g.num_states, kLogZero);

  bool terminated = false;
  while (std::getline(is, line)) {
    line_no++;
    if (line.empty()) continue;
    if (line == ".") {
      terminated = true;
      break;
    }
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "a") {
      WfsaArc a;
      if (!(ss >> a.src >> a.dst >> a.pdf >> a.log_weight))
        fail("malformed arc line");
      int32 label = 0;
      if (ss >> label) {
        if (arc_labels == nullptr) fail("unexpected sixth arc field");
      }
      std::string rest;
      if (ss >> rest) fail("trailing tokens on arc line");
      g.arcs.push_back(a);
      if (arc_labels != nullptr) arc_labels->push_back(label);
    } else if (tag == "f") {
      int32 s;
      double w;
      if (!(ss >> s >> w)) fail("malformed final line");
      if (s < 0 || s >= g.num_states) fail("final state out of range");
      g.final_logw[s] = w;
    } else {
      fail("unknown record tag '" + tag + "'");
    }
  }
  if (!terminated) fail("missing '.' terminator");
  return g;
}

void WriteWfsaFile(const Wfsa &g, const std::string &path,
                   const std::vector<int32> *arc_labels) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  WriteWfsaText(g, os, arc_labels);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Wfsa ReadWfsaFile(const std::string &path, std::vector<int32> *arc_labels) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return ReadWfsaText(is, arc_labels);
}

ArcIndex::ArcIndex(const Wfsa &g) : rows_(g.num_states) {
  for (size_t i = 0; i < g.arcs.size(); i++)
    rows_[g.arcs[i].src].push_back(int32(i));
}

}  // namespace chainforge
