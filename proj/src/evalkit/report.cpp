#include "ghnforge/evalkit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ghnforge/core/errors.hpp"

namespace ghnforge {

using json = nlohmann::json;

EvalAggregates aggregate(const EvalReport& report, const std::string& init) {
  EvalAggregates agg;
  agg.top10_rule = report.top10_rule;
  std::vector<double> accs;
  for (const auto& r : report.rows) {
    if (r.failed) continue;
    if (!init.empty() && r.init != init) continue;
    if (r.acc < 0 || r.acc > 100) throw ShapeMismatch("accuracy out of [0,100] in report");
    accs.push_back(r.acc);
  }
  agg.n = static_cast<int64_t>(accs.size());
  if (accs.empty()) return agg;
  double sum = 0;
  for (double a : accs) sum += a;
  agg.mean = sum / static_cast<double>(accs.size());
  double ss = 0;
  for (double a : accs) ss += (a - agg.mean) * (a - agg.mean);
  agg.stdev = std::sqrt(ss / static_cast<double>(accs.size()));
  std::sort(accs.rbegin(), accs.rend());
  size_t k = std::min<size_t>(10, accs.size());
  double tsum = 0;
  for (size_t i = 0; i < k; ++i) tsum += accs[i];
  agg.top10_mean = tsum / static_cast<double>(k);
  return agg;
}

WinStats win_stats(const EvalReport& report) {
  std::map<std::string, std::pair<const EvalRow*, const EvalRow*>> pairs;
  for (const auto& r : report.rows) {
    if (r.failed) continue;
    if (r.init == "predicted") pairs[r.arch].first = &r;
    if (r.init == "random") pairs[r.arch].second = &r;
  }
  WinStats w;
  double gain = 0, loss = 0;
  int64_t wins = 0, losses = 0;
  for (const auto& [arch, pr] : pairs) {
    if (!pr.first || !pr.second) continue;
    ++w.n_pairs;
    double diff = pr.first->acc - pr.second->acc;
    if (diff > 0) {
      ++wins;
      gain += diff;
    } else if (diff < 0) {
      ++losses;
      loss += diff;
    }
  }
  if (w.n_pairs) w.win_rate = static_cast<double>(wins) / static_cast<double>(w.n_pairs);
  if (wins) w.avg_gain = gain / static_cast<double>(wins);
  if (losses) w.avg_loss = loss / static_cast<double>(losses);
  return w;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report: " + path);
  out << "arch,init,steps,acc,lr,failed\n";
  char row[256];
  for (const auto& r : report.rows) {
    std::snprintf(row, sizeof(row), "%s,%s,%d,%.6f,%.10g,%d\n", r.arch.c_str(), r.init.c_str(),
                  r.steps, r.acc, r.lr, r.failed ? 1 : 0);
    out << row;
  }
}

void write_report_json(const EvalReport& report, const std::string& path) {
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"arch", r.arch},
                    {"init", r.init},
                    {"steps", r.steps},
                    {"acc", r.acc},
                    {"lr", r.lr},
                    {"failed", r.failed}});
  json j{{"rows", rows}, {"top10_rule", report.top10_rule}};
  for (const std::string& arm : {std::string("predicted"), std::string("random"), std::string()}) {
    EvalAggregates a = aggregate(report, arm);
    if (!a.n) continue;
    j["aggregates"][arm.empty() ? "all" : arm] = {
        {"mean", a.mean}, {"std", a.stdev}, {"top10_mean", a.top10_mean}, {"n", a.n}};
  }
  WinStats w = win_stats(report);
  if (w.n_pairs)
    j["wins"] = {{"win_rate", w.win_rate},
                 {"avg_gain", w.avg_gain},
                 {"avg_loss", w.avg_loss},
                 {"n_pairs", w.n_pairs}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

EvalReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report: " + path);
  EvalReport rep;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty report: " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    EvalRow r;
    std::string steps, acc, lr, failed;
    std::getline(ss, r.arch, ',');
    std::getline(ss, r.init, ',');
    std::getline(ss, steps, ',');
    std::getline(ss, acc, ',');
    std::getline(ss, lr, ',');
    std::getline(ss, failed, ',');
    r.steps = std::stoi(steps);
    r.acc = std::stod(acc);
    r.lr = std::stod(lr);
    r.failed = failed == "1";
    rep.rows.push_back(r);
  }
  return rep;
}

}  // namespace ghnforge
