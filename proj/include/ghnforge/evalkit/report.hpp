#pragma once

#include <string>
#include <vector>

namespace ghnforge {

struct EvalRow {
  std::string arch;
  std::string init;  // "predicted", "random", "loaded"
  int steps = 0;     // fine-tune steps applied
  double acc = 0;    // top-1, percent
  double lr = 0;     // winning learning rate (0 when no fine-tuning)
  bool failed = false;
};

struct EvalAggregates {
  double mean = 0, stdev = 0;
  double top10_mean = 0;
  std::string top10_rule;  // how the top-10 subset was chosen
  int64_t n = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string top10_rule = "10 best rows by accuracy";
};

// Aggregates over rows matching `init` ("" = all). Failed rows are excluded.
EvalAggregates aggregate(const EvalReport& report, const std::string& init = "");

struct WinStats {
  double win_rate = 0;  // fraction of archs where predicted beats random
  double avg_gain = 0;  // mean accuracy gain where predicted wins
  double avg_loss = 0;  // mean (negative) difference where it loses
  int64_t n_pairs = 0;
};

// Pairs rows by arch name across the "predicted" and "random" arms.
WinStats win_stats(const EvalReport& report);

void write_report_csv(const EvalReport& report, const std::string& path);
void write_report_json(const EvalReport& report, const std::string& path);
EvalReport read_report_csv(const std::string& path);

}  // namespace ghnforge
