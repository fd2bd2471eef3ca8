#pragma once

#include <string>
#include <vector>

namespace natlab::metrics {

// One evaluation row; entropic quantities are bits per target token.
struct MetricsRecord {
  std::string config_id;
  uint64_t seed = 0;
  int step = 0;
  double l_nat = 0.0;
  double l_input = 0.0;
  double l_target_hat = 0.0;
  double l_mple = 0.0;  // always l_nat + l_input + l_target_hat
  double bleu = 0.0;    // 0..100
  double c_hat = 0.0;
  double confidence = 0.0;  // mean decoding confidence, log2 scale (<= 0)

  void finalize() { l_mple = l_nat + l_input + l_target_hat; }
};

std::string to_json_line(const MetricsRecord& r);
MetricsRecord from_json_line(const std::string& line);

void append_records(const std::string& path, const std::vector<MetricsRecord>& rs);
std::vector<MetricsRecord> load_records(const std::string& path);

// Header + one row per record, for external plotting.
void export_csv(const std::string& path, const std::vector<MetricsRecord>& rs);

}  // namespace natlab::metrics
