#include "natlab/metrics/records.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace natlab::metrics {

using nlohmann::json;

std::string to_json_line(const MetricsRecord& r) {
  json j;
  j["config"] = r.config_id;
  j["seed"] = r.seed;
  j["step"] = r.step;
  j["l_nat"] = r.l_nat;
  j["l_input"] = r.l_input;
  j["l_target_hat"] = r.l_target_hat;
  j["l_mple"] = r.l_mple;
  j["bleu"] = r.bleu;
  j["c_hat"] = r.c_hat;
  j["confidence"] = r.confidence;
  return j.dump();
}

MetricsRecord from_json_line(const std::string& line) {
  json j = json::parse(line);
  MetricsRecord r;
  r.config_id = j.at("config").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.step = j.at("step").get<int>();
  r.l_nat = j.at("l_nat").get<double>();
  r.l_input = j.at("l_input").get<double>();
  r.l_target_hat = j.at("l_target_hat").get<double>();
  r.l_mple = j.at("l_mple").get<double>();
  r.bleu = j.at("bleu").get<double>();
  r.c_hat = j.at("c_hat").get<double>();
  r.confidence = j.value("confidence", 0.0);
  return r;
}

void append_records(const std::string& path, const std::vector<MetricsRecord>& rs) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open metrics log '" + path + "'");
  for (const MetricsRecord& r : rs) out << to_json_line(r) << "\n";
  if (!out) throw std::runtime_error("write failure on metrics log '" + path + "'");
}

std::vector<MetricsRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics log '" + path + "'");
  std::vector<MetricsRecord> rs;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rs.push_back(from_json_line(line));
  return rs;
}

void export_csv(const std::string& path, const std::vector<MetricsRecord>& rs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open csv '" + path + "'");
  out << "config,seed,step,l_nat,l_input,l_target_hat,l_mple,bleu,c_hat,confidence\n";
  for (const MetricsRecord& r : rs) {
    json row = {r.l_nat, r.l_input,    r.l_target_hat, r.l_mple,
                r.bleu,  r.c_hat,      r.confidence};
    out << r.config_id << "," << r.seed << "," << r.step;
    for (const auto& v : row) out << "," << v.dump();
    out << "\n";
  }
}

}  // namespace natlab::metrics
