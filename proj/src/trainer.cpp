#include "plugdef/trainer.hpp"

#include <json.hpp>

namespace plugdef::train {

using nlohmann::json;

void append_jsonl_row(std::ostream& os, const CurveRow& r) {
  json j{{"epoch", r.epoch}, {"loss", r.loss}, {"train_ca", r.train_ca}, {"train_aa", r.train_aa}};
  if (r.has_test) {
    j["test_ca"] = r.test_ca;
    j["test_aa"] = r.test_aa;
  } else {
    j["test_ca"] = nullptr;
    j["test_aa"] = nullptr;
  }
  os << j.dump() << "\n";
}

void CurveLog::to_jsonl(std::ostream& os) const {
  for (const auto& r : rows) append_jsonl_row(os, r);
}

CurveLog CurveLog::from_jsonl(std::istream& is) {
  CurveLog log;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    CurveRow r;
    r.epoch = j.at("epoch").get<int>();
    r.loss = j.at("loss").get<double>();
    r.train_ca = j.at("train_ca").get<double>();
    r.train_aa = j.at("train_aa").get<double>();
    if (j.contains("test_ca") && !j.at("test_ca").is_null()) {
      r.has_test = true;
      r.test_ca = j.at("test_ca").get<double>();
      r.test_aa = j.at("test_aa").get<double>();
    }
    log.rows.push_back(r);
  }
  return log;
}

void CurveLog::to_csv(std::ostream& os) const {
  os << "epoch,loss,train_ca,train_aa,test_ca,test_aa\n";
  for (const auto& r : rows) {
    os << r.epoch << "," << r.loss << "," << r.train_ca << "," << r.train_aa << ",";
    if (r.has_test)
      os << r.test_ca << "," << r.test_aa;
    else
      os << ",";
    os << "\n";
  }
}

} // namespace plugdef::train
