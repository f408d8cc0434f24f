#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "cdnn/error.hpp"
#include "cdnn/lab.hpp"

namespace cdnn {
namespace {

using nlohmann::json;

constexpr std::string_view kParamPrefix = "param.";
constexpr std::string_view kMetricPrefix = "metric.";

// An empty string is written as "" so it stays distinct from an absent cell.
std::string quote_csv(const std::string& s) {
  if (!s.empty() && s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Cell {
  std::string text;
  bool quoted = false;
};

std::vector<Cell> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<Cell> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back().text += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back().text += c;
      }
    } else if (c == '"') {
      quoted = true;
      cells.back().quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else if (c != '\r') {
      cells.back().text += c;
    }
  }
  if (quoted) throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": unterminated quote");
  return cells;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::parse, where + ": not a number: '" + s + "'");
  }
  return v;
}

template <class Int>
Int parse_int(const std::string& s, const std::string& where) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::parse, where + ": not an integer: '" + s + "'");
  }
  return v;
}

void add_unique(std::vector<std::string>& keys, const std::string& k) {
  if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
}

}  // namespace

bool TrialRecord::has_metric(std::string_view name) const {
  return std::any_of(metrics.begin(), metrics.end(), [&](const auto& kv) { return kv.first == name; });
}

double TrialRecord::metric(std::string_view name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  throw Error(ErrorCode::invalid_argument, "record has no metric '" + std::string(name) + "'");
}

const std::string& TrialRecord::param(std::string_view name) const {
  for (const auto& [k, v] : params)
    if (k == name) return v;
  throw Error(ErrorCode::invalid_argument, "record has no parameter '" + std::string(name) + "'");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  std::vector<std::string> params, metrics;
  for (const auto& r : records) {
    for (const auto& kv : r.params) add_unique(params, kv.first);
    for (const auto& kv : r.metrics) add_unique(metrics, kv.first);
  }
  out << "experiment,trial,seed";
  for (const auto& p : params) out << ',' << quote_csv(std::string(kParamPrefix) + p);
  for (const auto& m : metrics) out << ',' << quote_csv(std::string(kMetricPrefix) + m);
  out << '\n';
  for (const auto& r : records) {
    out << quote_csv(r.experiment) << ',' << r.trial << ',' << r.seed;
    for (const auto& p : params) {
      out << ',';
      for (const auto& [k, v] : r.params)
        if (k == p) out << quote_csv(v);
    }
    for (const auto& m : metrics) {
      out << ',';
      for (const auto& [k, v] : r.metrics)
        if (k == m) out << format_double(v);
    }
    out << '\n';
  }
}

std::vector<TrialRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse, "empty results file");
  std::vector<std::string> header;
  for (auto& cell : split_csv_line(line, 1)) header.push_back(std::move(cell.text));
  if (header.size() < 3 || header[0] != "experiment" || header[1] != "trial" || header[2] != "seed") {
    throw Error(ErrorCode::parse, "line 1: expected header starting experiment,trial,seed");
  }
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (!header[c].starts_with(kParamPrefix) && !header[c].starts_with(kMetricPrefix)) {
      throw Error(ErrorCode::parse, "line 1: unknown column '" + header[c] + "'");
    }
  }
  std::vector<TrialRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line, line_no);
    const std::string where = "line " + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::parse, where + ": expected " + std::to_string(header.size()) + " cells");
    }
    TrialRecord r;
    r.experiment = cells[0].text;
    r.trial = parse_int<std::int64_t>(cells[1].text, where);
    r.seed = parse_int<std::uint64_t>(cells[2].text, where);
    for (std::size_t c = 3; c < header.size(); ++c) {
      if (cells[c].text.empty() && !cells[c].quoted) continue;
      if (header[c].starts_with(kParamPrefix)) {
        r.params.emplace_back(header[c].substr(kParamPrefix.size()), cells[c].text);
      } else {
        r.metrics.emplace_back(header[c].substr(kMetricPrefix.size()), parse_double(cells[c].text, where));
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

json records_to_json(const std::vector<TrialRecord>& records) {
  json out = json::array();
  for (const auto& r : records) {
    json params = json::array(), metrics = json::array();
    for (const auto& [k, v] : r.params) params.push_back({k, v});
    for (const auto& [k, v] : r.metrics) metrics.push_back({k, v});
    out.push_back({{"experiment", r.experiment},
                   {"trial", r.trial},
                   {"seed", r.seed},
                   {"params", params},
                   {"metrics", metrics}});
  }
  return out;
}

std::vector<TrialRecord> records_from_json(const json& j) {
  std::vector<TrialRecord> records;
  try {
    for (const auto& rj : j) {
      TrialRecord r;
      r.experiment = rj.at("experiment").get<std::string>();
      r.trial = rj.at("trial").get<std::int64_t>();
      r.seed = rj.at("seed").get<std::uint64_t>();
      r.params = rj.at("params").get<std::vector<std::pair<std::string, std::string>>>();
      r.metrics = rj.at("metrics").get<std::vector<std::pair<std::string, double>>>();
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("records: ") + e.what());
  }
  return records;
}

json summarize_records(const std::vector<TrialRecord>& records, const std::vector<std::string>& group_by) {
  struct Acc {
    std::size_t order = 0;
    std::vector<std::string> key;
    std::vector<std::string> metric_order;
    std::map<std::string, std::vector<double>> values;
  };
  std::map<std::vector<std::string>, Acc> groups;
  for (const auto& r : records) {
    std::vector<std::string> key;
    for (const auto& g : group_by) {
      std::string v;
      for (const auto& [k, val] : r.params)
        if (k == g) v = val;
      key.push_back(v);
    }
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) {
      it->second.order = groups.size() - 1;
      it->second.key = key;
    }
    for (const auto& [k, v] : r.metrics) {
      if (!it->second.values.count(k)) it->second.metric_order.push_back(k);
      it->second.values[k].push_back(v);
    }
  }
  std::vector<const Acc*> ordered;
  for (const auto& kv : groups) ordered.push_back(&kv.second);
  std::sort(ordered.begin(), ordered.end(), [](const Acc* a, const Acc* b) { return a->order < b->order; });

  json out = json::array();
  for (const Acc* acc : ordered) {
    json params = json::object();
    for (std::size_t i = 0; i < group_by.size(); ++i) params[group_by[i]] = acc->key[i];
    json metrics = json::object();
    for (const auto& name : acc->metric_order) {
      std::vector<double> v = acc->values.at(name);
      // sorted so the reduction does not depend on record order
      std::sort(v.begin(), v.end());
      double sum = 0.0;
      for (double x : v) sum += x;
      const double mean = sum / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      metrics[name] = {{"mean", mean},
                       {"std", v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0},
                       {"min", v.front()},
                       {"max", v.back()},
                       {"count", v.size()}};
    }
    out.push_back({{"params", params}, {"metrics", metrics}});
  }
  return out;
}

}  // namespace cdnn
