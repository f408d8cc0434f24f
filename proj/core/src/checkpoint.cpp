#include "cdnn/checkpoint.hpp"

#include <fstream>

#include "cdnn/error.hpp"

namespace cdnn {
namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::parse, "checkpoint " + where + ": " + what);
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) malformed(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) malformed(where, std::string("missing '") + key + "'");
  return *it;
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return field(j, key, where).get<T>();
  } catch (const json::exception& e) {
    malformed(where + "/" + key, e.what());
  }
}

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) malformed(where, "expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) malformed(where + "/" + std::to_string(i), "expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) malformed(where, "expected an array of rows");
  if (j.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vector_from_json(j[i], where + "/" + std::to_string(i));
    if (row.size() != m.cols()) malformed(where + "/" + std::to_string(i), "ragged row");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

json model_to_json(const ModelParams& m) {
  json layers = json::array();
  for (const auto& p : m.layers) {
    json coeffs = json::array();
    for (int j = 0; j < p.f_out; ++j) {
      json per_scale = json::array();
      for (int g = 0; g < p.f_in; ++g) {
        std::vector<double> taps;
        for (int k = 0; k < p.taps(); ++k) taps.push_back(p.coeff(j, g, k));
        per_scale.push_back(taps);
      }
      coeffs.push_back(per_scale);
    }
    layers.push_back({{"f_in", p.f_in},
                      {"f_out", p.f_out},
                      {"order", p.order},
                      {"coeffs", coeffs},
                      {"betas", p.betas},
                      {"betas_learnable", p.betas_learnable},
                      {"skip_k0", p.skip_k0},
                      {"aggregation", to_string(p.aggregation)},
                      {"activation", to_string(p.activation)}});
  }
  return {{"task", to_string(m.task)},
          {"dim", m.dim},
          {"time_steps", m.time_steps},
          {"layers", layers},
          {"head",
           {{"hidden_activation", to_string(m.head.hidden_activation)},
            {"w1", matrix_to_json(m.head.w1)},
            {"b1", vector_to_json(m.head.b1)},
            {"w2", matrix_to_json(m.head.w2)},
            {"b2", vector_to_json(m.head.b2)}}}};
}

ModelParams model_from_json(const json& j) {
  ModelParams m;
  m.task = parse_task(get<std::string>(j, "task", "/model"));
  m.dim = get<Eigen::Index>(j, "dim", "/model");
  m.time_steps = get<Eigen::Index>(j, "time_steps", "/model");
  const json& layers = field(j, "layers", "/model");
  if (!layers.is_array()) malformed("/model/layers", "expected an array");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string where = "/model/layers/" + std::to_string(l);
    const json& lj = layers[l];
    LayerParams p;
    p.f_in = get<int>(lj, "f_in", where);
    p.f_out = get<int>(lj, "f_out", where);
    p.order = get<int>(lj, "order", where);
    p.betas = get<std::vector<double>>(lj, "betas", where);
    p.betas_learnable = get<bool>(lj, "betas_learnable", where);
    p.skip_k0 = get<bool>(lj, "skip_k0", where);
    p.aggregation = parse_aggregation(get<std::string>(lj, "aggregation", where));
    p.activation = parse_activation(get<std::string>(lj, "activation", where));
    const auto coeffs = get<std::vector<std::vector<std::vector<double>>>>(lj, "coeffs", where);
    if (coeffs.size() != static_cast<std::size_t>(p.f_out)) malformed(where + "/coeffs", "expected f_out entries");
    for (const auto& per_scale : coeffs) {
      if (per_scale.size() != static_cast<std::size_t>(p.f_in)) malformed(where + "/coeffs", "expected f_in entries per scale");
      for (const auto& taps : per_scale) {
        if (taps.size() != static_cast<std::size_t>(p.taps())) malformed(where + "/coeffs", "expected order + 1 taps");
        p.coeffs.insert(p.coeffs.end(), taps.begin(), taps.end());
      }
    }
    m.layers.push_back(std::move(p));
  }
  const json& head = field(j, "head", "/model");
  m.head.hidden_activation = parse_activation(get<std::string>(head, "hidden_activation", "/model/head"));
  m.head.w1 = matrix_from_json(field(head, "w1", "/model/head"), "/model/head/w1");
  m.head.b1 = vector_from_json(field(head, "b1", "/model/head"), "/model/head/b1");
  m.head.w2 = matrix_from_json(field(head, "w2", "/model/head"), "/model/head/w2");
  m.head.b2 = vector_from_json(field(head, "b2", "/model/head"), "/model/head/b2");
  m.validate();
  return m;
}

json checkpoint_to_json(const Checkpoint& c) {
  return {{"version", kCheckpointVersion},
          {"model", model_to_json(c.model)},
          {"covariance", matrix_to_json(c.covariance)},
          {"metadata", c.metadata}};
}

Checkpoint checkpoint_from_json(const json& j) {
  const int version = get<int>(j, "version", "");
  if (version != kCheckpointVersion) {
    malformed("/version", "unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.model = model_from_json(field(j, "model", ""));
  c.covariance = matrix_from_json(field(j, "covariance", ""), "/covariance");
  if (c.covariance.rows() != c.model.dim || c.covariance.cols() != c.model.dim) {
    throw Error(ErrorCode::dimension_mismatch, "checkpoint covariance does not match model dim");
  }
  if (auto it = j.find("metadata"); it != j.end()) c.metadata = *it;
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << checkpoint_to_json(c).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace cdnn
