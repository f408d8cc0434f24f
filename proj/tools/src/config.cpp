#include "cdnn/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "cdnn/error.hpp"

namespace cdnn::cli {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& pointer, const std::string& what) {
  throw Error(ErrorCode::invalid_config, (pointer.empty() ? "/" : pointer) + ": " + what);
}

double as_double(const json& v, const std::string& ptr) {
  if (!v.is_number()) invalid(ptr, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) invalid(ptr, "must be finite");
  return d;
}

std::int64_t as_int(const json& v, const std::string& ptr) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  invalid(ptr, "expected an integer");
}

bool as_bool(const json& v, const std::string& ptr) {
  if (!v.is_boolean()) invalid(ptr, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& ptr) {
  if (!v.is_string()) invalid(ptr, "expected a string");
  return v.get<std::string>();
}

template <class F>
auto as_list(const json& v, const std::string& ptr, F&& item) {
  if (!v.is_array()) invalid(ptr, "expected an array");
  std::vector<decltype(item(v, ptr))> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(item(v[i], ptr + "/" + std::to_string(i)));
  return out;
}

// Reads known keys from one JSON object and reports anything left over.
class Reader {
 public:
  Reader(const json& j, std::string ptr) : j_(j), ptr_(std::move(ptr)) {
    if (!j_.is_object()) invalid(ptr_, "expected an object");
  }

  template <class F>
  bool read(const std::string& key, F&& apply) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return false;
    apply(*it, ptr_ + "/" + key);
    return true;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) invalid(ptr_ + "/" + key, "unknown key");
    }
  }

 private:
  const json& j_;
  std::string ptr_;
  std::set<std::string> seen_;
};

void read_version(Reader& r) {
  r.read("version", [](const json& v, const std::string& p) {
    if (as_int(v, p) != kConfigVersion) invalid(p, "unsupported config version (expected 1)");
  });
}

auto positive_int = [](const json& v, const std::string& p) {
  const auto n = as_int(v, p);
  if (n < 1) invalid(p, "must be >= 1");
  return n;
};

template <class Enum, class Parse>
Enum as_enum(const json& v, const std::string& p, Parse parse) {
  const std::string s = as_string(v, p);
  try {
    return parse(s);
  } catch (const Error& e) {
    invalid(p, e.what());
  }
}

std::array<double, 3> as_triple(const json& v, const std::string& p) {
  const auto list = as_list(v, p, as_double);
  if (list.size() != 3) invalid(p, "expected exactly 3 numbers");
  return {list[0], list[1], list[2]};
}

}  // namespace

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

ExperimentConfig experiment_config_from_json(const json& j, Experiment experiment) {
  ExperimentConfig c = default_experiment_config(experiment);
  Reader r(j, "");
  read_version(r);
  r.read("experiment", [&](const json& v, const std::string& p) {
    if (as_enum<Experiment>(v, p, parse_experiment) != experiment) {
      invalid(p, "config is for a different experiment");
    }
  });
  r.read("dim", [&](const auto& v, const auto& p) { c.dim = positive_int(v, p); });
  r.read("n_samples", [&](const auto& v, const auto& p) { c.n_samples = positive_int(v, p); });
  r.read("sample_sizes", [&](const auto& v, const auto& p) {
    c.sample_sizes.clear();
    for (auto n : as_list(v, p, positive_int)) c.sample_sizes.push_back(n);
  });
  r.read("betas", [&](const auto& v, const auto& p) { c.betas = as_list(v, p, as_double); });
  r.read("noise_levels", [&](const auto& v, const auto& p) {
    c.noise_levels = as_list(v, p, [](const json& x, const std::string& q) {
      const double d = as_double(x, q);
      if (d < 0.0) invalid(q, "must be >= 0");
      return d;
    });
  });
  r.read("trials", [&](const auto& v, const auto& p) {
    const auto n = positive_int(v, p);
    if (n > std::numeric_limits<int>::max()) invalid(p, "too large");
    c.trials = static_cast<int>(n);
  });
  r.read("seed", [&](const auto& v, const auto& p) {
    const auto s = as_int(v, p);
    if (s < 0) invalid(p, "must be >= 0");
    c.seed = static_cast<std::uint64_t>(s);
  });
  r.read("threads", [&](const auto& v, const auto& p) {
    const auto n = as_int(v, p);
    if (n < 0) invalid(p, "must be >= 0");
    c.threads = static_cast<unsigned>(n);
  });
  r.read("include_baseline", [&](const auto& v, const auto& p) { c.include_baseline = as_bool(v, p); });
  r.read("filter_order", [&](const auto& v, const auto& p) {
    const auto k = as_int(v, p);
    if (k < 0 || k > 64) invalid(p, "must lie in [0, 64]");
    c.filter_order = static_cast<int>(k);
  });
  r.read("pairs_per_trial", [&](const auto& v, const auto& p) { c.pairs_per_trial = positive_int(v, p); });
  r.read("edge_prob", [&](const auto& v, const auto& p) {
    c.edge_prob = as_double(v, p);
    if (!(c.edge_prob > 0.0 && c.edge_prob <= 1.0)) invalid(p, "must lie in (0, 1]");
  });
  r.read("filter_coeffs", [&](const auto& v, const auto& p) { c.filter_coeffs = as_list(v, p, as_double); });
  r.read("informative", [&](const auto& v, const auto& p) {
    const auto n = as_int(v, p);
    if (n < 0) invalid(p, "must be >= 0");
    c.informative = n;
  });
  r.read("n_train", [&](const auto& v, const auto& p) { c.n_train = positive_int(v, p); });
  r.read("n_test", [&](const auto& v, const auto& p) { c.n_test = positive_int(v, p); });
  r.read("gd_iterations", [&](const auto& v, const auto& p) {
    const auto n = as_int(v, p);
    if (n < 0) invalid(p, "must be >= 0");
    c.gd_iterations = static_cast<int>(n);
  });
  r.read("families", [&](const auto& v, const auto& p) {
    c.families = as_list(v, p, [](const json& x, const std::string& q) {
      return as_enum<SpectrumFamily>(x, q, parse_spectrum_family);
    });
  });
  r.read("window", [&](const auto& v, const auto& p) { c.window = positive_int(v, p); });
  r.read("base_spectrum", [&](const auto& v, const auto& p) { c.base_spectrum = as_triple(v, p); });
  r.read("regime_scale", [&](const auto& v, const auto& p) { c.regime_scale = as_triple(v, p); });
  r.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    invalid("", e.what());
  }
  return c;
}

TrainSettings train_settings_from_json(const json& j, Task task) {
  TrainSettings s;
  s.model.task = task;
  s.train.loss = task == Task::classification ? Loss::cross_entropy : Loss::mse;
  std::optional<std::vector<double>> betas, beta_init;
  Reader r(j, "");
  read_version(r);
  r.read("task", [&](const auto& v, const auto& p) {
    if (as_enum<Task>(v, p, parse_task) != task) invalid(p, "does not match the data (labels given or not)");
  });
  r.read("learning_rate", [&](const auto& v, const auto& p) {
    s.train.learning_rate = as_double(v, p);
    if (s.train.learning_rate < 0.0) invalid(p, "must be >= 0");
  });
  r.read("epochs", [&](const auto& v, const auto& p) { s.train.epochs = static_cast<int>(positive_int(v, p)); });
  r.read("batch_size", [&](const auto& v, const auto& p) { s.train.batch_size = static_cast<int>(positive_int(v, p)); });
  r.read("seed", [&](const auto& v, const auto& p) {
    const auto x = as_int(v, p);
    if (x < 0) invalid(p, "must be >= 0");
    s.train.seed = static_cast<std::uint64_t>(x);
  });
  r.read("adam_beta1", [&](const auto& v, const auto& p) { s.train.adam_beta1 = as_double(v, p); });
  r.read("adam_beta2", [&](const auto& v, const auto& p) { s.train.adam_beta2 = as_double(v, p); });
  r.read("adam_eps", [&](const auto& v, const auto& p) { s.train.adam_eps = as_double(v, p); });
  r.read("dropout", [&](const auto& v, const auto& p) {
    s.train.dropout = as_double(v, p);
    if (!(s.train.dropout >= 0.0 && s.train.dropout < 1.0)) invalid(p, "must lie in [0, 1)");
  });
  r.read("loss", [&](const auto& v, const auto& p) { s.train.loss = as_enum<Loss>(v, p, parse_loss); });
  r.read("hidden_dim", [&](const auto& v, const auto& p) { s.model.hidden_dim = static_cast<int>(positive_int(v, p)); });
  r.read("num_layers", [&](const auto& v, const auto& p) {
    const auto n = as_int(v, p);
    if (n < 0) invalid(p, "must be >= 0");
    s.model.num_layers = static_cast<int>(n);
  });
  r.read("order", [&](const auto& v, const auto& p) {
    const auto k = as_int(v, p);
    if (k < 0 || k > 64) invalid(p, "must lie in [0, 64]");
    s.model.order = static_cast<int>(k);
  });
  r.read("activation", [&](const auto& v, const auto& p) { s.model.activation = as_enum<Activation>(v, p, parse_activation); });
  r.read("head_activation",
         [&](const auto& v, const auto& p) { s.model.head_activation = as_enum<Activation>(v, p, parse_activation); });
  r.read("aggregation",
         [&](const auto& v, const auto& p) { s.model.aggregation = as_enum<Aggregation>(v, p, parse_aggregation); });
  r.read("skip_k0", [&](const auto& v, const auto& p) { s.model.skip_k0 = as_bool(v, p); });
  r.read("betas_learnable", [&](const auto& v, const auto& p) { s.model.betas_learnable = as_bool(v, p); });
  const bool has_betas = r.read("betas", [&](const auto& v, const auto& p) { betas = as_list(v, p, as_double); });
  const bool has_init = r.read("beta_init", [&](const auto& v, const auto& p) { beta_init = as_list(v, p, as_double); });
  r.read("val_fraction", [&](const auto& v, const auto& p) {
    s.val_fraction = as_double(v, p);
    if (!(s.val_fraction >= 0.0 && s.val_fraction < 1.0)) invalid(p, "must lie in [0, 1)");
  });
  r.read("horizon", [&](const auto& v, const auto& p) { s.horizon = positive_int(v, p); });
  r.finish();

  if (has_init && !s.model.betas_learnable) invalid("/beta_init", "requires betas_learnable = true");
  if (has_init && has_betas) invalid("/beta_init", "give either betas or beta_init, not both");
  if (beta_init) s.model.betas = *beta_init;
  if (betas) s.model.betas = *betas;
  if (s.model.betas.empty()) invalid(has_init ? "/beta_init" : "/betas", "must not be empty");
  if (task == Task::regression && s.train.loss == Loss::cross_entropy) {
    invalid("/loss", "cross_entropy needs a classification task");
  }
  if (task == Task::classification && s.train.loss != Loss::cross_entropy) {
    invalid("/loss", "classification trains with cross_entropy");
  }
  try {
    s.train.validate();
  } catch (const Error& e) {
    invalid("", e.what());
  }
  return s;
}

json train_settings_to_json(const TrainSettings& s) {
  return {{"version", kConfigVersion},
          {"task", to_string(s.model.task)},
          {"learning_rate", s.train.learning_rate},
          {"epochs", s.train.epochs},
          {"batch_size", s.train.batch_size},
          {"seed", s.train.seed},
          {"adam_beta1", s.train.adam_beta1},
          {"adam_beta2", s.train.adam_beta2},
          {"adam_eps", s.train.adam_eps},
          {"dropout", s.train.dropout},
          {"loss", to_string(s.train.loss)},
          {"hidden_dim", s.model.hidden_dim},
          {"num_layers", s.model.num_layers},
          {"order", s.model.order},
          {"activation", to_string(s.model.activation)},
          {"head_activation", to_string(s.model.head_activation)},
          {"aggregation", to_string(s.model.aggregation)},
          {"skip_k0", s.model.skip_k0},
          {"betas_learnable", s.model.betas_learnable},
          {"betas", s.model.betas},
          {"val_fraction", s.val_fraction},
          {"horizon", s.horizon}};
}

}  // namespace cdnn::cli
