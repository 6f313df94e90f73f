#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "vistat/error.hpp"
#include "vistat/tgmodel.hpp"

namespace vistat {

namespace {

std::string normalize_key(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '-' || c == ' ') c = '_';
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

constexpr double kSeluScale = 1.0507009873554805;
constexpr double kSeluAlpha = 1.6732632423543772;
constexpr double kLeakySlope = 0.01;

}  // namespace

Activation parse_activation(std::string_view name) {
  const auto key = normalize_key(name);
  if (key == "relu") return Activation::Relu;
  if (key == "elu") return Activation::Elu;
  if (key == "selu") return Activation::Selu;
  if (key == "leaky_relu" || key == "leakyrelu") return Activation::LeakyRelu;
  if (key == "identity" || key == "linear") return Activation::Identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Elu: return "elu";
    case Activation::Selu: return "selu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

TimeCell parse_time_cell(std::string_view name) {
  const auto key = normalize_key(name);
  if (key == "rnn" || key == "plain_recurrent" || key == "elman") return TimeCell::Rnn;
  if (key == "lstm") return TimeCell::Lstm;
  throw ConfigError("unknown time cell '" + std::string(name) + "'");
}

std::string_view to_string(TimeCell c) { return c == TimeCell::Rnn ? "rnn" : "lstm"; }

ModelKind parse_model_kind(std::string_view name) {
  const auto key = normalize_key(name);
  if (key == "baseline") return ModelKind::Baseline;
  if (key == "tg" || key == "time_geometric") return ModelKind::TimeGeometric;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind k) {
  return k == ModelKind::Baseline ? "baseline" : "tg";
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Elu: return z > 0.0 ? z : std::expm1(z);
    case Activation::Selu: return z > 0.0 ? kSeluScale * z : kSeluScale * kSeluAlpha * std::expm1(z);
    case Activation::LeakyRelu: return z > 0.0 ? z : kLeakySlope * z;
    case Activation::Identity: return z;
  }
  return z;
}

double activate_derivative(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Elu: return z > 0.0 ? 1.0 : std::exp(z);
    case Activation::Selu: return z > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(z);
    case Activation::LeakyRelu: return z > 0.0 ? 1.0 : kLeakySlope;
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

void TgConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(m >= 1, "m must be >= 1");
  require(q >= 1, "q must be >= 1");
  require(features >= 1, "features must be >= 1");
  require(time_layers >= 1 && time_hidden >= 1, "time component dimensions must be >= 1");
  require(gcn_layers >= 1 && gcn_hidden >= 1 && geo_lstm_hidden >= 1,
          "geometric component dimensions must be >= 1");
  require(!fc_widths.empty(), "fully connected stack must have at least one layer");
  require(std::all_of(fc_widths.begin(), fc_widths.end(), [](auto w) { return w >= 1; }),
          "fully connected widths must be >= 1");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout rate must lie in [0,1)");
  require(l2 >= 0.0, "l2 coefficient must be >= 0");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning rate must be finite and >= 0");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(batch_size >= 1, "batch size must be >= 1");
}

namespace {

struct PublishedSettings {
  const char* name;
  TimeCell cell;
  std::size_t q;
  double lr;
  std::size_t neurons, layers, batch;
  Activation act;
  double tg_dropout;
  std::size_t gcn_neurons, gcn_layers, lstm_neurons;
  bool dropout, skip, directed;
};

// Sequence length is 100 and the FC stack 128/64/32/16 for every row.
constexpr PublishedSettings kPublished[] = {
    {"tuned-lstm-1d", TimeCell::Lstm, 1, 0.000176, 190, 2, 40, Activation::Selu, 0.37, 40, 9, 40, true, true, true},
    {"tuned-rnn-1d", TimeCell::Rnn, 1, 0.000985, 110, 2, 160, Activation::Selu, 0.22, 110, 7, 100, true, false, true},
    {"tuned-lstm-5d", TimeCell::Lstm, 5, 0.000731, 190, 4, 160, Activation::Selu, 0.25, 140, 5, 160, false, true, true},
    {"tuned-rnn-5d", TimeCell::Rnn, 5, 0.000168, 140, 2, 160, Activation::Selu, 0.13, 160, 10, 20, true, true, true},
    {"tuned-lstm-20d", TimeCell::Lstm, 20, 0.000899, 180, 6, 80, Activation::Selu, 0.21, 130, 5, 50, false, false, false},
    {"tuned-rnn-20d", TimeCell::Rnn, 20, 0.000818, 70, 3, 80, Activation::Elu, 0.11, 110, 6, 190, true, false, false},
};

}  // namespace

TgConfig preset(std::string_view name) {
  if (name == "desk") return TgConfig{};
  for (const auto& s : kPublished) {
    if (name != s.name) continue;
    TgConfig c;
    c.m = 100;
    c.q = s.q;
    c.time_cell = s.cell;
    c.learning_rate = s.lr;
    c.time_hidden = s.neurons;
    c.time_layers = s.layers;
    c.batch_size = s.batch;
    c.activation = s.act;
    c.gcn_activation = s.act;
    c.dropout_rate = s.tg_dropout;
    c.gcn_hidden = s.gcn_neurons;
    c.gcn_layers = s.gcn_layers;
    c.geo_lstm_hidden = s.lstm_neurons;
    c.dropout = s.dropout;
    c.skip_layer = s.skip;
    c.directed_graph = s.directed;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out{"desk"};
  for (const auto& s : kPublished) out.emplace_back(s.name);
  return out;
}

std::string config_to_json(const TgConfig& c) {
  nlohmann::ordered_json j;
  j["m"] = c.m;
  j["q"] = c.q;
  j["features"] = c.features;
  j["time_cell"] = to_string(c.time_cell);
  j["time_layers"] = c.time_layers;
  j["time_hidden"] = c.time_hidden;
  j["gcn_layers"] = c.gcn_layers;
  j["gcn_hidden"] = c.gcn_hidden;
  j["geo_lstm_hidden"] = c.geo_lstm_hidden;
  j["directed_graph"] = c.directed_graph;
  j["fc_widths"] = c.fc_widths;
  j["activation"] = to_string(c.activation);
  j["gcn_activation"] = to_string(c.gcn_activation);
  j["skip_layer"] = c.skip_layer;
  j["dropout"] = c.dropout;
  j["dropout_rate"] = c.dropout_rate;
  j["learning_rate"] = c.learning_rate;
  j["l2"] = c.l2;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  return j.dump();
}

TgConfig config_from_json(std::string_view text, TgConfig c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "m") c.m = v.get<std::size_t>();
      else if (k == "q") c.q = v.get<std::size_t>();
      else if (k == "features") c.features = v.get<std::size_t>();
      else if (k == "time_cell") c.time_cell = parse_time_cell(v.get<std::string>());
      else if (k == "time_layers") c.time_layers = v.get<std::size_t>();
      else if (k == "time_hidden") c.time_hidden = v.get<std::size_t>();
      else if (k == "gcn_layers") c.gcn_layers = v.get<std::size_t>();
      else if (k == "gcn_hidden") c.gcn_hidden = v.get<std::size_t>();
      else if (k == "geo_lstm_hidden") c.geo_lstm_hidden = v.get<std::size_t>();
      else if (k == "directed_graph") c.directed_graph = v.get<bool>();
      else if (k == "fc_widths") c.fc_widths = v.get<std::vector<std::size_t>>();
      else if (k == "activation") c.activation = parse_activation(v.get<std::string>());
      else if (k == "gcn_activation") c.gcn_activation = parse_activation(v.get<std::string>());
      else if (k == "skip_layer") c.skip_layer = v.get<bool>();
      else if (k == "dropout") c.dropout = v.get<bool>();
      else if (k == "dropout_rate") c.dropout_rate = v.get<double>();
      else if (k == "learning_rate") c.learning_rate = v.get<double>();
      else if (k == "l2") c.l2 = v.get<double>();
      else if (k == "max_epochs") c.max_epochs = v.get<std::size_t>();
      else if (k == "patience") c.patience = v.get<std::size_t>();
      else if (k == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown model config key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config value: ") + e.what());
  }
  return c;
}

}  // namespace vistat
