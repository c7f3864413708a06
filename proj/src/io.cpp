#include "gcvae/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "gcvae/errors.hpp"

namespace gcvae {

using Json = nlohmann::ordered_json;

namespace {

std::size_t line_at(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// First line holding `"key"` followed by ':'; 0 when not found.
std::size_t line_of_key(std::string_view text, const std::string& key) {
  const std::string quoted = "\"" + key + "\"";
  for (std::size_t pos = text.find(quoted); pos != std::string_view::npos; pos = text.find(quoted, pos + 1)) {
    std::size_t after = pos + quoted.size();
    while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
    if (after < text.size() && text[after] == ':') return line_at(text, pos);
  }
  return 0;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(Json(std::vector<double>(m.row(r).begin(), m.row(r).end())));
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw DataError(what + ": expected a non-empty array of rows");
  const std::size_t cols = j.front().size();
  Matrix m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw DataError(what + ": ragged row " + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Json mlp_to_json(const MlpParams& p) {
  Json layers = Json::array();
  for (const auto& l : p.layers) {
    Json jl;
    jl["activation"] = to_string(l.activation);
    jl["weight"] = matrix_to_json(l.weight);
    jl["bias"] = l.bias;
    layers.push_back(std::move(jl));
  }
  return Json{{"layers", std::move(layers)}};
}

MlpParams mlp_from_json(const Json& j, const std::string& what) {
  MlpParams p;
  for (const auto& jl : j.at("layers")) {
    DenseLayer l;
    l.activation = activation_from_string(jl.at("activation").get<std::string>());
    l.weight = matrix_from_json(jl.at("weight"), what + " weight");
    l.bias = jl.at("bias").get<std::vector<double>>();
    if (l.bias.size() != l.weight.rows()) throw DataError(what + ": bias length does not match weight rows");
    if (!p.layers.empty() && p.layers.back().out_dim() != l.in_dim()) throw DataError(what + ": layer widths do not chain");
    p.layers.push_back(std::move(l));
  }
  if (p.layers.empty()) throw DataError(what + ": no layers");
  return p;
}

Json ranges_to_json(const std::vector<ColumnRange>& r) {
  Json a = Json::array();
  for (const auto& c : r) a.push_back(Json::array({c.min, c.max}));
  return a;
}

std::vector<ColumnRange> ranges_from_json(const Json& j) {
  std::vector<ColumnRange> r;
  for (const auto& c : j) r.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  return r;
}

Json schedule_to_json(const BetaSchedule& s) {
  if (s.kind == BetaSchedule::Kind::constant) return Json{{"kind", "constant"}};
  return Json{{"kind", "linear_ramp"}, {"start_epoch", s.start_epoch}, {"end_epoch", s.end_epoch}};
}

Json config_json(const TrainConfig& c) {
  Json j;
  j["K"] = c.K;
  j["J"] = c.J;
  j["L"] = c.L;
  j["beta_pretrain"] = c.beta_pretrain;
  j["beta_train"] = c.beta_train;
  j["beta_schedule"] = schedule_to_json(c.beta_schedule);
  j["lr_net_pretrain"] = c.lr_net_pretrain;
  j["lr_net"] = c.lr_net;
  j["lr_gmm"] = c.lr_gmm;
  j["epochs_pretrain"] = c.epochs_pretrain;
  j["epochs_train"] = c.epochs_train;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["encoder_hidden"] = c.encoder_hidden;
  j["decoder_hidden"] = c.decoder_hidden;
  j["activation"] = to_string(c.activation);
  j["tau"] = c.tau;
  j["var_floor"] = c.var_floor;
  j["mode"] = to_string(c.mode);
  return j;
}

// Applies the fields of `j` onto `c`. `fail(key, message)` throws with location info.
template <class Fail>
void apply_config(const Json& j, TrainConfig& c, Fail&& fail) {
  if (!j.is_object()) fail("", "config must be a JSON object");
  auto count = [&](const Json& v, const std::string& key) -> std::size_t {
    if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    return v.get<std::size_t>();
  };
  auto real = [&](const Json& v, const std::string& key) -> double {
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  };
  auto text = [&](const Json& v, const std::string& key) -> std::string {
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  };
  auto sizes = [&](const Json& v, const std::string& key) {
    if (!v.is_array()) fail(key, "expected an array of positive integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) out.push_back(count(e, key));
    return out;
  };
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "K") c.K = count(v, key);
      else if (key == "J") c.J = count(v, key);
      else if (key == "L") c.L = count(v, key);
      else if (key == "beta_pretrain") c.beta_pretrain = real(v, key);
      else if (key == "beta_train") c.beta_train = real(v, key);
      else if (key == "lr_net_pretrain") c.lr_net_pretrain = real(v, key);
      else if (key == "lr_net") c.lr_net = real(v, key);
      else if (key == "lr_gmm") c.lr_gmm = real(v, key);
      else if (key == "epochs_pretrain") c.epochs_pretrain = count(v, key);
      else if (key == "epochs_train") c.epochs_train = count(v, key);
      else if (key == "batch_size") c.batch_size = count(v, key);
      else if (key == "seed") c.seed = count(v, key);
      else if (key == "encoder_hidden") c.encoder_hidden = sizes(v, key);
      else if (key == "decoder_hidden") c.decoder_hidden = sizes(v, key);
      else if (key == "activation") c.activation = activation_from_string(text(v, key));
      else if (key == "tau") c.tau = real(v, key);
      else if (key == "var_floor") c.var_floor = real(v, key);
      else if (key == "mode") c.mode = train_mode_from_string(text(v, key));
      else if (key == "beta_schedule") {
        BetaSchedule s;
        if (v.is_string()) {
          if (text(v, key) != "constant") fail(key, "string form only accepts \"constant\"");
        } else if (v.is_object()) {
          for (const auto& [sk, sv] : v.items()) {
            if (sk == "kind") {
              const auto kind = text(sv, key);
              if (kind == "constant") s.kind = BetaSchedule::Kind::constant;
              else if (kind == "linear_ramp") s.kind = BetaSchedule::Kind::linear_ramp;
              else fail(key, "kind must be \"constant\" or \"linear_ramp\", got \"" + kind + "\"");
            } else if (sk == "start_epoch") {
              s.start_epoch = count(sv, key);
            } else if (sk == "end_epoch") {
              s.end_epoch = count(sv, key);
            } else {
              fail(sk, "unknown field in 'beta_schedule'");
            }
          }
        } else {
          fail(key, "expected \"constant\" or an object with kind/start_epoch/end_epoch");
        }
        c.beta_schedule = s;
      } else {
        fail(key, "unknown field");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }
}

Json breakdown_to_json(const ElboBreakdown& b) {
  return Json{{"recon", b.recon},           {"cross_entropy_zc", b.cross_entropy_zc},
              {"log_prior_c", b.log_prior_c}, {"entropy_z", b.entropy_z},
              {"entropy_c", b.entropy_c},     {"beta", b.beta},
              {"total", b.total}};
}

ElboBreakdown breakdown_from_json(const Json& j) {
  ElboBreakdown b;
  b.recon = j.at("recon").get<double>();
  b.cross_entropy_zc = j.at("cross_entropy_zc").get<double>();
  b.log_prior_c = j.at("log_prior_c").get<double>();
  b.entropy_z = j.at("entropy_z").get<double>();
  b.entropy_c = j.at("entropy_c").get<double>();
  b.beta = j.at("beta").get<double>();
  b.total = j.at("total").get<double>();
  return b;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string config_to_json(const TrainConfig& config) { return config_json(config).dump(2) + "\n"; }

TrainConfig parse_config(std::string_view text, const std::string& source, const TrainConfig& base) {
  Json j;
  try {
    j = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ConfigError(source + ":" + std::to_string(line_at(text, e.byte == 0 ? 0 : e.byte - 1)) + ": " + e.what());
  }
  TrainConfig c = base;
  auto fail = [&](const std::string& key, const std::string& message) {
    const std::size_t line = key.empty() ? 1 : line_of_key(text, key);
    std::string where = source + ":" + std::to_string(line == 0 ? 1 : line) + ": ";
    if (!key.empty()) where += "field '" + key + "': ";
    throw ConfigError(where + message);
  };
  apply_config(j, c, fail);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    // validate() names the field as "field 'X': ..."; attach the line where it was set.
    const std::string msg = e.what();
    const auto open = msg.find('\'');
    const auto close = open == std::string::npos ? open : msg.find('\'', open + 1);
    std::size_t line = 0;
    if (close != std::string::npos) line = line_of_key(text, msg.substr(open + 1, close - open - 1));
    throw ConfigError(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + msg);
  }
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, path.string());
}

std::string checkpoint_to_json(const Checkpoint& ck) {
  Json j;
  j["version"] = ck.version;
  j["config"] = config_json(ck.config);
  j["encoder"] = mlp_to_json(ck.encoder);
  j["decoder"] = mlp_to_json(ck.decoder);
  j["gmm"] = Json{{"logits", ck.gmm.logits}, {"mu", matrix_to_json(ck.gmm.mu)}, {"log_var", matrix_to_json(ck.gmm.log_var)}};
  j["epoch"] = ck.epoch;
  j["rng_state"] = Json{{"seed", ck.rng_state.seed}, {"key", ck.rng_state.key}, {"counter", ck.rng_state.counter}};
  j["schema"] = Json{{"feature_names", ck.schema.feature_names},
                     {"guide_names", ck.schema.guide_names},
                     {"x_ranges", ranges_to_json(ck.schema.x_ranges)},
                     {"y_ranges", ranges_to_json(ck.schema.y_ranges)}};
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  try {
    const Json j = Json::parse(text.begin(), text.end());
    Checkpoint ck;
    ck.version = j.at("version").get<std::string>();
    if (ck.version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version \"" + ck.version + "\", expected \"" + kCheckpointVersion + "\"");
    }
    apply_config(j.at("config"), ck.config,
                 [](const std::string& key, const std::string& msg) -> void {
                   throw DataError("checkpoint config field '" + key + "': " + msg);
                 });
    ck.encoder = mlp_from_json(j.at("encoder"), "encoder");
    ck.decoder = mlp_from_json(j.at("decoder"), "decoder");
    const Json& g = j.at("gmm");
    ck.gmm.logits = g.at("logits").get<std::vector<double>>();
    ck.gmm.mu = matrix_from_json(g.at("mu"), "gmm mu");
    ck.gmm.log_var = matrix_from_json(g.at("log_var"), "gmm log_var");
    if (ck.gmm.mu.rows() != ck.gmm.logits.size() || !ck.gmm.mu.same_shape(ck.gmm.log_var)) {
      throw DataError("checkpoint gmm: inconsistent shapes");
    }
    ck.epoch = j.at("epoch").get<std::size_t>();
    const Json& r = j.at("rng_state");
    ck.rng_state = {r.at("seed").get<std::uint64_t>(), r.at("key").get<std::uint64_t>(),
                    r.at("counter").get<std::uint64_t>()};
    const Json& s = j.at("schema");
    ck.schema.feature_names = s.at("feature_names").get<std::vector<std::string>>();
    ck.schema.guide_names = s.at("guide_names").get<std::vector<std::string>>();
    ck.schema.x_ranges = ranges_from_json(s.at("x_ranges"));
    ck.schema.y_ranges = ranges_from_json(s.at("y_ranges"));
    if (ck.encoder.in_dim() != (ck.config.mode == TrainMode::guided ? ck.schema.feature_names.size()
                                                                     : ck.schema.feature_names.size() +
                                                                           ck.schema.guide_names.size())) {
      throw DataError("checkpoint: encoder input width does not match the stored schema");
    }
    return ck;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_text_file(path, checkpoint_to_json(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_text_file(path)); }

std::string metrics_record(const EpochMetrics& m) {
  Json j;
  j["epoch"] = m.epoch;
  j["phase"] = to_string(m.phase);
  j["train"] = breakdown_to_json(m.train);
  j["val"] = breakdown_to_json(m.val);
  j["beta_effective"] = m.beta_effective;
  j["occupancy"] = m.occupancy;
  if (m.acc) j["acc"] = *m.acc;
  if (m.nmi) j["nmi"] = *m.nmi;
  return j.dump();
}

EpochMetrics parse_metrics_record(std::string_view line) {
  try {
    const Json j = Json::parse(line.begin(), line.end());
    EpochMetrics m;
    m.epoch = j.at("epoch").get<std::size_t>();
    const auto phase = j.at("phase").get<std::string>();
    if (phase != "pretrain" && phase != "train") throw DataError("unknown phase \"" + phase + "\"");
    m.phase = phase == "pretrain" ? Phase::pretrain : Phase::train;
    m.train = breakdown_from_json(j.at("train"));
    m.val = breakdown_from_json(j.at("val"));
    m.beta_effective = j.at("beta_effective").get<double>();
    m.occupancy = j.at("occupancy").get<std::vector<std::size_t>>();
    if (j.contains("acc")) m.acc = j["acc"].get<double>();
    if (j.contains("nmi")) m.nmi = j["nmi"].get<double>();
    return m;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("malformed metrics record: ") + e.what());
  }
}

DataFingerprint fingerprint_file(const std::filesystem::path& path, const CsvTable& table) {
  const std::string bytes = read_text_file(path);
  return {table.values.rows(), table.names, hex64(Rng::hash_bytes(bytes.data(), bytes.size()))};
}

std::string manifest_to_json(const RunManifest& m) {
  Json j;
  j["tool_version"] = m.tool_version;
  j["status"] = m.status;
  j["config"] = config_json(m.config);
  j["data"] = Json{{"rows", m.data.rows}, {"columns", m.data.columns}, {"content_hash", m.data.content_hash}};
  j["artifacts"] = m.artifacts;
  j["timings_s"] = m.timings_s;
  j["splits"] = m.splits;
  j["warnings"] = m.warnings;
  j["nmi_normalization"] = "arithmetic mean of entropies";
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace gcvae
