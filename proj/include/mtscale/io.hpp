#ifndef MTSCALE_IO_HPP
#define MTSCALE_IO_HPP

// File formats: dataset manifests, sample JSON-lines, token registries,
// architecture configs, observation tables and the JSON records emitted for
// plans, fits and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtscale/error.hpp"
#include "mtscale/fileio.hpp"
#include "mtscale/holdout.hpp"
#include "mtscale/lawfit.hpp"
#include "mtscale/ledger.hpp"
#include "mtscale/mixer.hpp"
#include "mtscale/packer.hpp"
#include "mtscale/planner.hpp"

namespace mtscale::io {

using json = nlohmann::ordered_json;

inline std::string format_double(double v, int digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

using CsvRow = std::map<std::string, std::string>;

/// Header-keyed rows; blank lines and '#' comments are skipped.
inline std::vector<CsvRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    auto cells = split_csv_line(line);
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    require(cells.size() == header.size(), ErrorCode::InvalidInput,
            "CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " cells, expected " +
                std::to_string(header.size()));
    CsvRow row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline const std::string& cell(const CsvRow& row, const std::string& key) {
  auto it = row.find(key);
  require(it != row.end(), ErrorCode::InvalidInput, "missing column '" + key + "'");
  return it->second;
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    require(pos == s.size(), ErrorCode::InvalidInput, "bad number '" + s + "' for " + what);
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidInput, "bad number '" + s + "' for " + what);
  }
}

inline std::uint64_t to_u64(const std::string& s, const std::string& what) {
  require(!s.empty() && s.find_first_not_of("0123456789") == std::string::npos, ErrorCode::InvalidInput,
          "bad integer '" + s + "' for " + what);
  try {
    return std::stoull(s);
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidInput, "bad integer '" + s + "' for " + what);
  }
}

inline bool is_json_path(const std::filesystem::path& p) {
  const auto ext = ledger::lowercase(p.extension().string());
  return ext == ".json" || ext == ".jsonl" || ext == ".ndjson";
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, what + ": " + e.what());
  }
}

template <typename F>
void for_each_json_line(const std::string& text, const std::string& what, F&& f) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    f(parse_json(line, what + " line " + std::to_string(lineno)));
  }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& what) {
  require(j.is_object() && j.contains(key), ErrorCode::InvalidInput, what + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, what + ": field '" + key + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Mixer

inline std::vector<mixer::DatasetSpec> parse_dataset_manifest(const std::string& text, bool as_json) {
  std::vector<mixer::DatasetSpec> specs;
  if (as_json) {
    auto j = parse_json(text, "dataset manifest");
    if (j.is_object() && j.contains("datasets")) j = j["datasets"];
    require(j.is_array(), ErrorCode::InvalidInput, "dataset manifest must be an array");
    for (const auto& e : j) {
      require(e.contains("size") && e["size"].is_number_integer() && e["size"].get<std::int64_t>() >= 0,
              ErrorCode::InvalidInput, "dataset size must be a non-negative integer");
      specs.push_back({get_field<std::string>(e, "id", "dataset"), e.value("group", std::string()),
                       e["size"].get<std::uint64_t>()});
    }
  } else {
    for (const auto& row : parse_csv(text)) {
      auto g = row.find("group");
      specs.push_back({cell(row, "id"), g == row.end() ? std::string() : g->second,
                       to_u64(cell(row, "size"), "size")});
    }
  }
  return specs;
}

inline std::vector<mixer::DatasetSpec> read_dataset_manifest(const std::filesystem::path& path) {
  return parse_dataset_manifest(read_file(path), is_json_path(path));
}

inline json to_json(const mixer::MixPlan& plan) {
  json entries = json::array();
  for (const auto& e : plan.entries)
    entries.push_back({{"id", e.id},
                       {"original_size", e.original_size},
                       {"factor", e.factor},
                       {"oversampled_size", e.oversampled},
                       {"probability", e.probability}});
  return {{"temperature", plan.temperature}, {"total", plan.total()}, {"entries", std::move(entries)}};
}

inline std::string index_csv(const std::vector<mixer::IndexRef>& refs) {
  std::string out = "dataset_id,index\n";
  for (const auto& r : refs) out += r.dataset_id + "," + std::to_string(r.index) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Packer

/// {"</src>": id, "<eos>": id, "<pad>": id, "<lang_xx>": id, "<dom_yyy>": id,
///  "vocab_size": n}
inline packer::SpecialTokenRegistry parse_registry(const std::string& text) {
  const auto j = parse_json(text, "registry");
  require(j.is_object(), ErrorCode::InvalidInput, "registry must be a JSON object");
  packer::SpecialTokenRegistry reg;
  bool src = false, eos = false, pad = false;
  for (const auto& [key, value] : j.items()) {
    require(value.is_number_unsigned(), ErrorCode::InvalidInput, "registry value for '" + key + "' is not an id");
    const auto id = value.get<std::uint64_t>();
    require(id <= 0xffffffffULL, ErrorCode::InvalidInput, "registry id for '" + key + "' exceeds 32 bits");
    const auto tok = static_cast<packer::TokenId>(id);
    if (key == "vocab_size") {
      reg.vocab_size = static_cast<std::uint32_t>(id);
    } else if (key == "</src>") {
      reg.end_of_source = tok, src = true;
    } else if (key == "<eos>") {
      reg.end_of_sequence = tok, eos = true;
    } else if (key == "<pad>") {
      reg.pad = tok, pad = true;
    } else if (key.rfind("<lang_", 0) == 0 && key.back() == '>') {
      reg.languages[key.substr(6, key.size() - 7)] = tok;
    } else if (key.rfind("<dom_", 0) == 0 && key.back() == '>') {
      reg.domains[key.substr(5, key.size() - 6)] = tok;
    } else {
      throw Error(ErrorCode::InvalidInput, "unrecognized registry key '" + key + "'");
    }
  }
  require(src && eos && pad, ErrorCode::InvalidInput, "registry needs </src>, <eos> and <pad>");
  require(reg.vocab_size > 0, ErrorCode::InvalidInput, "registry needs vocab_size");
  reg.validate();
  return reg;
}

inline packer::SamplePair sample_from_json(const json& j) {
  packer::SamplePair p;
  p.source_tokens = get_field<std::vector<packer::TokenId>>(j, "source_tokens", "sample");
  p.target_tokens = get_field<std::vector<packer::TokenId>>(j, "target_tokens", "sample");
  p.source_lang = get_field<std::string>(j, "source_lang", "sample");
  p.target_lang = get_field<std::string>(j, "target_lang", "sample");
  p.domain = get_field<std::string>(j, "domain", "sample");
  return p;
}

inline std::vector<packer::SamplePair> parse_samples_jsonl(const std::string& text) {
  std::vector<packer::SamplePair> out;
  for_each_json_line(text, "samples", [&](const json& j) { out.push_back(sample_from_json(j)); });
  return out;
}

inline json to_json(const packer::ShardStats& s) {
  return {{"total_tokens", s.total_tokens},
          {"loss_tokens", s.loss_tokens},
          {"pad_tokens", s.pad_tokens},
          {"samples_started", s.samples_started},
          {"loss_fraction", s.loss_fraction()}};
}

// ---------------------------------------------------------------------------
// Ledger

inline ledger::ModelArch arch_from_json(const json& j) {
  ledger::ModelArch a;
  a.name = j.value("name", std::string("custom"));
  a.layers = get_field<std::uint64_t>(j, "layers", "architecture");
  a.hidden = j.contains("dim") ? get_field<std::uint64_t>(j, "dim", "architecture")
                               : get_field<std::uint64_t>(j, "hidden", "architecture");
  a.heads = get_field<std::uint64_t>(j, "heads", "architecture");
  a.vocab_size = j.value("vocab_size", std::uint64_t{100000});
  a.seq_len = j.value("seq_len", std::uint64_t{512});
  a.tied_embeddings = j.value("tied_embeddings", false);
  a.validate();
  return a;
}

inline std::vector<ledger::ModelArch> parse_arch_file(const std::string& text) {
  const auto j = parse_json(text, "architecture file");
  std::vector<ledger::ModelArch> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(arch_from_json(e));
  } else {
    out.push_back(arch_from_json(j));
  }
  return out;
}

inline std::string_view to_string(ledger::FlopMode m) { return m == ledger::FlopMode::Exact ? "exact" : "sixnd"; }

inline json to_json(const ledger::ModelArch& a, const ledger::ParamCount& p) {
  return {{"name", a.name},       {"layers", a.layers},         {"dim", a.hidden},
          {"heads", a.heads},     {"vocab_size", a.vocab_size}, {"padded_vocab", p.padded_vocab},
          {"embedding", p.embedding}, {"non_embedding", p.non_embedding}, {"total", p.total}};
}

inline json to_json(const ledger::FlopEstimate& f) {
  return {{"mode", to_string(f.mode)},
          {"forward_per_token", f.forward_per_token},
          {"train_per_token", f.train_per_token},
          {"train_per_sample", f.train_per_sample()}};
}

// ---------------------------------------------------------------------------
// Lawfit

inline std::string_view to_string(lawfit::DataUnit u) { return u == lawfit::DataUnit::Tokens ? "tokens" : "samples"; }
inline std::string_view to_string(lawfit::ResidualSpace s) {
  return s == lawfit::ResidualSpace::Linear ? "linear" : "log";
}

inline lawfit::DataUnit parse_unit(const std::string& s) {
  if (s == "samples") return lawfit::DataUnit::Samples;
  if (s == "tokens") return lawfit::DataUnit::Tokens;
  throw Error(ErrorCode::InvalidInput, "unknown data unit '" + s + "'");
}

inline lawfit::Observation observation_from_json(const json& j) {
  lawfit::Observation o;
  o.model = get_field<std::string>(j, "model", "observation");
  o.N = get_field<double>(j, "N", "observation");
  o.D = get_field<double>(j, "D", "observation");
  o.loss = get_field<double>(j, "loss", "observation");
  o.direction = j.value("direction", std::string());
  o.domain = j.value("domain", std::string());
  return o;
}

/// CSV columns model,N,D,loss[,direction][,domain], or JSON-lines records.
inline std::vector<lawfit::Observation> parse_observations(const std::string& text, bool as_jsonl) {
  std::vector<lawfit::Observation> out;
  if (as_jsonl) {
    for_each_json_line(text, "observations", [&](const json& j) { out.push_back(observation_from_json(j)); });
    return out;
  }
  for (const auto& row : parse_csv(text)) {
    lawfit::Observation o;
    o.model = cell(row, "model");
    o.N = to_double(cell(row, "N"), "N");
    o.D = to_double(cell(row, "D"), "D");
    o.loss = to_double(cell(row, "loss"), "loss");
    if (auto it = row.find("direction"); it != row.end()) o.direction = it->second;
    if (auto it = row.find("domain"); it != row.end()) o.domain = it->second;
    out.push_back(std::move(o));
  }
  return out;
}

inline std::vector<lawfit::Observation> read_observations(const std::filesystem::path& path) {
  return parse_observations(read_file(path), is_json_path(path));
}

inline json to_json(const lawfit::PowerLawFit& f) {
  return {{"law", "power"}, {"alpha", f.alpha},         {"p", f.p},
          {"beta", f.beta}, {"objective", f.objective}, {"converged", f.converged},
          {"n_points", f.n_points}};
}

inline json to_json(const lawfit::ChinchillaFit& f) {
  return {{"law", "chinchilla"}, {"E", f.E},
          {"a", f.a},            {"alpha", f.alpha},
          {"b", f.b},            {"beta", f.beta},
          {"objective", f.objective}, {"converged", f.converged},
          {"n_points", f.n_points},   {"unit", to_string(f.unit)}};
}

inline json to_json(const lawfit::LawFit& f) {
  return std::visit([](const auto& x) { return to_json(x); }, f);
}

inline lawfit::LawFit fit_from_json(const json& j) {
  const auto law = get_field<std::string>(j, "law", "fit");
  if (law == "power") {
    lawfit::PowerLawFit f;
    f.alpha = get_field<double>(j, "alpha", "fit");
    f.p = get_field<double>(j, "p", "fit");
    f.beta = get_field<double>(j, "beta", "fit");
    f.objective = j.value("objective", 0.0);
    f.converged = j.value("converged", false);
    f.n_points = j.value("n_points", std::size_t{0});
    return f;
  }
  require(law == "chinchilla", ErrorCode::InvalidInput, "unknown law '" + law + "'");
  lawfit::ChinchillaFit f;
  f.E = get_field<double>(j, "E", "fit");
  f.a = get_field<double>(j, "a", "fit");
  f.alpha = get_field<double>(j, "alpha", "fit");
  f.b = get_field<double>(j, "b", "fit");
  f.beta = get_field<double>(j, "beta", "fit");
  f.objective = j.value("objective", 0.0);
  f.converged = j.value("converged", false);
  f.n_points = j.value("n_points", std::size_t{0});
  f.unit = parse_unit(j.value("unit", std::string("samples")));
  return f;
}

inline json to_json(const lawfit::HoldoutReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json held = json::array();
    for (const auto& h : row.held_out)
      held.push_back({{"model", h.model},
                      {"N", h.N},
                      {"D", h.D},
                      {"observed", h.observed},
                      {"predicted", h.predicted},
                      {"signed_error", h.signed_error},
                      {"relative_error", h.relative_error}});
    rows.push_back({{"dropped", row.dropped},
                    {"fitted_models", row.fitted_models},
                    {"fit", to_json(row.fit)},
                    {"max_in_sample_relative", row.max_in_sample_relative},
                    {"held_out", std::move(held)}});
  }
  return {{"law", r.law == lawfit::LawKind::Power ? "power" : "chinchilla"},
          {"ladder", r.ladder},
          {"rows", std::move(rows)}};
}

inline std::string holdout_csv(const lawfit::HoldoutReport& r) {
  std::string out = "dropped,fitted_models,model,N,D,observed,predicted,signed_error,relative_error\n";
  for (const auto& row : r.rows) {
    std::string fitted;
    for (const auto& m : row.fitted_models) fitted += (fitted.empty() ? "" : "-") + m;
    for (const auto& h : row.held_out)
      out += std::to_string(row.dropped) + "," + fitted + "," + h.model + "," + format_double(h.N) + "," +
             format_double(h.D) + "," + format_double(h.observed) + "," + format_double(h.predicted) + "," +
             format_double(h.signed_error) + "," + format_double(h.relative_error) + "\n";
  }
  return out;
}

/// Logarithmic sweep of the fitted curve between lo and hi. Power laws sweep
/// N; Chinchilla fits sweep D for each distinct model N given.
inline std::string curve_csv(const lawfit::LawFit& fit, double lo, double hi, std::size_t points,
                             const std::vector<double>& model_sizes = {}) {
  points = std::max<std::size_t>(points, 2);
  std::string out;
  auto sweep = [&](std::size_t i) { return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * double(i) / double(points - 1)); };
  if (const auto* pw = std::get_if<lawfit::PowerLawFit>(&fit)) {
    out = "N,loss\n";
    for (std::size_t i = 0; i < points; ++i) {
      const double n = sweep(i);
      out += format_double(n, 10) + "," + format_double(lawfit::predict(*pw, n), 10) + "\n";
    }
    return out;
  }
  const auto& ch = std::get<lawfit::ChinchillaFit>(fit);
  out = "N,D,loss\n";
  for (double n : model_sizes)
    for (std::size_t i = 0; i < points; ++i) {
      const double d = sweep(i);
      out += format_double(n, 10) + "," + format_double(d, 10) + "," + format_double(lawfit::predict(ch, n, d), 10) +
             "\n";
    }
  return out;
}

// ---------------------------------------------------------------------------
// Planner

inline json to_json(const planner::Inversion& inv) {
  json j{{"feasible", inv.feasible}, {"floor", inv.floor}, {"unit", to_string(inv.unit)}};
  if (inv.feasible) j["value"] = inv.value;
  return j;
}

inline json to_json(const planner::IsoFlopResult& r) {
  return {{"budget", r.budget}, {"N", r.N}, {"D", r.D}, {"loss", r.loss}, {"unit", to_string(r.unit)}};
}

inline std::string curve_csv(const std::vector<planner::CurvePoint>& curve) {
  std::string out = "N,D,loss\n";
  for (const auto& p : curve)
    out += format_double(p.N, 10) + "," + format_double(p.D, 10) + "," + format_double(p.loss, 10) + "\n";
  return out;
}

}  // namespace mtscale::io

#endif  // MTSCALE_IO_HPP
