// mtscale: command-line front end for mixing, packing, parameter and FLOP
// accounting, scaling-law fitting and budget planning.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mtscale/holdout.hpp"
#include "mtscale/io.hpp"
#include "mtscale/ledger.hpp"
#include "mtscale/mixer.hpp"
#include "mtscale/packer.hpp"
#include "mtscale/planner.hpp"
#include "mtscale/rng.hpp"
#include "mtscale/shard.hpp"
#include "mtscale/version.hpp"

namespace fs = std::filesystem;
using namespace mtscale;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitData = 3;
constexpr int kExitInfeasible = 4;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InsufficientData:
    case ErrorCode::FitFailed: return kExitData;
    case ErrorCode::InfeasibleTarget: return kExitInfeasible;
    default: return kExitInput;
  }
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) == 1, ErrorCode::IoError,
          "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Relative paths that do not exist are looked up in $MTSCALE_CONFIG_DIR.
fs::path resolve_input(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  if (const char* dir = std::getenv("MTSCALE_CONFIG_DIR"); dir && *dir) {
    fs::path alt = fs::path(dir) / path;
    if (fs::exists(alt)) return alt;
  }
  return path;
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  return p.string() + suffix;
}

// Collects inputs and outputs of one invocation. Nothing touches the disk
// until commit(), and each output is followed by its manifest sidecar.
class Run {
 public:
  Run(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

  json config = json::object();

  std::string read(const std::string& given) {
    const auto path = resolve_input(given);
    auto text = read_file(path);
    inputs_.push_back({{"path", given}, {"sha256", sha256_hex(text)}});
    return text;
  }

  void output(const fs::path& path, std::string contents) { outputs_.emplace_back(path, std::move(contents)); }

  json manifest() const {
    json outs = json::array();
    for (const auto& [p, c] : outputs_) outs.push_back({{"path", p.string()}, {"sha256", sha256_hex(c)}});
    return {{"command", command_}, {"version", kVersion}, {"seed", seed_},
            {"config", config},    {"inputs", inputs_},   {"outputs", outs}};
  }

  void commit() const {
    if (outputs_.empty()) return;
    const std::string m = manifest().dump(2) + "\n";
    for (const auto& [p, c] : outputs_) write_file_atomic(p, c);
    for (const auto& [p, c] : outputs_) write_file_atomic(p.string() + ".manifest.json", m);
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  json inputs_ = json::array();
  std::vector<std::pair<fs::path, std::string>> outputs_;
};

std::string text_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (w.size() <= i) w.push_back(0);
      w[i] = std::max(w[i], r[i].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::string c = r[i];
      if (i + 1 < r.size()) c += std::string(w[i] - c.size() + 2, ' ');
      line += c;
    }
    out += line + "\n";
  }
  return out;
}

std::string csv_table(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
    out += "\n";
  }
  return out;
}

std::vector<ledger::ModelArch> resolve_archs(Run& run, const std::string& which, bool& scaled) {
  scaled = false;
  std::vector<ledger::ModelArch> out;
  const auto key = ledger::lowercase(which);
  if (key == "all") {
    for (const auto& p : ledger::base_presets()) out.push_back(p.arch);
  } else if (key == "scaled") {
    scaled = true;
    for (const auto& p : ledger::scaled_presets()) out.push_back(p.arch);
  } else if (fs::path(which).extension() == ".json") {
    out = io::parse_arch_file(run.read(which));
  } else {
    out.push_back(ledger::find_preset(which).arch);
  }
  return out;
}

void emit(Run& run, const std::optional<std::string>& out, const std::string& text) {
  if (out) {
    run.output(*out, text);
    run.commit();
  } else {
    std::cout << text;
  }
}

// ---------------------------------------------------------------------------

struct MixArgs {
  std::string manifest;
  double temperature = 5.0;
  std::string group_by = "group";
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  std::optional<std::string> indices;
};

int cmd_mix(const MixArgs& a) {
  Run run("mix", a.seed);
  const auto text = run.read(a.manifest);
  auto specs = io::parse_dataset_manifest(text, io::is_json_path(a.manifest));
  require(a.group_by == "group" || a.group_by == "none", ErrorCode::InvalidInput,
          "--group-by must be group or none");
  if (a.group_by == "none")
    for (auto& s : specs) s.group = "all";
  run.config = {{"manifest", a.manifest},
                {"temperature", a.temperature},
                {"group_by", a.group_by},
                {"seed", a.seed},
                {"indices", a.indices ? json(*a.indices) : json(nullptr)}};

  const auto plans = mixer::grouped_mix(specs, a.temperature);
  json groups = json::object();
  for (const auto& [name, plan] : plans) groups[name] = io::to_json(plan);
  const json doc{{"temperature", a.temperature}, {"groups", groups}};

  if (a.indices) {
    std::vector<mixer::IndexRef> refs;
    std::uint64_t stream = 0;
    for (const auto& [name, plan] : plans) {
      auto part = mixer::materialize_indices(plan, mix_seed(a.seed, stream++));
      refs.insert(refs.end(), part.begin(), part.end());
    }
    run.output(*a.indices, io::index_csv(refs));
  }
  const std::string body = doc.dump(2) + "\n";
  if (a.out) run.output(*a.out, body);
  run.commit();
  if (!a.out) std::cout << body;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PackArgs {
  std::string samples;
  std::string registry;
  std::uint32_t seq_len = 512;
  std::string policy = "split";
  bool eos_prefix = true;
  std::string out;
  std::optional<std::string> prefixes;
};

int cmd_pack(const PackArgs& a) {
  Run run("pack", 0);
  const auto reg = io::parse_registry(run.read(a.registry));
  const auto samples = io::parse_samples_jsonl(run.read(a.samples));
  require(a.policy == "split" || a.policy == "droptail", ErrorCode::InvalidInput,
          "--policy must be split or droptail");
  const auto policy = a.policy == "split" ? packer::BoundaryPolicy::Split : packer::BoundaryPolicy::DropTail;
  run.config = {{"samples", a.samples}, {"registry", a.registry},     {"seq_len", a.seq_len},
                {"policy", a.policy},   {"eos_prefix", a.eos_prefix}, {"out", a.out},
                {"prefixes", a.prefixes ? json(*a.prefixes) : json(nullptr)}};

  packer::Packer pk(a.seq_len, policy, reg);
  std::string prefix_lines;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    try {
      pk.add(packer::format_sample(samples[i], reg));
    } catch (const Error& e) {
      throw Error(e.code(), "sample " + std::to_string(i + 1) + ": " + e.what());
    }
    if (a.prefixes) {
      const auto& s = samples[i];
      json line = packer::inference_prefix(s.source_tokens, s.target_lang, s.source_lang, s.domain, reg, a.eos_prefix);
      prefix_lines += line.dump() + "\n";
    }
  }
  const auto result = pk.finish();
  if (result.skipped > 0)
    std::cerr << "skipped " << result.skipped << " of " << samples.size() << " samples longer than seq_len\n";

  const auto bytes = encode_shard(result.shard);
  run.output(a.out, std::string(bytes.begin(), bytes.end()));
  if (a.prefixes) run.output(*a.prefixes, prefix_lines);
  run.commit();
  auto stats = io::to_json(packer::shard_stats(result.shard, reg));
  stats["sequences"] = result.shard.sequences.size();
  stats["accepted"] = result.accepted;
  stats["skipped"] = result.skipped;
  std::cout << stats.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct LedgerArgs {
  std::string arch = "all";
  std::string mode = "exact";
  std::string format = "text";
  std::optional<double> ctx;
  std::optional<std::string> base;
  std::optional<std::string> out;
};

ledger::FlopMode parse_mode(const std::string& m) {
  if (m == "exact") return ledger::FlopMode::Exact;
  if (m == "sixnd" || m == "6nd") return ledger::FlopMode::SixND;
  throw Error(ErrorCode::InvalidInput, "unknown FLOP mode '" + m + "'");
}

std::string render(const std::vector<std::vector<std::string>>& rows, const std::string& format) {
  if (format == "csv") return csv_table(rows);
  require(format == "text", ErrorCode::InvalidInput, "--format must be text or csv");
  return text_table(rows);
}

int cmd_params(const LedgerArgs& a) {
  Run run("params", 0);
  bool scaled = false;
  const auto archs = resolve_archs(run, a.arch, scaled);
  run.config = {{"arch", a.arch}, {"format", a.format}};
  std::vector<std::vector<std::string>> rows{{"model", "non_embedding", "embedding", "layers", "dim", "heads"}};
  for (const auto& arch : archs) {
    const auto p = ledger::param_count(arch);
    rows.push_back({arch.name, std::to_string(p.non_embedding), std::to_string(p.embedding),
                    std::to_string(arch.layers), std::to_string(arch.hidden), std::to_string(arch.heads)});
  }
  std::string text = render(rows, a.format);
  if (scaled)
    for (const auto& n : ledger::discrepancy_notes(ledger::scaled_presets())) {
      if (a.format == "csv")
        std::cerr << "note: " << n << "\n";
      else
        text += "note: " + n + "\n";
    }
  emit(run, a.out, text);
  return kExitOk;
}

int cmd_flops(const LedgerArgs& a) {
  Run run("flops", 0);
  bool scaled = false;
  const auto archs = resolve_archs(run, a.arch, scaled);
  const auto mode = parse_mode(a.mode);
  run.config = {{"arch", a.arch},
                {"mode", io::to_string(mode)},
                {"format", a.format},
                {"ctx", a.ctx ? json(*a.ctx) : json(nullptr)},
                {"base", a.base ? json(*a.base) : json(nullptr)}};

  std::optional<std::string> base_key = a.base;
  if (!base_key && scaled) base_key = "70m";
  std::vector<std::vector<std::string>> rows;
  if (base_key) {
    const auto base = ledger::find_preset(*base_key).arch;
    rows.push_back({"model", "layers", "dim", "non_embedding", "embedding", "train_flop_per_sample", "relative_flop"});
    for (const auto& r : ledger::scaling_table(base, archs, mode)) {
      rows.push_back({r.name, std::to_string(r.layers), std::to_string(r.hidden), std::to_string(r.non_embedding),
                      std::to_string(r.embedding), io::format_double(r.train_flop_per_sample, 6),
                      io::format_double(r.relative_flop, 6)});
    }
  } else {
    rows.push_back({"model", "mode", "forward_per_token", "train_per_token", "train_per_sample"});
    for (const auto& arch : archs) {
      const auto f = ledger::flops(arch, mode, a.ctx);
      rows.push_back({arch.name, std::string(io::to_string(mode)), io::format_double(f.forward_per_token, 6),
                      io::format_double(f.train_per_token, 6), io::format_double(f.train_per_sample(), 6)});
    }
  }
  emit(run, a.out, render(rows, a.format));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string observations;
  std::string law = "chinchilla";
  double delta = 0.01;
  std::string residual = "log";
  std::string group_by = "none";
  std::optional<std::string> ladder;
  std::string unit = "samples";
  std::uint64_t seed = 0;
  std::size_t curve_points = 64;
  std::optional<std::string> out;
};

lawfit::LawKind parse_law(const std::string& s) {
  if (s == "power") return lawfit::LawKind::Power;
  if (s == "chinchilla") return lawfit::LawKind::Chinchilla;
  throw Error(ErrorCode::InvalidInput, "unknown law '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string fit_curve(const lawfit::LawFit& fit, const std::vector<lawfit::Observation>& obs, std::size_t points) {
  double nlo = obs.front().N, nhi = nlo, dlo = obs.front().D, dhi = dlo;
  std::vector<double> sizes;
  for (const auto& o : obs) {
    nlo = std::min(nlo, o.N), nhi = std::max(nhi, o.N);
    dlo = std::min(dlo, o.D), dhi = std::max(dhi, o.D);
    if (std::find(sizes.begin(), sizes.end(), o.N) == sizes.end()) sizes.push_back(o.N);
  }
  std::sort(sizes.begin(), sizes.end());
  if (std::holds_alternative<lawfit::PowerLawFit>(fit)) return io::curve_csv(fit, nlo, 10 * nhi, points);
  return io::curve_csv(fit, dlo, 10 * dhi, points, sizes);
}

std::string prefix_lines(const std::string& csv, const std::string& group, bool header) {
  std::istringstream in(csv);
  std::string line, out;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (header) out += "group," + line + "\n";
      continue;
    }
    out += group + "," + line + "\n";
  }
  return out;
}

int cmd_fit(const FitArgs& a) {
  Run run("fit", a.seed);
  const auto obs = io::parse_observations(run.read(a.observations), io::is_json_path(a.observations));
  const auto law = parse_law(a.law);
  lawfit::FitConfig cfg;
  cfg.huber_delta = a.delta;
  require(a.residual == "log" || a.residual == "linear", ErrorCode::InvalidInput, "--residual must be log or linear");
  cfg.residual_space = a.residual == "log" ? lawfit::ResidualSpace::Log : lawfit::ResidualSpace::Linear;
  cfg.unit = io::parse_unit(a.unit);
  cfg.seed = a.seed;
  require(a.delta > 0, ErrorCode::InvalidInput, "--delta must be > 0");
  run.config = {{"observations", a.observations},
                {"law", a.law},
                {"delta", a.delta},
                {"residual", a.residual},
                {"group_by", a.group_by},
                {"holdout_ladder", a.ladder ? json(*a.ladder) : json(nullptr)},
                {"unit", a.unit},
                {"curve_points", a.curve_points}};

  auto holdout = [&](const std::vector<lawfit::Observation>& members) {
    const auto ladder = *a.ladder == "auto" ? lawfit::ladder_by_size(members) : split_list(*a.ladder);
    return lawfit::holdout_extrapolation(members, ladder, law, cfg);
  };

  json doc;
  std::string curve, holdout_csv;
  json holdout_json;
  if (a.group_by == "none") {
    const auto fit = lawfit::fit_law(law, obs, cfg);
    doc = io::to_json(fit);
    curve = fit_curve(fit, obs, a.curve_points);
    if (a.ladder) {
      const auto rep = holdout(obs);
      holdout_json = io::to_json(rep);
      holdout_csv = io::holdout_csv(rep);
    }
  } else {
    lawfit::GroupKey key;
    if (a.group_by == "direction")
      key = lawfit::GroupKey::Direction;
    else if (a.group_by == "domain")
      key = lawfit::GroupKey::Domain;
    else if (a.group_by == "both")
      key = lawfit::GroupKey::Both;
    else
      throw Error(ErrorCode::InvalidInput, "--group-by must be none, direction, domain or both");
    const auto results = lawfit::fit_grouped(obs, key, law, cfg);
    json groups = json::object();
    holdout_json = json::object();
    std::size_t ok = 0;
    for (const auto& [name, r] : results) {
      json g{{"status", r.status}, {"n_points", r.n_points}};
      if (r.fit) {
        ++ok;
        g["fit"] = io::to_json(*r.fit);
        std::vector<lawfit::Observation> members;
        for (const auto& o : obs)
          if (lawfit::group_of(o, key) == name) members.push_back(o);
        curve += prefix_lines(fit_curve(*r.fit, members, a.curve_points), name, curve.empty());
        if (a.ladder) {
          try {
            const auto rep = holdout(members);
            holdout_json[name] = io::to_json(rep);
            holdout_csv += prefix_lines(io::holdout_csv(rep), name, holdout_csv.empty());
          } catch (const Error& e) {
            if (e.code() != ErrorCode::InsufficientData && e.code() != ErrorCode::FitFailed) throw;
            holdout_json[name] = {{"status", e.what()}};
            std::cerr << "group " << name << ": holdout skipped: " << e.what() << "\n";
          }
        }
      } else {
        std::cerr << "group " << name << ": " << r.status << "\n";
      }
      groups[name] = std::move(g);
    }
    require(ok > 0, ErrorCode::InsufficientData, "no group could be fitted");
    doc = {{"group_by", a.group_by}, {"groups", groups}};
  }

  const std::string body = doc.dump(2) + "\n";
  if (a.out) {
    const fs::path out(*a.out);
    run.output(out, body);
    run.output(sibling(out, ".curve.csv"), curve);
    if (a.ladder) {
      run.output(sibling(out, ".holdout.json"), holdout_json.dump(2) + "\n");
      run.output(sibling(out, ".holdout.csv"), holdout_csv);
    }
    run.commit();
  } else {
    std::cout << body;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string fit;
  std::optional<std::string> group;
  std::optional<double> target_loss;
  std::optional<double> n;
  std::optional<double> d;
  std::optional<double> budget;
  std::optional<std::string> match;
  std::optional<double> big_d;
  std::string flop_mode = "sixnd";
  std::optional<std::string> arch;
  double tokens_per_sample = 512;
  bool json_only = false;
  std::optional<std::string> out;
  std::optional<std::string> curve;
};

double model_size(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  return double(ledger::param_count(ledger::find_preset(s).arch).non_embedding);
}

std::string fmt(double v) { return io::format_double(v, 6); }

void infeasible(const planner::Inversion& inv, double target) {
  throw Error(ErrorCode::InfeasibleTarget, "target loss " + io::format_double(target) +
                                               " is below the attainable floor " + io::format_double(inv.floor));
}

int cmd_plan(const PlanArgs& a) {
  Run run("plan", 0);
  auto j = io::parse_json(run.read(a.fit), "fit file");
  if (j.contains("groups")) {
    require(a.group.has_value(), ErrorCode::InvalidInput, "grouped fit file needs --group");
    require(j["groups"].contains(*a.group) && j["groups"][*a.group].contains("fit"), ErrorCode::InvalidInput,
            "group '" + *a.group + "' has no fit");
    j = j["groups"][*a.group]["fit"];
  }
  const auto any = io::fit_from_json(j);
  const auto* fitp = std::get_if<lawfit::ChinchillaFit>(&any);
  require(fitp != nullptr, ErrorCode::InvalidInput, "planning needs a chinchilla fit");
  const auto& fit = *fitp;

  const auto mode = parse_mode(a.flop_mode);
  planner::FlopCounter counter;
  if (mode == ledger::FlopMode::Exact || a.arch) {
    const auto arch = ledger::find_preset(a.arch.value_or("70m")).arch;
    counter = planner::FlopCounter::from_arch(arch, mode, fit.unit);
  } else {
    counter = planner::FlopCounter::six_nd(fit.unit, a.tokens_per_sample);
  }

  run.config = {{"fit", a.fit},
                {"group", a.group ? json(*a.group) : json(nullptr)},
                {"target_loss", a.target_loss ? json(*a.target_loss) : json(nullptr)},
                {"n", a.n ? json(*a.n) : json(nullptr)},
                {"d", a.d ? json(*a.d) : json(nullptr)},
                {"flop_budget", a.budget ? json(*a.budget) : json(nullptr)},
                {"match", a.match ? json(*a.match) : json(nullptr)},
                {"big_d", a.big_d ? json(*a.big_d) : json(nullptr)},
                {"flop_mode", io::to_string(mode)},
                {"arch", a.arch ? json(*a.arch) : json(nullptr)},
                {"tokens_per_sample", a.tokens_per_sample}};

  const int modes = int(a.target_loss.has_value()) + int(a.budget.has_value()) + int(a.match.has_value());
  require(modes == 1, ErrorCode::InvalidInput, "give exactly one of --target-loss, --flop-budget or --match");
  const std::string unit(io::to_string(fit.unit));

  json doc;
  std::ostringstream summary;
  if (a.target_loss) {
    require(a.n.has_value() != a.d.has_value(), ErrorCode::InvalidInput, "--target-loss needs exactly one of --n, --d");
    const double target = *a.target_loss;
    if (a.n) {
      const auto inv = planner::data_needed(fit, *a.n, target);
      if (!inv.feasible) infeasible(inv, target);
      const double cost = counter(*a.n, inv.value, fit.unit);
      doc = {{"query", "data_needed"}, {"N", *a.n}, {"target_loss", target}, {"result", io::to_json(inv)},
             {"train_flop", cost}};
      summary << "N=" << fmt(*a.n) << " reaches loss " << fmt(target) << " after " << fmt(inv.value) << " " << unit
              << " (" << fmt(cost) << " FLOP); floor at this size " << fmt(inv.floor) << "\n";
    } else {
      const auto inv = planner::params_needed(fit, *a.d, target);
      if (!inv.feasible) infeasible(inv, target);
      const double cost = counter(inv.value, *a.d, fit.unit);
      doc = {{"query", "params_needed"}, {"D", *a.d}, {"target_loss", target}, {"result", io::to_json(inv)},
             {"train_flop", cost}};
      summary << "D=" << fmt(*a.d) << " " << unit << " reaches loss " << fmt(target) << " with N=" << fmt(inv.value)
              << " (" << fmt(cost) << " FLOP); floor at this data size " << fmt(inv.floor) << "\n";
    }
  } else if (a.budget) {
    const auto r = planner::isoflop_optimum(fit, *a.budget, counter);
    doc = {{"query", "isoflop"}, {"result", io::to_json(r)}};
    summary << "budget " << fmt(*a.budget) << " FLOP: N=" << fmt(r.N) << " D=" << fmt(r.D) << " " << unit
            << " loss=" << fmt(r.loss) << "\n";
    if (a.curve) run.output(*a.curve, io::curve_csv(r.curve));
  } else {
    const auto pos = a.match->find(':');
    require(pos != std::string::npos, ErrorCode::InvalidInput, "--match expects small:big");
    require(a.big_d.has_value(), ErrorCode::InvalidInput, "--match needs --big-d");
    const double small = model_size(a.match->substr(0, pos));
    const double big = model_size(a.match->substr(pos + 1));
    const auto m = planner::match_model(fit, small, big, *a.big_d, counter);
    if (!m.inversion.feasible) infeasible(m.inversion, m.target_loss);
    doc = {{"query", "match"},
           {"small_N", small},
           {"big_N", big},
           {"big_D", *a.big_d},
           {"target_loss", m.target_loss},
           {"small_D", m.inversion.value},
           {"multiplier", m.multiplier},
           {"small_flop", m.small_flops},
           {"big_flop", m.big_flops},
           {"unit", unit}};
    summary << "N=" << fmt(small) << " matches N=" << fmt(big) << " on " << fmt(*a.big_d) << " " << unit
            << " (loss " << fmt(m.target_loss) << ") with " << fmt(m.inversion.value) << " " << unit << ", "
            << fmt(m.multiplier) << "x the data; FLOP " << fmt(m.small_flops) << " vs " << fmt(m.big_flops) << "\n";
  }

  const std::string body = doc.dump(2) + "\n";
  if (a.out) run.output(*a.out, body);
  run.commit();
  std::cout << (a.json_only ? body : summary.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data mixing, packing, FLOP accounting and scaling-law tools"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  MixArgs mix;
  auto* m = app.add_subcommand("mix", "Temperature-sampled mixing plan");
  m->add_option("manifest", mix.manifest, "Dataset manifest (.csv or .json)")->required();
  m->add_option("-t,--temperature", mix.temperature, "Sampling temperature")->capture_default_str();
  m->add_option("--group-by", mix.group_by, "group or none")->capture_default_str();
  m->add_option("--seed", mix.seed, "Seed for the index stream")->capture_default_str();
  m->add_option("-o,--out", mix.out, "MixPlan JSON path");
  m->add_option("--indices", mix.indices, "Index stream CSV path");

  PackArgs pack;
  auto* p = app.add_subcommand("pack", "Format and pack sample pairs into a shard");
  p->add_option("samples", pack.samples, "Sample pairs (.jsonl)")->required();
  p->add_option("--registry", pack.registry, "Special-token registry JSON")->required();
  p->add_option("--seq-len", pack.seq_len, "Sequence length")->capture_default_str();
  p->add_option("--policy", pack.policy, "split or droptail")->capture_default_str();
  p->add_flag("--eos-prefix,!--no-eos-prefix", pack.eos_prefix, "Prefix inference inputs with <eos>");
  p->add_option("-o,--out", pack.out, "Shard path")->required();
  p->add_option("--prefixes", pack.prefixes, "Write inference prefixes (.jsonl)");

  LedgerArgs params;
  auto* pa = app.add_subcommand("params", "Parameter counts");
  pa->add_option("--arch", params.arch, "Preset, all, scaled, or architecture JSON")->capture_default_str();
  pa->add_option("--format", params.format, "text or csv")->capture_default_str();
  pa->add_option("-o,--out", params.out, "Output path");

  LedgerArgs fl;
  auto* f = app.add_subcommand("flops", "FLOP estimates and scaling tables");
  f->add_option("--arch", fl.arch, "Preset, all, scaled, or architecture JSON")->capture_default_str();
  f->add_option("--mode", fl.mode, "exact or sixnd")->capture_default_str();
  f->add_option("--ctx", fl.ctx, "Average attention context (default seq_len/2)");
  f->add_option("--base", fl.base, "Base preset for a relative scaling table");
  f->add_option("--format", fl.format, "text or csv")->capture_default_str();
  f->add_option("-o,--out", fl.out, "Output path");

  FitArgs fit;
  auto* fi = app.add_subcommand("fit", "Fit a scaling law");
  fi->add_option("observations", fit.observations, "Observations (.csv or .jsonl)")->required();
  fi->add_option("--law", fit.law, "power or chinchilla")->capture_default_str();
  fi->add_option("--delta", fit.delta, "Huber delta")->capture_default_str();
  fi->add_option("--residual", fit.residual, "log or linear")->capture_default_str();
  fi->add_option("--group-by", fit.group_by, "none, direction, domain or both")->capture_default_str();
  fi->add_option("--holdout-ladder", fit.ladder, "auto or comma-separated models, smallest first")
      ->expected(0, 1)
      ->default_str("auto");
  fi->add_option("--unit", fit.unit, "Unit of D: samples or tokens")->capture_default_str();
  fi->add_option("--seed", fit.seed, "Seed for extra random starts")->capture_default_str();
  fi->add_option("--curve-points", fit.curve_points, "Points per curve sweep")->capture_default_str();
  fi->add_option("-o,--out", fit.out, "Fit JSON path; curve and holdout files go beside it");

  PlanArgs plan;
  auto* pl = app.add_subcommand("plan", "Invert a fitted law for budget planning");
  pl->add_option("fit", plan.fit, "Fit JSON")->required();
  pl->add_option("--group", plan.group, "Group name in a grouped fit file");
  pl->add_option("--target-loss", plan.target_loss, "Loss to reach");
  pl->add_option("--n", plan.n, "Model size for --target-loss");
  pl->add_option("--d", plan.d, "Data size for --target-loss");
  pl->add_option("--flop-budget", plan.budget, "Compute budget for the isoflop optimum");
  pl->add_option("--match", plan.match, "small:big, sizes or presets");
  pl->add_option("--big-d", plan.big_d, "Data of the big model for --match");
  pl->add_option("--flop-mode", plan.flop_mode, "sixnd or exact")->capture_default_str();
  pl->add_option("--arch", plan.arch, "Reference preset for exact FLOP scaling");
  pl->add_option("--tokens-per-sample", plan.tokens_per_sample, "Tokens per sample for 6ND")->capture_default_str();
  pl->add_flag("--json", plan.json_only, "Print JSON instead of the summary");
  pl->add_option("-o,--out", plan.out, "Plan JSON path");
  pl->add_option("--curve", plan.curve, "Isoflop curve CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (m->parsed()) return cmd_mix(mix);
    if (p->parsed()) return cmd_pack(pack);
    if (pa->parsed()) return cmd_params(params);
    if (f->parsed()) return cmd_flops(fl);
    if (fi->parsed()) return cmd_fit(fit);
    if (pl->parsed()) return cmd_plan(plan);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
