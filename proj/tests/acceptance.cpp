// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mtscale/holdout.hpp"
#include "mtscale/lawfit.hpp"
#include "mtscale/ledger.hpp"
#include "mtscale/mixer.hpp"
#include "mtscale/packer.hpp"
#include "mtscale/planner.hpp"
#include "mtscale/shard.hpp"
#include "synthetic.hpp"

using namespace mtscale;
using fixtures::log_grid;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  explicit Check(Outcome& o) : o_(o) {}
  void expect(bool cond, const std::string& what) {
    if (!cond && o_.pass) {
      o_.pass = false;
      o_.detail = what;
    }
  }

 private:
  Outcome& o_;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// 1 ---------------------------------------------------------------------------

Outcome ac1_param_counts() {
  Outcome o;
  Check c(o);
  struct Row {
    const char* key;
    std::uint64_t non_embedding, embedding;
  };
  const Row published[] = {
      {"70m", 70295552, 51380224},       {"160m", 162126336, 77070336},   {"410m", 405071872, 102760448},
      {"610m", 607448064, 154140672},    {"1b", 1011257344, 205520896},   {"6.9b", 6855204864, 411041792},
      {"70m+d768", 119599104, 77070336}, {"70m+d1024", 178339840, 102760448}, {"70m+24l", 127038464, 51380224},
  };
  for (const auto& r : published) {
    const auto p = ledger::param_count(ledger::find_preset(r.key).arch);
    c.expect(p.non_embedding == r.non_embedding && p.embedding == r.embedding, std::string("mismatch for ") + r.key);
  }
  const auto twelve = ledger::param_count(ledger::find_preset("70m+12l").arch);
  c.expect(twelve.non_embedding == 89209856ULL, "70M+12l formula value is not 89,209,856");
  const auto notes = ledger::discrepancy_notes(ledger::scaled_presets());
  c.expect(notes.size() == 1 && notes[0].find("89209856") != std::string::npos, "70M+12l note missing");
  o.detail = o.pass ? "9 rows exact; 70M+12l note reports 89209856" : o.detail;
  return o;
}

// 2 ---------------------------------------------------------------------------

Outcome ac2_temperature() {
  Outcome o;
  Check c(o);
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> count(1, 12);
  std::uniform_real_distribution<double> logsize(0.0, std::log(1e9));
  const int vectors = 1500;
  for (int v = 0; v < vectors && o.pass; ++v) {
    std::vector<mixer::DatasetSpec> specs;
    const int n = count(gen);
    for (int i = 0; i < n; ++i)
      specs.push_back({"d" + std::to_string(i), "g", std::uint64_t(std::floor(std::exp(logsize(gen)))) + 1});
    std::uint64_t largest = 0;
    for (const auto& s : specs) largest = std::max(largest, s.size);

    const auto identity = mixer::mix_plan(specs, 1.0);
    for (std::size_t i = 0; i < specs.size(); ++i)
      c.expect(identity.entries[i].oversampled == specs[i].size, "t=1 is not the identity");

    const double temps[] = {1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 100.0};
    for (double t : temps) {
      const auto plan = mixer::mix_plan(specs, t);
      for (std::size_t i = 0; i < specs.size(); ++i)
        if (specs[i].size == largest) c.expect(plan.entries[i].oversampled == largest, "largest dataset moved");
    }
    for (const auto& s : specs)
      for (std::size_t k = 0; k + 1 < std::size(temps); ++k)
        c.expect(mixer::oversampled_real(s.size, largest, temps[k]) <=
                     mixer::oversampled_real(s.size, largest, temps[k + 1]),
                 "pre-floor size decreased with t");
  }
  const auto worked = mixer::mix_plan({{"a", "g", 100}, {"b", "g", 10}}, 5.0);
  c.expect(worked.entries[0].oversampled == 100 && worked.entries[1].oversampled == 63, "[100,10] t=5 is not [100,63]");
  if (o.pass) o.detail = std::to_string(vectors) + " random vectors; [100,10] t=5 -> [100,63]";
  return o;
}

// 3 ---------------------------------------------------------------------------

double max_relative(const std::function<double(double, double)>& fit, const std::function<double(double, double)>& law,
                    const std::vector<double>& Ns, const std::vector<double>& Ds) {
  double worst = 0.0;
  for (double N : Ns)
    for (double D : Ds) worst = std::max(worst, std::abs(fit(N, D) - law(N, D)) / law(N, D));
  return worst;
}

Outcome ac3_recovery() {
  Outcome o;
  Check c(o);
  using namespace lawfit;
  const fixtures::TruePower pw;
  const fixtures::TrueChinchilla ch;
  const auto Ns = log_grid(7e7, 7e9, 6);
  const auto Ds = log_grid(1e6, 1e9, 12);
  const std::vector<double> one{1e8};

  const auto p0 = fit_power_law(fixtures::power_observations(pw, Ns));
  const double ep0 = max_relative([&](double N, double) { return predict(p0, N); }, [&](double N, double) { return pw(N); },
                                  log_grid(7e7, 7e9, 50), one);
  const auto c0 = fit_chinchilla(fixtures::chinchilla_observations(ch, Ns, Ds));
  const double ec0 = max_relative([&](double N, double D) { return predict(c0, N, D); },
                                  [&](double N, double D) { return ch(N, D); }, log_grid(7e7, 7e9, 20), log_grid(1e6, 1e9, 20));
  c.expect(ep0 < 1e-3, "noiseless power error " + num(ep0));
  c.expect(ec0 < 1e-3, "noiseless chinchilla error " + num(ec0));

  double ep1 = 0.0, ec1 = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p1 = fit_power_law(fixtures::power_observations(pw, Ns, 0.01, seed));
    ep1 = std::max(ep1, std::abs(predict(p1, 2 * Ns.back()) - pw(2 * Ns.back())) / pw(2 * Ns.back()));
    const auto c1 = fit_chinchilla(fixtures::chinchilla_observations(ch, Ns, Ds, 0.01, seed));
    ec1 = std::max(ec1, max_relative([&](double N, double D) { return predict(c1, N, D); },
                                     [&](double N, double D) { return ch(N, D); }, {2 * Ns.back()}, Ds));
  }
  c.expect(ep1 < 0.03, "noisy power held-out error " + num(ep1));
  c.expect(ec1 < 0.03, "noisy chinchilla held-out error " + num(ec1));
  if (o.pass)
    o.detail = "noiseless max rel err power " + num(ep0) + ", chinchilla " + num(ec0) + "; 1% noise at 2x max N: power " +
               num(ep1) + ", chinchilla " + num(ec1);
  return o;
}

// 4 ---------------------------------------------------------------------------

Outcome ac4_optimizer() {
  Outcome o;
  Check c(o);
  using namespace lawfit;
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto la_axis = linspace(-1, 20, 20), p_axis = linspace(0, 2, 20), lb_axis = linspace(-1, 20, 20);
  double worst_margin = -std::numeric_limits<double>::infinity();
  const int problems = 50;
  for (int trial = 0; trial < problems; ++trial) {
    const fixtures::TruePower law{std::exp(1 + 4 * u(gen)), 0.1 + 0.5 * u(gen), 0.5 + 2 * u(gen)};
    const auto obs = fixtures::power_observations(law, log_grid(1e6, 1e10, 5 + trial % 5), 0.02, trial + 1);
    HuberObjective obj(power_shape(), obs, 0.01, ResidualSpace::Log);
    std::vector<double> g(3);
    double grid_best = std::numeric_limits<double>::infinity();
    for (double la : la_axis)
      for (double p : p_axis)
        for (double lb : lb_axis) grid_best = std::min(grid_best, obj(std::vector<double>{la, p, lb}, g));
    const double fitted = fit_power_law(obs).objective;
    worst_margin = std::max(worst_margin, fitted - grid_best);
    c.expect(fitted <= grid_best, "trial " + std::to_string(trial) + ": quasi-Newton worse than grid");
  }

  double worst_grad = 0.0;
  const auto pw_obs = fixtures::power_observations(fixtures::TruePower{}, log_grid(1e7, 1e10, 8), 0.02, 3);
  const auto ch_obs = fixtures::chinchilla_observations(fixtures::TrueChinchilla{}, log_grid(7e7, 7e9, 4),
                                                        log_grid(1e6, 1e9, 6), 0.02, 4);
  for (auto space : {ResidualSpace::Log, ResidualSpace::Linear}) {
    HuberObjective pw(power_shape(), pw_obs, 0.01, space);
    HuberObjective ch(chinchilla_shape(), ch_obs, 0.01, space);
    for (int trial = 0; trial < 100; ++trial) {
      const bool chin = trial % 2;
      const auto& obj = chin ? ch : pw;
      std::vector<double> x = chin ? std::vector<double>{std::log(1 + u(gen)), 3 + 4 * u(gen), 0.1 + 0.5 * u(gen),
                                                         4 + 4 * u(gen), 0.1 + 0.4 * u(gen)}
                                   : std::vector<double>{1 + 2 * u(gen), 0.1 + 0.4 * u(gen), std::log(1 + u(gen))};
      std::vector<double> ga(x.size());
      obj(x, ga);
      const optim::Objective f = [&obj](std::span<const double> y, std::span<double> h) { return obj(y, h); };
      const auto fd = optim::central_difference(f, x, 1e-6);
      const double scale = std::max(optim::max_abs(ga), 1e-8);
      for (std::size_t i = 0; i < x.size(); ++i) worst_grad = std::max(worst_grad, std::abs(ga[i] - fd[i]) / scale);
    }
  }
  c.expect(worst_grad <= 1e-5, "gradient disagreement " + num(worst_grad));
  if (o.pass)
    o.detail = std::to_string(problems) + " problems, worst (fit - grid) " + num(worst_margin) +
               "; max gradient rel diff " + num(worst_grad);
  return o;
}

// 5 ---------------------------------------------------------------------------

std::vector<std::string> model_names(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("m" + std::to_string(i));
  return v;
}

Outcome ac5_holdout() {
  Outcome o;
  Check c(o);
  using namespace lawfit;
  const auto Ns = log_grid(7e7, 7e9, 6);
  auto broken = fixtures::power_observations(fixtures::TruePower{}, Ns);
  broken.back().loss += 0.15;
  const auto rep = holdout_extrapolation(broken, model_names(6), LawKind::Power);
  const auto& row = rep.rows.at(0);
  const double held = std::abs(row.held_out.at(0).relative_error);
  const double in = std::max(row.max_in_sample_relative, 1e-300);
  c.expect(held >= 10 * in, "held-out error " + num(held) + " is not 10x in-sample " + num(in));

  // Same break on a ladder with 0.2% noise, so in-sample residuals are not ~0.
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto noisy = fixtures::power_observations(fixtures::TruePower{}, Ns, 0.002, seed);
    noisy.back().loss += 0.15;
    const auto r = holdout_extrapolation(noisy, model_names(6), LawKind::Power).rows.at(0);
    worst_ratio = std::min(worst_ratio, std::abs(r.held_out.at(0).relative_error) / r.max_in_sample_relative);
  }
  c.expect(worst_ratio >= 10, "noisy break ratio " + num(worst_ratio));

  double clean_worst = 0.0;
  const auto clean = holdout_extrapolation(fixtures::power_observations(fixtures::TruePower{}, Ns), model_names(6),
                                           LawKind::Power);
  for (const auto& r : clean.rows)
    for (const auto& h : r.held_out) clean_worst = std::max(clean_worst, std::abs(h.relative_error));
  const auto chin = holdout_extrapolation(
      fixtures::chinchilla_observations(fixtures::TrueChinchilla{}, Ns, log_grid(1e6, 1e9, 8)), model_names(6),
      LawKind::Chinchilla);
  for (const auto& r : chin.rows)
    for (const auto& h : r.held_out) clean_worst = std::max(clean_worst, std::abs(h.relative_error));
  c.expect(clean_worst < 1e-3, "break-free extrapolation error " + num(clean_worst));
  if (o.pass)
    o.detail = "break: held-out " + num(held) + " vs in-sample " + num(row.max_in_sample_relative) +
               "; noisy ladders min ratio " + num(worst_ratio) +
               "; break-free max " + num(clean_worst);
  return o;
}

// 6 ---------------------------------------------------------------------------

packer::SpecialTokenRegistry registry() {
  packer::SpecialTokenRegistry reg;
  reg.pad = 0;
  reg.end_of_sequence = 1;
  reg.end_of_source = 2;
  reg.languages = {{"en", 3}, {"fr", 4}, {"de", 5}, {"es", 6}};
  reg.domains = {{"general", 7}, {"finance", 8}};
  reg.vocab_size = 32000;
  reg.validate();
  return reg;
}

Outcome ac6_packing() {
  Outcome o;
  Check c(o);
  const auto reg = registry();
  std::mt19937_64 gen(6);
  std::uniform_int_distribution<int> len(1, 60);
  std::uniform_int_distribution<packer::TokenId> tok(16, 31999);
  const std::vector<std::string> langs{"en", "fr", "de", "es"}, doms{"general", "finance"};
  std::vector<packer::SamplePair> pairs;
  std::vector<packer::FormattedSample> formatted;
  for (int i = 0; i < 10000; ++i) {
    packer::SamplePair p;
    p.source_tokens.resize(len(gen));
    p.target_tokens.resize(len(gen));
    for (auto& t : p.source_tokens) t = tok(gen);
    for (auto& t : p.target_tokens) t = tok(gen);
    p.source_lang = langs[gen() % langs.size()];
    p.target_lang = langs[gen() % langs.size()];
    p.domain = doms[gen() % doms.size()];
    formatted.push_back(packer::format_sample(p, reg));
    pairs.push_back(std::move(p));
  }
  const auto packed = packer::pack(formatted, 128, packer::BoundaryPolicy::Split, reg);
  c.expect(packed.skipped == 0 && packed.accepted == pairs.size(), "samples were skipped");
  c.expect(packer::decode_shard(packed.shard, reg) == pairs, "decoded pairs differ");

  const auto stream = packer::unpadded_stream(packed.shard, reg.pad);
  std::size_t pos = 0, boundaries = 0;
  for (std::size_t i = 0; i < pairs.size() && o.pass; ++i) {
    if (i > 0) {
      c.expect(stream.tokens[pos - 1] == reg.end_of_sequence, "sample " + std::to_string(i) + " not preceded by <eos>");
      const auto prefix = packer::inference_prefix(pairs[i].source_tokens, pairs[i].target_lang, pairs[i].source_lang,
                                                   pairs[i].domain, reg, true);
      c.expect(std::equal(prefix.begin(), prefix.end(), stream.tokens.begin() + std::ptrdiff_t(pos - 1)),
               "inference prefix differs from training context at sample " + std::to_string(i));
      ++boundaries;
    }
    pos += formatted[i].size();
  }
  c.expect(pos == stream.tokens.size(), "stream length differs from formatted total");

  const auto bytes = encode_shard(packed.shard);
  const auto path = std::filesystem::temp_directory_path() / "mtscale_acceptance_shard.bin";
  packer::write_shard(packed.shard, path);
  const auto back = packer::read_shard(path);
  std::filesystem::remove(path);
  c.expect(back == packed.shard && encode_shard(back) == bytes, "shard did not round-trip byte-exactly");
  if (o.pass)
    o.detail = "10000 pairs decoded; " + std::to_string(boundaries) + " boundaries checked; " +
               std::to_string(bytes.size()) + "-byte shard round-tripped";
  return o;
}

// 7 ---------------------------------------------------------------------------

Outcome ac7_planner() {
  Outcome o;
  Check c(o);
  const lawfit::ChinchillaFit fit{1.7, 400.0, 0.34, 1200.0, 0.28, 0.0, true, 0, lawfit::DataUnit::Samples};
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_round = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double N = std::exp(std::log(1e7) + u(gen) * std::log(1e4));
    const double D = std::exp(std::log(1e5) + u(gen) * std::log(1e6));
    const double L = lawfit::predict(fit, N, D);
    const auto d = planner::data_needed(fit, N, L);
    const auto n = planner::params_needed(fit, D, L);
    c.expect(d.feasible && n.feasible, "round trip infeasible");
    worst_round = std::max({worst_round, std::abs(d.value / D - 1), std::abs(n.value / N - 1)});
  }
  c.expect(worst_round < 1e-9, "round-trip error " + num(worst_round));

  const double k = 512;
  const auto counter = planner::FlopCounter::six_nd(lawfit::DataUnit::Samples, k);
  const double G = std::pow(fit.alpha * fit.a / (fit.beta * fit.b), 1.0 / (fit.alpha + fit.beta));
  double worst_iso = 0.0, prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (int i = 0; i < 20; ++i) {
    const double C = 1e17 * std::pow(10.0, 6.0 * i / 19.0);
    const auto r = planner::isoflop_optimum(fit, C, counter);
    const double N = G * std::pow(C / (6 * k), fit.beta / (fit.alpha + fit.beta));
    const double D = C / (6 * k * N);
    worst_iso = std::max({worst_iso, std::abs(r.N / N - 1), std::abs(r.D / D - 1)});
    monotone = monotone && r.loss <= prev;
    prev = r.loss;
  }
  c.expect(worst_iso < 1e-3, "isoflop off closed form by " + num(worst_iso));
  c.expect(monotone, "loss* not monotone in budget");
  if (o.pass)
    o.detail = "round-trip max rel " + num(worst_round) + "; isoflop max rel " + num(worst_iso) + "; 20-point sweep monotone";
  return o;
}

// 8 ---------------------------------------------------------------------------

Outcome ac8_loss_fraction() {
  Outcome o;
  Check c(o);
  const auto reg = registry();
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<packer::TokenId> tok(16, 31999);
  double lo = 1.0, hi = 0.0;
  for (int length : {20, 24, 32, 48, 64, 100, 200}) {
    std::vector<packer::FormattedSample> samples;
    for (int i = 0; i < 500; ++i) {
      packer::SamplePair p;
      p.source_tokens.resize(length);
      p.target_tokens.resize(length);
      for (auto& t : p.source_tokens) t = tok(gen);
      for (auto& t : p.target_tokens) t = tok(gen);
      p.source_lang = "en";
      p.target_lang = "fr";
      p.domain = "general";
      samples.push_back(packer::format_sample(p, reg));
    }
    const auto packed = packer::pack(samples, 512, packer::BoundaryPolicy::Split, reg);
    const double f = packer::shard_stats(packed.shard, reg).loss_fraction();
    lo = std::min(lo, f);
    hi = std::max(hi, f);
    c.expect(f >= 0.45 && f <= 0.55, "length " + std::to_string(length) + ": fraction " + num(f));
  }
  if (o.pass) o.detail = "loss fraction in [" + num(lo) + ", " + num(hi) + "] for lengths 20..200";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"AC1 parameter counts", ac1_param_counts},   {"AC2 temperature sampling", ac2_temperature},
      {"AC3 synthetic law recovery", ac3_recovery}, {"AC4 optimizer soundness", ac4_optimizer},
      {"AC5 holdout extrapolation", ac5_holdout},   {"AC6 packing and <eos> rule", ac6_packing},
      {"AC7 planner inversions", ac7_planner},      {"AC8 target-loss fraction", ac8_loss_fraction},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = cr.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s (%.2fs): %s\n", out.pass ? "PASS" : "FAIL", cr.name, secs, out.detail.c_str());
    std::fflush(stdout);
    failed += !out.pass;
  }
  std::printf("%d/%zu criteria passed\n", int(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
