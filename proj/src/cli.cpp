#include "updp/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "updp/config.hpp"
#include "updp/errors.hpp"
#include "updp/evalkit.hpp"
#include "updp/gradcheck.hpp"
#include "updp/pipeline.hpp"
#include "updp/synth.hpp"

namespace updp {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Usage/config/IO problems, reported with exit status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
}

struct LexiconArgs {
  std::string combined;
  std::string blacklist;
  std::string whitelist;

  void add_to(CLI::App* app) {
    app->add_option("--lexicon", combined, "combined lexicon JSON (blacklist + whitelist arrays)");
    app->add_option("--blacklist", blacklist, "blacklist file (JSON or plain)");
    app->add_option("--whitelist", whitelist, "whitelist file (JSON or plain)");
  }

  Lexicon load() const {
    if (!combined.empty()) {
      if (!blacklist.empty() || !whitelist.empty()) {
        throw UsageError("--lexicon cannot be combined with --blacklist/--whitelist");
      }
      return load_lexicon_file(combined);
    }
    std::istringstream black(blacklist.empty() ? std::string() : read_text(blacklist));
    std::istringstream white(whitelist.empty() ? std::string() : read_text(whitelist));
    return load_lexicon(black, white);
  }
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

// ---- deid ---------------------------------------------------------------------

struct DeidArgs {
  std::string config;
  LexiconArgs lexicon;
  std::string input;
  std::string output;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool verbose_audit = false;
  bool inline_images = false;
};

int cmd_deid(const DeidArgs& a, std::ostream& out, std::ostream& err) {
  const auto wall_start = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  RunConfig cfg = load_config(a.config);
  if (a.seed) cfg.pipeline.seed = *a.seed;
  cfg.pipeline.validate();
  cfg.model.validate();
  if (a.workers < 1) throw UsageError("--workers must be at least 1");
  const Lexicon lex = a.lexicon.load();
  const auto records = read_dataset(a.input);
  const fs::path manifest_path = a.manifest.empty() ? fs::path(a.output + ".manifest.json") : fs::path(a.manifest);
  const auto storage = a.inline_images ? ImageStorage::inline_pixels : ImageStorage::pgm_files;

  ordered_json manifest;
  manifest["fingerprint"] = config_fingerprint(cfg);
  manifest["config"] = json::parse(canonical_config_json(cfg));
  manifest["input"] = a.input;
  manifest["output"] = a.output;

  DeidRunResult result;
  TokenIdSets ids;
  if (!records.empty()) {
    std::vector<std::string> reports;
    reports.reserve(records.size());
    for (const auto& r : records) reports.push_back(r.report);
    const Vocabulary vocab = build_vocab(reports, cfg.model.min_count);
    const auto table = EmbeddingTable::generate(vocab.size(), cfg.model.D, cfg.model.embedding_seed);
    const ReferenceEncoder enc(cfg.model.D, cfg.model.pool_grid, cfg.model.encoder_seed);
    const ToyGenerator gen(cfg.model.D, cfg.model.image_h, cfg.model.image_w, cfg.pipeline.alpha,
                           cfg.model.generator_seed);
    const DeidContext ctx(PipelineDeps{lex, vocab, table, enc, gen}, cfg.pipeline);
    ids = ctx.ids();
    result = deid_dataset(records, ctx, a.workers, a.verbose_audit);
    write_deid_dataset(result.records, vocab, a.output, storage);
  } else {
    write_deid_dataset({}, Vocabulary{}, a.output, storage);
  }

  manifest["counts"] = {{"input", records.size()}, {"output", result.records.size()},
                        {"failed", result.failures.size()}};
  ordered_json failures = ordered_json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"index", f.index}, {"id", f.id}, {"message", f.message}});
    err << "record " << f.id << " failed: " << f.message << '\n';
  }
  manifest["failures"] = std::move(failures);
  manifest["missing_lexicon_terms"] = {{"blacklist", ids.missing_blacklist}, {"whitelist", ids.missing_whitelist}};
  ordered_json losses = ordered_json::array();
  for (const auto& r : result.records) {
    const double initial = r.audit.rounds.empty() ? 0.0 : r.audit.rounds.front().initial_loss;
    const double final_loss = r.audit.rounds.empty() ? 0.0 : r.audit.rounds.back().final_loss;
    losses.push_back({{"id", r.id}, {"initial_loss", initial}, {"final_loss", final_loss}, {"T", cfg.pipeline.T},
                      {"eta", cfg.pipeline.eta}, {"R", cfg.pipeline.R}});
  }
  manifest["records"] = std::move(losses);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  manifest["timing"] = {{"started", started}, {"wall_seconds", wall}};
  write_text(manifest_path, manifest.dump(2) + "\n");

  out << "deid: " << result.records.size() << "/" << records.size() << " records, " << result.failures.size()
      << " failed, fingerprint " << config_fingerprint(cfg) << '\n';
  return result.failures.empty() ? kExitOk : kExitRecordFailures;
}

// ---- filter-reports -----------------------------------------------------------

struct FilterArgs {
  LexiconArgs lexicon;
  std::string input;
  std::string output;
  bool plain = false;
};

int cmd_filter_reports(const FilterArgs& a, std::ostream& out) {
  const Lexicon lex = a.lexicon.load();
  const auto lines = read_lines(a.input);
  std::ostringstream body;
  std::size_t n = 0;
  std::size_t removed = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string id = std::to_string(n);
    std::string report;
    if (a.plain) {
      report = lines[i];
    } else {
      if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
      try {
        const json node = json::parse(lines[i]);
        report = node.at("report").get<std::string>();
        if (node.contains("id")) id = node.at("id").get<std::string>();
      } catch (const json::exception& e) {
        throw ParseError(i + 1, a.input + ": " + e.what());
      }
    }
    const auto filtered = filter_report(report, lex);
    ordered_json removals = ordered_json::array();
    for (const auto& r : filtered.removals) {
      removals.push_back({{"begin", r.begin}, {"end", r.end}, {"surface", r.surface},
                          {"category", std::string(to_string(r.category))}});
    }
    removed += filtered.removals.size();
    body << ordered_json{{"id", id}, {"report", filtered.text}, {"removals", removals}}.dump() << '\n';
    ++n;
  }
  write_text(a.output, body.str());
  out << "filter-reports: " << n << " reports, " << removed << " removals\n";
  return kExitOk;
}

// ---- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string config;
  std::string input;
  std::string reference;
  std::vector<std::string> metrics{"bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l"};
};

double text_metric(const std::string& name, std::string_view c, std::string_view r) {
  if (name.size() == 5 && name.starts_with("bleu") && name[4] >= '1' && name[4] <= '4') {
    return bleu_n(c, r, name[4] - '0').value;
  }
  if (name == "rouge_l") return rouge_l(c, r).value;
  if (name == "meteor") return meteor_simplified(c, r).value;
  throw UsageError("unknown metric '" + name + "'");
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const std::string fingerprint = config_fingerprint(load_config(a.config));
  const bool images = std::find(a.metrics.begin(), a.metrics.end(), "ssim") != a.metrics.end();
  if (images && a.metrics.size() > 1) throw UsageError("ssim compares datasets and cannot be mixed with text metrics");

  const auto emit = [&](const std::string& metric, double value, std::size_t n) {
    out << ordered_json{{"metric", metric}, {"value", value}, {"n_pairs", n}, {"fingerprint", fingerprint}}.dump()
        << '\n';
  };
  if (images) {
    const auto cand = read_dataset(a.input);
    const auto ref = read_dataset(a.reference);
    if (cand.size() != ref.size()) throw UsageError("datasets differ in record count");
    double sum = 0.0;
    for (std::size_t i = 0; i < cand.size(); ++i) sum += ssim(cand[i].image, ref[i].image);
    emit("ssim", cand.empty() ? 0.0 : sum / static_cast<double>(cand.size()), cand.size());
    return kExitOk;
  }
  const auto cand = read_lines(a.input);
  const auto ref = read_lines(a.reference);
  if (cand.size() != ref.size()) {
    throw UsageError("line counts differ: " + std::to_string(cand.size()) + " vs " + std::to_string(ref.size()));
  }
  for (const auto& m : a.metrics) {
    double sum = 0.0;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      try {
        sum += text_metric(m, cand[i], ref[i]);
      } catch (const std::invalid_argument& e) {
        throw UsageError("line " + std::to_string(i + 1) + ": " + e.what());
      }
    }
    emit(m, cand.empty() ? 0.0 : sum / static_cast<double>(cand.size()), cand.size());
  }
  return kExitOk;
}

// ---- probe --------------------------------------------------------------------

struct ProbeArgs {
  std::string train;
  std::string input;
  std::size_t dim = 64;
  std::size_t grid = 8;
  std::uint64_t seed = 5;
};

std::vector<LabeledImage> labeled(const std::vector<Record>& records) {
  std::vector<LabeledImage> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.image, r.patient_id});
  return out;
}

int cmd_probe(const ProbeArgs& a, std::ostream& out) {
  const ReferenceEncoder enc(a.dim, a.grid, a.seed);
  ProbeResult res;
  try {
    res = identity_probe(labeled(read_dataset(a.train)), labeled(read_dataset(a.input)), enc);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  ordered_json node{{"accuracy", res.accuracy}, {"n_classes", res.n_classes}, {"n_eval", res.n_eval}};
  node["confusion"] = res.confusion;
  out << node.dump() << '\n';
  return kExitOk;
}

// ---- synth-corpus -------------------------------------------------------------

struct SynthArgs {
  SynthConfig cfg;
  std::string output;
  std::string lexicon_out;
  std::string truth_out;
  bool inline_images = false;
};

int cmd_synth_corpus(const SynthArgs& a, std::ostream& out) {
  try {
    a.cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto corpus = synth_corpus(a.cfg);
  write_dataset(corpus.records, a.output, a.inline_images ? ImageStorage::inline_pixels : ImageStorage::pgm_files);
  write_text(a.lexicon_out.empty() ? a.output + ".lexicon.json" : a.lexicon_out, lexicon_to_json(corpus.lexicon));
  std::ostringstream truth;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    ordered_json spans = ordered_json::array();
    for (const auto& s : corpus.truth[i]) {
      spans.push_back({{"begin", s.begin}, {"end", s.end}, {"surface", s.surface},
                       {"kind", std::string(to_string(s.kind))}, {"category", std::string(to_string(s.category))}});
    }
    truth << ordered_json{{"id", corpus.records[i].id}, {"spans", spans}}.dump() << '\n';
  }
  write_text(a.truth_out.empty() ? a.output + ".truth.jsonl" : a.truth_out, truth.str());
  out << "synth-corpus: " << corpus.records.size() << " records, " << a.cfg.patients << " patients\n";
  return kExitOk;
}

// ---- gradcheck ----------------------------------------------------------------

int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out) {
  if (o.instances == 0) throw UsageError("--instances must be at least 1");
  const auto rep = run_gradcheck(o);
  out << "gradcheck: " << rep.relative_errors.size() << " instances, " << rep.failures
      << " above tolerance, max relative error " << std::setprecision(3) << rep.max_relative_error << '\n';
  return rep.passed() ? kExitOk : kExitRecordFailures;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Utility-preserving de-identification of image/report pairs", "updp"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "print the default configuration and exit");

  DeidArgs deid;
  auto* c_deid = app.add_subcommand("deid", "de-identify a dataset");
  c_deid->add_option("--config", deid.config, "run configuration JSON");
  deid.lexicon.add_to(c_deid);
  c_deid->add_option("--input", deid.input, "input dataset (JSONL)")->required();
  c_deid->add_option("--output", deid.output, "output dataset (JSONL)")->required();
  c_deid->add_option("--manifest", deid.manifest, "run manifest path (default <output>.manifest.json)");
  c_deid->add_option("--seed", deid.seed, "override the configured seed");
  c_deid->add_option("--workers", deid.workers, "parallel record workers");
  c_deid->add_flag("--verbose-audit", deid.verbose_audit, "dump per-position candidate sets");
  c_deid->add_flag("--inline-images", deid.inline_images, "store output pixels inline instead of PGM files");

  FilterArgs filter;
  auto* c_filter = app.add_subcommand("filter-reports", "mask blacklisted phrases in reports");
  filter.lexicon.add_to(c_filter);
  c_filter->add_option("--input", filter.input, "reports: JSONL with a `report` field, or plain lines")->required();
  c_filter->add_option("--output", filter.output, "filtered reports (JSONL)")->required();
  c_filter->add_flag("--plain", filter.plain, "input holds one report per line");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "score candidates against references");
  c_eval->add_option("--config", eval.config, "configuration whose fingerprint tags the output");
  c_eval->add_option("--input", eval.input, "candidates: one sentence per line, or a dataset for ssim")->required();
  c_eval->add_option("--reference", eval.reference, "references, paired by line")->required();
  c_eval->add_option("--metrics", eval.metrics, "bleu1..bleu4, meteor, rouge_l, or ssim")->delimiter(',');

  ProbeArgs probe;
  auto* c_probe = app.add_subcommand("probe", "identity-leakage probe");
  c_probe->add_option("--train", probe.train, "training dataset")->required();
  c_probe->add_option("--input", probe.input, "evaluation dataset")->required();
  c_probe->add_option("--dim", probe.dim, "probe encoder feature dimension");
  c_probe->add_option("--grid", probe.grid, "probe encoder pooling grid");
  c_probe->add_option("--seed", probe.seed, "probe encoder seed");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-corpus", "generate the synthetic watermark cohort");
  c_synth->add_option("--output", synth.output, "dataset path (JSONL)")->required();
  c_synth->add_option("--records", synth.cfg.records, "number of records");
  c_synth->add_option("--patients", synth.cfg.patients, "number of patients");
  c_synth->add_option("--seed", synth.cfg.seed, "generator seed");
  c_synth->add_option("--height", synth.cfg.height, "image height");
  c_synth->add_option("--width", synth.cfg.width, "image width");
  c_synth->add_option("--lexicon-out", synth.lexicon_out, "lexicon path (default <output>.lexicon.json)");
  c_synth->add_option("--truth-out", synth.truth_out, "ground-truth spans (default <output>.truth.jsonl)");
  c_synth->add_flag("--inline-images", synth.inline_images, "store pixels inline instead of PGM files");

  GradcheckOptions grad;
  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference check of the alignment gradient");
  c_grad->add_option("--instances", grad.instances, "number of random instances");
  c_grad->add_option("--seed", grad.seed, "suite seed");
  c_grad->add_option("--dim", grad.dim, "feature dimension");
  c_grad->add_option("--length", grad.length, "prompt length");
  c_grad->add_option("--tolerance", grad.tolerance, "maximum relative error");
  c_grad->add_flag("--inject-bug", grad.inject_bug, "corrupt the analytic gradient (checks the checker)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "updp: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (print_defaults) {
      out << json::parse(canonical_config_json(RunConfig{})).dump(2) << '\n';
      return kExitOk;
    }
    if (c_deid->parsed()) return cmd_deid(deid, out, err);
    if (c_filter->parsed()) return cmd_filter_reports(filter, out);
    if (c_eval->parsed()) return cmd_eval(eval, out);
    if (c_probe->parsed()) return cmd_probe(probe, out);
    if (c_synth->parsed()) return cmd_synth_corpus(synth, out);
    if (c_grad->parsed()) return cmd_gradcheck(grad, out);
    out << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "updp: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace updp
