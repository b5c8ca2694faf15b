#include "updp/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "updp/rng.hpp"
#include "updp/words.hpp"

namespace updp {
namespace {

constexpr std::array<const char*, 20> kFirstNames = {
    "Alice", "Bruno", "Carmen", "Dmitri", "Elena", "Farid", "Greta", "Hiro", "Ingrid", "Jonas",
    "Kavya", "Lucas", "Mirela", "Nadia", "Oskar", "Priya", "Quentin", "Rosa", "Stefan", "Tamsin"};
constexpr std::array<const char*, 20> kLastNames = {
    "Abbott", "Baranov", "Castillo", "Dunmore", "Eriksen", "Fairley", "Gallo", "Haddad", "Ivanova", "Jaramillo",
    "Kowalski", "Lindqvist", "Moreau", "Nakamura", "Okafor", "Petrakis", "Quigley", "Rasmussen", "Sorensen",
    "Thorne"};
constexpr std::array<const char*, 8> kDoctors = {"Whitfield", "Yamada", "Zoller", "Varga",
                                                 "Ulrich",    "Pereira", "Mbeki",  "Lorenz"};
constexpr std::array<const char*, 5> kHospitals = {"Saint Brigid Hospital", "Northgate Medical Center",
                                                   "Riverside Clinic", "Harbourview Infirmary",
                                                   "Elmwood General Hospital"};

// Whitelist phrases used by the templates.
struct WhiteTerm {
  const char* surface;
  Category category;
};
constexpr WhiteTerm kWhitelist[] = {
    {"pa", Category::view},           {"frontal", Category::view},       {"radiograph", Category::modality},
    {"chest", Category::anatomy},     {"heart", Category::anatomy},      {"lungs", Category::anatomy},
    {"lung", Category::anatomy},      {"mediastinum", Category::anatomy}, {"consolidation", Category::tissue},
    {"opacity", Category::tissue},    {"cardiomegaly", Category::descriptor},
    {"pleural effusion", Category::descriptor}, {"pneumothorax", Category::descriptor},
    {"nodule", Category::descriptor}, {"normal", Category::descriptor}, {"clear", Category::descriptor},
};

class ReportBuilder {
 public:
  void text(std::string_view s) { out_ += s; }

  void term(std::string_view s, ListKind kind, Category cat) {
    const std::size_t begin = out_.size();
    out_ += s;
    spans_.push_back({begin, out_.size(), canonical_phrase(s), kind, cat});
  }
  void phi(std::string_view s, Category cat) { term(s, ListKind::blacklist, cat); }
  void white(std::string_view s, Category cat) { term(s, ListKind::whitelist, cat); }

  std::string take_text() { return std::move(out_); }
  std::vector<TruthSpan> take_spans() { return std::move(spans_); }

 private:
  std::string out_;
  std::vector<TruthSpan> spans_;
};

struct Patient {
  std::string id;
  std::string name;
  std::string mrn;
  std::string phone;
  std::vector<double> watermark;  // one offset per region
};

struct Findings {
  bool cardiomegaly = false;
  bool effusion = false;
  bool pneumothorax = false;
  bool consolidation = false;
  bool nodule = false;
};

bool in_ellipse(double r, double c, double cr, double cc, double rr, double rc) {
  const double a = (r - cr) / rr;
  const double b = (c - cc) / rc;
  return a * a + b * b <= 1.0;
}

ImageGray render(const SynthConfig& cfg, const Patient& p, const Findings& f, Rng& rng) {
  const double h = static_cast<double>(cfg.height);
  const double w = static_cast<double>(cfg.width);
  std::normal_distribution<double> noise(0.0, cfg.noise);
  const std::size_t wm_r = watermark_rows(cfg.height);
  std::vector<double> px(cfg.height * cfg.width);
  for (std::size_t ri = 0; ri < cfg.height; ++ri) {
    for (std::size_t ci = 0; ci < cfg.width; ++ci) {
      const double r = (static_cast<double>(ri) + 0.5) / h;
      const double c = (static_cast<double>(ci) + 0.5) / w;
      double v = 0.1;
      const bool right_lung = in_ellipse(r, c, 0.55, 0.3, 0.3, 0.15);
      const bool left_lung = in_ellipse(r, c, 0.55, 0.7, 0.3, 0.15);
      if (right_lung || left_lung) v = 0.35;
      if (f.effusion && (right_lung || left_lung) && r > 0.72) v = 0.65;
      if (f.pneumothorax && right_lung && r < 0.45) v = 0.05;
      if (f.consolidation && in_ellipse(r, c, 0.7, 0.7, 0.08, 0.08)) v = 0.6;
      if (f.nodule && in_ellipse(r, c, 0.4, 0.68, 0.04, 0.04)) v = 0.8;
      if (in_ellipse(r, c, 0.62, 0.5, 0.18, f.cardiomegaly ? 0.2 : 0.12)) v = 0.7;
      if (ri < wm_r) v += p.watermark[ci * p.watermark.size() / cfg.width];
      px[ri * cfg.width + ci] = std::clamp(v + noise(rng), 0.0, 1.0);
    }
  }
  return ImageGray(cfg.height, cfg.width, std::move(px));
}

std::string two_digits(int v) {
  std::ostringstream ss;
  ss << std::setw(2) << std::setfill('0') << v;
  return ss.str();
}

void write_report(ReportBuilder& b, const Patient& p, const Findings& f, const std::string& date,
                  const std::string& doctor, const std::string& hospital, Rng& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  b.text("Patient: ");
  b.phi(p.name, Category::patient_id);
  b.text(". MRN: ");
  b.phi(p.mrn, Category::patient_id);
  b.text(". Exam date: ");
  b.phi(date, Category::date);
  b.text(". Phone: ");
  b.phi(p.phone, Category::contact);
  b.text(". Referring physician: ");
  b.phi("Dr. " + doctor, Category::personnel);
  b.text(", ");
  b.phi(hospital, Category::institution);
  b.text(". ");

  b.white(coin(rng) ? "PA" : "Frontal", Category::view);
  b.text(" ");
  b.white("radiograph", Category::modality);
  b.text(" of the ");
  b.white("chest", Category::anatomy);
  b.text(". ");

  if (f.cardiomegaly) {
    b.text("The ");
    b.white("heart", Category::anatomy);
    b.text(" is enlarged, consistent with ");
    b.white("cardiomegaly", Category::descriptor);
    b.text(". ");
  } else {
    b.white("Heart", Category::anatomy);
    b.text(" size is ");
    b.white("normal", Category::descriptor);
    b.text(". ");
  }
  if (f.effusion) {
    b.text(coin(rng) ? "Small " : "Moderate ");
    b.white("pleural effusion", Category::descriptor);
    b.text(" is seen. ");
  } else {
    b.text("No ");
    b.white("pleural effusion", Category::descriptor);
    b.text(". ");
  }
  if (f.pneumothorax) {
    b.text("There is a right apical ");
    b.white("pneumothorax", Category::descriptor);
    b.text(". ");
  } else {
    b.text("No ");
    b.white("pneumothorax", Category::descriptor);
    b.text(". ");
  }
  if (f.consolidation) {
    b.text("Focal ");
    b.white("consolidation", Category::tissue);
    b.text(" in the left lower ");
    b.white("lung", Category::anatomy);
    b.text(". ");
  }
  if (f.nodule) {
    b.text("A small ");
    b.white("nodule", Category::descriptor);
    b.text(" is noted in the left upper ");
    b.white("lung", Category::anatomy);
    b.text(". ");
  }
  if (!f.effusion && !f.pneumothorax && !f.consolidation && !f.nodule) {
    b.text("The ");
    b.white("lungs", Category::anatomy);
    b.text(" are ");
    b.white("clear", Category::descriptor);
    b.text(". ");
  }
  b.text("The ");
  b.white("mediastinum", Category::anatomy);
  b.text(coin(rng) ? " is unremarkable." : " is within limits.");
}

}  // namespace

void SynthConfig::validate() const {
  if (patients < 1) throw std::invalid_argument("synth: need at least one patient");
  if (patients > kFirstNames.size() * kLastNames.size()) throw std::invalid_argument("synth: too many patients");
  if (height < 16 || width < 16) throw std::invalid_argument("synth: images must be at least 16x16");
  if (watermark_regions < 1 || watermark_regions > width) throw std::invalid_argument("synth: watermark_regions in [1,width]");
  if (!(watermark_max >= 0.0 && watermark_max <= 0.9)) throw std::invalid_argument("synth: watermark_max in [0,0.9]");
  if (!(noise >= 0.0)) throw std::invalid_argument("synth: noise must be >= 0");
  if (!(finding_rate >= 0.0 && finding_rate <= 1.0)) throw std::invalid_argument("synth: finding_rate in [0,1]");
}

std::size_t watermark_rows(std::size_t height) { return height / 4; }
std::size_t watermark_levels(std::size_t patients, std::size_t regions) {
  std::size_t b = 1;
  while (true) {
    std::size_t codes = 1;
    for (std::size_t r = 0; r < regions; ++r) codes *= b;
    if (codes >= patients) return b;
    ++b;
  }
}

SynthCorpus synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, 0);

  // Distinct (first, last) pairs and distinct watermark levels per patient.
  std::vector<std::size_t> pairs(kFirstNames.size() * kLastNames.size());
  std::iota(pairs.begin(), pairs.end(), 0);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const std::size_t base = watermark_levels(cfg.patients, cfg.watermark_regions);
  std::size_t n_codes = 1;
  for (std::size_t r = 0; r < cfg.watermark_regions; ++r) n_codes *= base;
  std::vector<std::size_t> codes(n_codes);
  std::iota(codes.begin(), codes.end(), 0);
  std::shuffle(codes.begin(), codes.end(), rng);

  std::vector<Patient> patients;
  std::uniform_int_distribution<int> mrn_digits(1000000, 9999999);
  std::uniform_int_distribution<int> phone_digits(1000, 9999);
  for (std::size_t k = 0; k < cfg.patients; ++k) {
    Patient p;
    std::ostringstream id;
    id << "P" << std::setw(4) << std::setfill('0') << k;
    p.id = id.str();
    p.name = std::string(kFirstNames[pairs[k] / kLastNames.size()]) + " " + kLastNames[pairs[k] % kLastNames.size()];
    p.mrn = std::to_string(mrn_digits(rng));
    p.phone = "555-" + std::to_string(phone_digits(rng));
    for (std::size_t r = 0, code = codes[k]; r < cfg.watermark_regions; ++r, code /= base) {
      const double digit = static_cast<double>(code % base);
      p.watermark.push_back(base > 1 ? cfg.watermark_max * digit / static_cast<double>(base - 1) : 0.0);
    }
    patients.push_back(std::move(p));
  }

  SynthCorpus corpus;
  std::vector<LexTerm> black;
  std::vector<LexTerm> white;
  for (const auto& t : kWhitelist) white.push_back({t.surface, t.category});

  std::bernoulli_distribution finding(cfg.finding_rate);
  std::uniform_int_distribution<int> month(1, 12);
  std::uniform_int_distribution<int> day(1, 28);
  std::uniform_int_distribution<int> year(2015, 2023);
  std::uniform_int_distribution<std::size_t> doctor(0, kDoctors.size() - 1);
  std::uniform_int_distribution<std::size_t> hospital(0, kHospitals.size() - 1);
  for (std::size_t i = 0; i < cfg.records; ++i) {
    const Patient& p = patients[i % cfg.patients];
    Rng rec_rng = make_rng(cfg.seed, i + 1);
    Findings f{finding(rec_rng), finding(rec_rng), finding(rec_rng), finding(rec_rng), finding(rec_rng)};
    const std::string date = two_digits(month(rec_rng)) + "/" + two_digits(day(rec_rng)) + "/" +
                             std::to_string(year(rec_rng));
    const std::string doc = kDoctors[doctor(rec_rng)];
    const std::string hosp = kHospitals[hospital(rec_rng)];

    ReportBuilder b;
    write_report(b, p, f, date, doc, hosp, rec_rng);
    Record rec;
    std::ostringstream id;
    id << "R" << std::setw(6) << std::setfill('0') << i;
    rec.id = id.str();
    rec.patient_id = p.id;
    rec.image = render(cfg, p, f, rec_rng);
    rec.report = b.take_text();
    auto spans = b.take_spans();
    for (const auto& s : spans) {
      if (s.kind == ListKind::blacklist) black.push_back({s.surface, s.category});
    }
    corpus.records.push_back(std::move(rec));
    corpus.truth.push_back(std::move(spans));
  }
  corpus.lexicon = Lexicon(black, white);
  return corpus;
}

}  // namespace updp
