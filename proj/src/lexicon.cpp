#include "updp/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "updp/errors.hpp"
#include "updp/words.hpp"

namespace updp {
namespace {

using json = nlohmann::json;

struct CategoryName {
  Category category;
  std::string_view name;
};

constexpr CategoryName kCategories[] = {
    {Category::patient_id, "patient_id"}, {Category::personnel, "personnel"},
    {Category::contact, "contact"},       {Category::location, "location"},
    {Category::date, "date"},             {Category::demographic, "demographic"},
    {Category::institution, "institution"}, {Category::other, "other"},
    {Category::modality, "modality"},     {Category::view, "view"},
    {Category::anatomy, "anatomy"},       {Category::tissue, "tissue"},
    {Category::descriptor, "descriptor"},
};

// The filter placeholder "[DEID]" tokenizes to this word.
constexpr std::string_view kPlaceholderWord = "deid";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_phrase(const std::string& surface) {
  std::vector<std::string> words;
  std::istringstream in(surface);
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

// Canonicalizes and validates a raw term; `where` prefixes error messages.
LexTerm make_term(std::string_view raw, Category category, ListKind kind, std::size_t line,
                  const std::string& where) {
  if (kind_of(category) != kind) {
    throw ParseError(line, where + "category '" + std::string(to_string(category)) +
                               "' is not valid for the " + std::string(to_string(kind)));
  }
  std::string surface = canonical_phrase(raw);
  if (surface.empty()) {
    throw ParseError(line, where + "term '" + std::string(raw) + "' contains no words");
  }
  const auto words = split_phrase(surface);
  if (words.size() > kMaxPhraseWords) {
    throw ParseError(line, where + "term '" + std::string(raw) + "' has more than " +
                               std::to_string(kMaxPhraseWords) + " words");
  }
  if (kind == ListKind::blacklist &&
      std::find(words.begin(), words.end(), kPlaceholderWord) != words.end()) {
    throw ParseError(line, where + "blacklist term '" + std::string(raw) +
                               "' contains the reserved placeholder word 'deid'");
  }
  return LexTerm{std::move(surface), category};
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

std::vector<LexTerm> parse_json_entries(std::string_view text, ListKind kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line_of_offset(text, e.byte ? e.byte - 1 : 0),
                     std::string("malformed JSON: ") + e.what());
  }
  const json* entries = &doc;
  if (doc.is_object()) {
    const auto key = std::string(to_string(kind));
    if (!doc.contains(key)) return {};
    entries = &doc.at(key);
  }
  if (!entries->is_array()) {
    throw ParseError(0, "lexicon " + std::string(to_string(kind)) + " must be an array");
  }
  std::vector<LexTerm> out;
  std::size_t n = 0;
  for (const auto& e : *entries) {
    ++n;
    const std::string where = std::string(to_string(kind)) + " entry " + std::to_string(n) + ": ";
    if (!e.is_object() || !e.contains("term") || !e.at("term").is_string() ||
        !e.contains("category") || !e.at("category").is_string()) {
      throw ParseError(0, where + "expected an object with string fields 'term' and 'category'");
    }
    const auto cat_name = e.at("category").get<std::string>();
    const auto cat = parse_category(cat_name);
    if (!cat) throw ParseError(0, where + "unknown category '" + cat_name + "'");
    out.push_back(make_term(e.at("term").get<std::string>(), *cat, kind, 0, where));
  }
  return out;
}

std::vector<LexTerm> parse_plain_entries(std::string_view text, ListKind kind) {
  std::vector<LexTerm> out;
  Category current = kind == ListKind::blacklist ? Category::other : Category::descriptor;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      std::optional<std::string_view> header;
      if (body.starts_with("category:")) {
        header = trim(body.substr(std::string_view("category:").size()));
      } else if (!body.empty() && body.back() == ':' && parse_category(trim(body.substr(0, body.size() - 1)))) {
        header = trim(body.substr(0, body.size() - 1));
      }
      if (!header) continue;  // comment
      const auto cat = parse_category(*header);
      if (!cat) throw ParseError(line_no, "unknown category '" + std::string(*header) + "'");
      if (kind_of(*cat) != kind) {
        throw ParseError(line_no, "category '" + std::string(*header) + "' is not valid for the " +
                                      std::string(to_string(kind)));
      }
      current = *cat;
      continue;
    }
    out.push_back(make_term(line, current, kind, line_no, ""));
  }
  return out;
}

std::string read_all(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(Category c) {
  for (const auto& entry : kCategories) {
    if (entry.category == c) return entry.name;
  }
  return "other";
}

std::string_view to_string(ListKind k) { return k == ListKind::blacklist ? "blacklist" : "whitelist"; }

std::optional<Category> parse_category(std::string_view name) {
  for (const auto& entry : kCategories) {
    if (entry.name == name) return entry.category;
  }
  return std::nullopt;
}

ListKind kind_of(Category c) {
  return static_cast<int>(c) <= static_cast<int>(Category::other) ? ListKind::blacklist
                                                                    : ListKind::whitelist;
}

Lexicon::Lexicon(const std::vector<LexTerm>& blacklist, const std::vector<LexTerm>& whitelist) {
  const std::array<const std::vector<LexTerm>*, 2> inputs{&blacklist, &whitelist};
  std::array<std::set<std::string>, 2> words;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto kind = k == 0 ? ListKind::blacklist : ListKind::whitelist;
    for (const auto& raw : *inputs[k]) {
      auto term = make_term(raw.surface, raw.category, kind, 0, "");
      if (lookup_[k].contains(term.surface)) continue;
      const auto phrase_words = split_phrase(term.surface);
      longest_[k] = std::max(longest_[k], phrase_words.size());
      words[k].insert(phrase_words.begin(), phrase_words.end());
      lookup_[k].emplace(term.surface, lists_[k].size());
      lists_[k].push_back(std::move(term));
    }
  }
  std::vector<std::string> shared;
  std::set_intersection(words[0].begin(), words[0].end(), words[1].begin(), words[1].end(),
                        std::back_inserter(shared));
  if (!shared.empty()) {
    std::string list;
    for (const auto& w : shared) list += (list.empty() ? "" : ", ") + ("\"" + w + "\"");
    throw Error("blacklist and whitelist share tokens: " + list);
  }
}

const LexTerm* Lexicon::find(ListKind kind, std::string_view surface) const {
  const auto& map = lookup_[index(kind)];
  const auto it = map.find(std::string(surface));
  return it == map.end() ? nullptr : &lists_[index(kind)][it->second];
}

std::vector<LexTerm> parse_lexicon_entries(std::string_view text, ListKind kind) {
  const auto body = trim(text);
  if (!body.empty() && (body.front() == '{' || body.front() == '[')) {
    return parse_json_entries(text, kind);
  }
  return parse_plain_entries(text, kind);
}

Lexicon load_lexicon(std::istream& blacklist_source, std::istream& whitelist_source) {
  const auto black = parse_lexicon_entries(read_all(blacklist_source), ListKind::blacklist);
  const auto white = parse_lexicon_entries(read_all(whitelist_source), ListKind::whitelist);
  return Lexicon(black, white);
}

Lexicon load_lexicon_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open lexicon file " + path.string());
  const auto text = read_all(in);
  const auto body = trim(text);
  if (body.empty() || body.front() != '{') {
    throw ParseError(1, path.string() + ": combined lexicon must be a JSON object");
  }
  return Lexicon(parse_json_entries(text, ListKind::blacklist),
                 parse_json_entries(text, ListKind::whitelist));
}

std::string lexicon_to_json(const Lexicon& lex) {
  json doc = json::object();
  for (const auto kind : {ListKind::blacklist, ListKind::whitelist}) {
    json arr = json::array();
    for (const auto& t : lex.terms(kind)) {
      arr.push_back({{"term", t.surface}, {"category", std::string(to_string(t.category))}});
    }
    doc[std::string(to_string(kind))] = std::move(arr);
  }
  return doc.dump(2) + "\n";
}

std::vector<TermMatch> match_terms(std::string_view text, const Lexicon& lex) {
  const auto tokens = split_words(text);
  std::vector<TermMatch> out;
  for (const auto kind : {ListKind::blacklist, ListKind::whitelist}) {
    const std::size_t longest = lex.longest_phrase(kind);
    if (longest == 0) continue;
    struct Hit {
      std::size_t start;
      std::size_t len;
      const LexTerm* term;
    };
    std::vector<Hit> hits;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      std::string key;
      for (std::size_t n = 1; n <= longest && i + n <= tokens.size(); ++n) {
        if (n > 1) key.push_back(' ');
        key += tokens[i + n - 1].folded;
        if (const auto* term = lex.find(kind, key)) hits.push_back({i, n, term});
      }
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
      return a.len != b.len ? a.len > b.len : a.start < b.start;
    });
    std::vector<char> taken(tokens.size(), 0);
    for (const auto& h : hits) {
      if (std::any_of(taken.begin() + h.start, taken.begin() + h.start + h.len,
                      [](char c) { return c != 0; })) {
        continue;
      }
      std::fill(taken.begin() + h.start, taken.begin() + h.start + h.len, 1);
      out.push_back(TermMatch{tokens[h.start].begin, tokens[h.start + h.len - 1].end,
                              h.term->surface, kind, h.term->category});
    }
  }
  std::sort(out.begin(), out.end(), [](const TermMatch& a, const TermMatch& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.kind < b.kind;
  });
  return out;
}

TokenIdSets token_id_sets(const Lexicon& lex, const Vocabulary& vocab) {
  TokenIdSets out;
  for (const auto kind : {ListKind::blacklist, ListKind::whitelist}) {
    auto& ids = kind == ListKind::blacklist ? out.forbidden : out.preferred;
    auto& missing = kind == ListKind::blacklist ? out.missing_blacklist : out.missing_whitelist;
    std::set<std::string> absent;
    for (const auto& term : lex.terms(kind)) {
      for (const auto& w : split_phrase(term.surface)) {
        if (const auto id = vocab.find(w)) {
          ids.insert(*id);
        } else {
          absent.insert(w);
        }
      }
    }
    missing.assign(absent.begin(), absent.end());
  }
  return out;
}

}  // namespace updp
