#include "medaudit/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <regex>
#include <set>

#include <json.hpp>

#include "medaudit/error.hpp"
#include "medaudit/io.hpp"
#include "medaudit/strings.hpp"

namespace medaudit {

namespace {

// Delimited parser with quoted-field support ("" escapes a quote, separators
// and newlines may appear inside quotes).
std::vector<std::vector<std::string>> parse_delimited(const std::string& text, char sep) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  size_t i = 0;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == sep) {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_row();
    } else {
      field.push_back(c);
    }
    ++i;
  }
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::optional<int> parse_age(const std::string& raw) {
  static const std::regex digits(R"(^\d{1,3}$)");
  std::string v = trim(raw);
  if (!std::regex_match(v, digits)) return std::nullopt;
  int age = std::stoi(v);
  if (age < 0 || age > 120) return std::nullopt;
  return age;
}

std::string normalize_text(const std::string& raw) { return trim(nfc(raw)); }

struct RowView {
  // returns nullopt when the row has no value for the column
  std::function<std::optional<std::string>(const std::string& column)> get;
};

PatientRecord build_record(const RowView& row, const ColumnMapping& mapping,
                           const std::string& where) {
  PatientRecord rec;
  auto required = [&](const std::string& column) {
    auto v = row.get(column);
    if (!v) throw SchemaError(where + ": missing column \"" + column + "\"");
    return normalize_text(*v);
  };
  auto optional_field = [&](const std::optional<std::string>& column) -> std::optional<std::string> {
    if (!column) return std::nullopt;
    auto v = row.get(*column);
    if (!v) return std::nullopt;
    std::string norm = normalize_text(*v);
    if (norm.empty()) return std::nullopt;
    return norm;
  };
  rec.id = required(mapping.id);
  rec.symptoms = required(mapping.symptoms);
  if (auto a = optional_field(mapping.age)) rec.age = parse_age(*a);
  if (auto g = optional_field(mapping.gender)) {
    std::string lowered = lower_ascii(*g);
    if (lowered == "male" || lowered == "female") {
      rec.gender = lowered;
    } else {
      rec.gender_raw = *g;
    }
  }
  rec.location = optional_field(mapping.location);
  rec.history = optional_field(mapping.history);
  rec.ground_truth = optional_field(mapping.ground_truth);
  return rec;
}

}  // namespace

Corpus load_corpus(const std::string& path, const ColumnMapping& mapping,
                   const std::string& corpus_name) {
  if (trim(mapping.id).empty() || trim(mapping.symptoms).empty()) {
    throw ConfigError("column mapping must name id and symptoms columns");
  }
  Corpus corpus;
  corpus.name = corpus_name.empty() ? std::filesystem::path(path).stem().string() : corpus_name;

  std::string ext = lower_ascii(std::filesystem::path(path).extension().string());
  bool jsonl = (ext == ".jsonl" || ext == ".ndjson" || ext == ".json");

  std::vector<PatientRecord> parsed;
  if (jsonl) {
    auto rows = read_jsonl(path);
    size_t line_no = 0;
    for (const auto& obj : rows) {
      ++line_no;
      const std::string where = path + " line " + std::to_string(line_no);
      if (!obj.is_object()) throw SchemaError(where + ": expected a JSON object");
      RowView view;
      view.get = [&obj](const std::string& column) -> std::optional<std::string> {
        auto it = obj.find(column);
        if (it == obj.end() || it->is_null()) return std::nullopt;
        if (it->is_string()) return it->get<std::string>();
        return it->dump();
      };
      // blank symptoms rows are skipped, so the symptoms key may be absent
      auto sym = view.get(mapping.symptoms);
      if (!sym || trim(*sym).empty()) {
        ++corpus.skipped_rows;
        continue;
      }
      parsed.push_back(build_record(view, mapping, where));
    }
  } else {
    char sep = (ext == ".tsv") ? '\t' : ',';
    auto rows = parse_delimited(read_file(path), sep);
    if (rows.empty()) throw EmptyCorpusError(path + ": no rows");
    std::vector<std::string> header;
    for (const auto& h : rows.front()) header.push_back(normalize_text(h));
    auto column_index = [&](const std::string& column) -> std::optional<size_t> {
      for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == column) return i;
      }
      return std::nullopt;
    };
    // required mappings must resolve against the header up front
    for (const std::string& column : {mapping.id, mapping.symptoms}) {
      if (!column_index(column)) {
        throw SchemaError(path + ": missing column \"" + column + "\"");
      }
    }
    for (size_t r = 1; r < rows.size(); ++r) {
      const auto& cells = rows[r];
      const std::string where = path + " row " + std::to_string(r + 1);
      RowView view;
      view.get = [&](const std::string& column) -> std::optional<std::string> {
        auto idx = column_index(column);
        if (!idx || *idx >= cells.size()) return std::nullopt;
        return cells[*idx];
      };
      auto sym = view.get(mapping.symptoms);
      if (!sym || trim(*sym).empty()) {
        ++corpus.skipped_rows;
        continue;
      }
      parsed.push_back(build_record(view, mapping, where));
    }
  }

  std::set<std::string> ids;
  for (const auto& rec : parsed) {
    if (!ids.insert(rec.id).second) {
      throw SchemaError(path + ": duplicate record id \"" + rec.id + "\"");
    }
  }
  if (parsed.empty()) throw EmptyCorpusError(path + ": no usable rows");

  corpus.records = std::move(parsed);
  corpus.has_ground_truth =
      mapping.ground_truth.has_value() &&
      std::all_of(corpus.records.begin(), corpus.records.end(),
                  [](const PatientRecord& r) { return r.ground_truth.has_value(); });
  return corpus;
}

}  // namespace medaudit
