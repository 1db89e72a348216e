#pragma once

#include <optional>
#include <string>
#include <vector>

namespace medaudit {

struct PatientRecord {
  std::string id;
  std::string symptoms;  // nonempty after trimming
  std::optional<int> age;  // [0, 120]
  std::optional<std::string> gender;      // "male" or "female"
  std::optional<std::string> gender_raw;  // source value when not in {male, female}
  std::optional<std::string> location;
  std::optional<std::string> history;
  std::optional<std::string> ground_truth;
};

struct Corpus {
  std::string name;
  std::vector<PatientRecord> records;
  bool has_ground_truth = false;
  int skipped_rows = 0;  // rows dropped for blank symptoms
};

// Names the source column for each record field. Unmapped optional fields stay
// absent. id and symptoms are required.
struct ColumnMapping {
  std::string id;
  std::string symptoms;
  std::optional<std::string> age;
  std::optional<std::string> gender;
  std::optional<std::string> location;
  std::optional<std::string> history;
  std::optional<std::string> ground_truth;
};

// Reads a delimited file with a header row (.csv comma, .tsv tab) or a
// JSON-lines file (.jsonl/.ndjson/.json), auto-detected by extension. Text is
// NFC-normalized and trimmed on load. Rows with blank symptoms are skipped and
// counted. Throws IoError, SchemaError (bad mapping, duplicate id) or
// EmptyCorpusError (no usable rows).
Corpus load_corpus(const std::string& path, const ColumnMapping& mapping,
                   const std::string& corpus_name = "");

}  // namespace medaudit
