#include "hgf/jsonl.hpp"

#include <fstream>

#include "hgf/error.hpp"

namespace hgf {

std::vector<Json> read_jsonl(std::istream& in) {
  std::vector<Json> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record = Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded() || !record.is_object()) {
      fail(ErrorKind::kValidation,
           "line " + std::to_string(line_no) + ": malformed record");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<Json> read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  try {
    return read_jsonl(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

void write_jsonl(std::ostream& out, const std::vector<Json>& records) {
  for (const auto& r : records) out << r.dump() << '\n';
}

void write_jsonl_file(const std::string& path, const std::vector<Json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  write_jsonl(out, records);
  if (!out) fail(ErrorKind::kIo, "write failed for " + path);
}

const Json& require_field(const Json& record, const char* name) {
  auto it = record.find(name);
  if (it == record.end() || it->is_null()) {
    fail(ErrorKind::kValidation, std::string("missing field '") + name + "'");
  }
  return *it;
}

std::string require_string(const Json& record, const char* name) {
  const Json& v = require_field(record, name);
  if (!v.is_string()) {
    fail(ErrorKind::kValidation, std::string("field '") + name + "' must be a string");
  }
  return v.get<std::string>();
}

double require_number(const Json& record, const char* name) {
  const Json& v = require_field(record, name);
  if (!v.is_number()) {
    fail(ErrorKind::kValidation, std::string("field '") + name + "' must be a number");
  }
  return v.get<double>();
}

bool require_binary(const Json& record, const char* name) {
  const Json& v = require_field(record, name);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) {
    const auto i = v.get<long long>();
    if (i == 0 || i == 1) return i == 1;
  }
  fail(ErrorKind::kValidation, std::string("field '") + name + "' must be 0 or 1");
}

}  // namespace hgf
