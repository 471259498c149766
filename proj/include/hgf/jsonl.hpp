#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace hgf {

using Json = nlohmann::json;

// Reads line-delimited JSON objects. Blank lines are skipped; a malformed
// line raises a validation error naming its 1-based line number.
std::vector<Json> read_jsonl(std::istream& in);
std::vector<Json> read_jsonl_file(const std::string& path);

void write_jsonl(std::ostream& out, const std::vector<Json>& records);
void write_jsonl_file(const std::string& path, const std::vector<Json>& records);

// Field accessors that raise validation errors with the field name.
const Json& require_field(const Json& record, const char* name);
std::string require_string(const Json& record, const char* name);
double require_number(const Json& record, const char* name);
bool require_binary(const Json& record, const char* name);

}  // namespace hgf
