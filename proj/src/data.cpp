#include "partialid/data.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace partialid {

namespace {

using nlohmann::json;

std::string cell_name(int y, int z) {
  return "z" + std::to_string(z) + ".y" + std::to_string(y);
}

std::string cell_name(int y, int s, int z) {
  return "z" + std::to_string(z) + ".y" + std::to_string(y) + "s" + std::to_string(s);
}

void check_count(std::int64_t v, const std::string& name) {
  if (v < 0) throw ValidationError("data", "negative count in cell " + name);
}

std::int64_t read_count(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError("data", "missing count " + where + "." + key);
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ParseError("data", "count " + where + "." + key + " is not an integer");
  }
  const std::int64_t n = v.get<std::int64_t>();
  check_count(n, where + "." + key);
  return n;
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ParseError("data", "unexpected key '" + it.key() + "' in " + where);
  }
}

const json& arm_object(const json& counts, int z) {
  const std::string key = "z" + std::to_string(z);
  if (!counts.is_object() || !counts.contains(key) || !counts.at(key).is_object()) {
    throw ParseError("data", "counts must contain an object for arm " + key);
  }
  return counts.at(key);
}

TwoArmCounts two_arm_from_json(const json& counts) {
  TwoArmCounts::Cells cells{};
  for (int z = 0; z < 2; ++z) {
    const json& arm = arm_object(counts, z);
    const std::string where = "z" + std::to_string(z);
    reject_unknown_keys(arm, {"y0", "y1"}, where);
    for (int y = 0; y < 2; ++y) cells[y][z] = read_count(arm, "y" + std::to_string(y), where);
  }
  return TwoArmCounts::from_cells(cells);
}

ThreeVarCounts three_var_from_json(const json& counts, bool outcome_defined_when_s0) {
  if (outcome_defined_when_s0) {
    ThreeVarCounts::Cells cells{};
    for (int z = 0; z < 2; ++z) {
      const json& arm = arm_object(counts, z);
      const std::string where = "z" + std::to_string(z);
      reject_unknown_keys(arm, {"y0s0", "y0s1", "y1s0", "y1s1"}, where);
      for (int y = 0; y < 2; ++y)
        for (int s = 0; s < 2; ++s)
          cells[y][s][z] = read_count(arm, "y" + std::to_string(y) + "s" + std::to_string(s), where);
    }
    return ThreeVarCounts::from_cells(cells, true);
  }
  std::array<std::array<std::int64_t, 2>, 2> s1{};
  std::array<std::int64_t, 2> s0{};
  for (int z = 0; z < 2; ++z) {
    const json& arm = arm_object(counts, z);
    const std::string where = "z" + std::to_string(z);
    reject_unknown_keys(arm, {"s0", "y0s1", "y1s1"}, where);
    s0[z] = read_count(arm, "s0", where);
    for (int y = 0; y < 2; ++y) s1[y][z] = read_count(arm, "y" + std::to_string(y) + "s1", where);
  }
  return ThreeVarCounts::with_merged_s0(s1, s0);
}

bool read_outcome_flag(const json& obj) {
  if (!obj.contains("outcome_defined_when_s0")) return true;
  const json& v = obj.at("outcome_defined_when_s0");
  if (!v.is_boolean()) throw ParseError("data", "outcome_defined_when_s0 must be a boolean");
  return v.get<bool>();
}

std::string read_design(const json& obj) {
  if (!obj.is_object() || !obj.contains("design") || !obj.at("design").is_string()) {
    throw ParseError("data", "missing string field 'design'");
  }
  return obj.at("design").get<std::string>();
}

std::variant<TwoArmCounts, ThreeVarCounts> stratum_counts_from_json(const json& obj) {
  const std::string design = read_design(obj);
  if (!obj.contains("counts")) throw ParseError("data", "stratum is missing 'counts'");
  if (design == "two_arm") return two_arm_from_json(obj.at("counts"));
  if (design == "three_var") return three_var_from_json(obj.at("counts"), read_outcome_flag(obj));
  throw ParseError("data", "unsupported stratum design '" + design + "'");
}

double read_real(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_number()) {
    throw ParseError("data", "missing number " + where + "." + key);
  }
  return obj.at(key).get<double>();
}

MeanSummary summary_from_json(const json& root) {
  MeanSummary s;
  for (const char* field : {"mean_y", "pz"}) {
    if (!root.contains(field) || !root.at(field).is_object()) {
      throw ParseError("data", std::string("ate_summary needs object '") + field + "'");
    }
  }
  for (int z = 0; z < 2; ++z) {
    const std::string key = "z" + std::to_string(z);
    s.mean_y[z] = read_real(root.at("mean_y"), key, "mean_y");
    s.pz[z] = read_real(root.at("pz"), key, "pz");
  }
  if (root.contains("n")) {
    if (!root.at("n").is_number_integer()) throw ParseError("data", "n must be an integer");
    s.n = root.at("n").get<std::int64_t>();
    if (*s.n < 1) throw ValidationError("data", "n must be positive");
  }
  for (int z = 0; z < 2; ++z) {
    if (!(s.pz[z] >= 0.0 && s.pz[z] <= 1.0)) {
      throw ValidationError("data", "pz.z" + std::to_string(z) + " outside [0,1]");
    }
  }
  if (std::abs(s.pz[0] + s.pz[1] - 1.0) > 1e-12) {
    throw ValidationError("data", "pz does not sum to 1");
  }
  return s;
}

json two_arm_to_json(const TwoArmCounts& c) {
  json out = json::object();
  for (int z = 0; z < 2; ++z) {
    json arm = json::object();
    for (int y = 0; y < 2; ++y) arm["y" + std::to_string(y)] = c.count(y, z);
    out["z" + std::to_string(z)] = arm;
  }
  return out;
}

json three_var_to_json(const ThreeVarCounts& c) {
  json out = json::object();
  for (int z = 0; z < 2; ++z) {
    json arm = json::object();
    if (c.outcome_defined_when_s0()) {
      for (int y = 0; y < 2; ++y)
        for (int s = 0; s < 2; ++s)
          arm["y" + std::to_string(y) + "s" + std::to_string(s)] = c.count(y, s, z);
    } else {
      arm["s0"] = c.s_total(0, z);
      for (int y = 0; y < 2; ++y) arm["y" + std::to_string(y) + "s1"] = c.count(y, 1, z);
    }
    out["z" + std::to_string(z)] = arm;
  }
  return out;
}

json stratum_to_json(const Stratum& st) {
  json out = json::object();
  out["label"] = st.label;
  out["weight"] = st.weight;
  if (const auto* two = std::get_if<TwoArmCounts>(&st.counts)) {
    out["design"] = "two_arm";
    out["counts"] = two_arm_to_json(*two);
  } else {
    const auto& three = std::get<ThreeVarCounts>(st.counts);
    out["design"] = "three_var";
    out["outcome_defined_when_s0"] = three.outcome_defined_when_s0();
    out["counts"] = three_var_to_json(three);
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

std::int64_t parse_int_field(const std::string& text, const std::string& column, std::size_t line) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (text.empty() || used != text.size()) {
    throw ParseError("data", "line " + std::to_string(line) + ": column '" + column +
                                 "' is not an integer: '" + text + "'");
  }
  return v;
}

int parse_binary_field(const std::string& text, const std::string& column, std::size_t line) {
  const std::int64_t v = parse_int_field(text, column, line);
  if (v != 0 && v != 1) {
    throw ParseError("data", "line " + std::to_string(line) + ": column '" + column +
                                 "' must be 0 or 1");
  }
  return static_cast<int>(v);
}

struct CsvCells {
  bool has_s = false;
  // key (y, s, z); y = -1 marks a merged s = 0 row
  std::map<std::tuple<int, int, int>, std::int64_t> cells;
};

std::variant<TwoArmCounts, ThreeVarCounts> counts_from_csv_cells(const CsvCells& cc) {
  if (!cc.has_s) {
    TwoArmCounts::Cells cells{};
    for (const auto& [key, n] : cc.cells) cells[std::get<0>(key)][std::get<2>(key)] = n;
    return TwoArmCounts::from_cells(cells);
  }
  bool merged = false;
  bool explicit_s0 = false;
  for (const auto& [key, n] : cc.cells) {
    if (std::get<0>(key) < 0) merged = true;
    else if (std::get<1>(key) == 0) explicit_s0 = true;
  }
  if (merged && explicit_s0) {
    throw ParseError("data", "s=0 rows mix merged (empty y) and per-outcome counts");
  }
  if (merged) {
    std::array<std::array<std::int64_t, 2>, 2> s1{};
    std::array<std::int64_t, 2> s0{};
    for (const auto& [key, n] : cc.cells) {
      const auto [y, s, z] = key;
      if (y < 0) s0[z] = n;
      else s1[y][z] = n;
    }
    return ThreeVarCounts::with_merged_s0(s1, s0);
  }
  ThreeVarCounts::Cells cells{};
  for (const auto& [key, n] : cc.cells) {
    const auto [y, s, z] = key;
    cells[y][s][z] = n;
  }
  return ThreeVarCounts::from_cells(cells, true);
}

}  // namespace

TwoArmCounts TwoArmCounts::from_cells(const Cells& cells) {
  for (int y = 0; y < 2; ++y)
    for (int z = 0; z < 2; ++z) check_count(cells[y][z], cell_name(y, z));
  TwoArmCounts c;
  c.cells_ = cells;
  for (int z = 0; z < 2; ++z) {
    if (c.arm_total(z) == 0) throw ValidationError("data", "arm z" + std::to_string(z) + " is empty");
  }
  return c;
}

ThreeVarCounts ThreeVarCounts::from_cells(const Cells& cells, bool outcome_defined_when_s0) {
  for (int y = 0; y < 2; ++y)
    for (int s = 0; s < 2; ++s)
      for (int z = 0; z < 2; ++z) check_count(cells[y][s][z], cell_name(y, s, z));
  if (!outcome_defined_when_s0) {
    for (int z = 0; z < 2; ++z) {
      if (cells[1][0][z] != 0) {
        throw ValidationError("data", "cell " + cell_name(1, 0, z) +
                                          " must be empty when the outcome is undefined for s=0");
      }
    }
  }
  ThreeVarCounts c;
  c.cells_ = cells;
  c.outcome_defined_when_s0_ = outcome_defined_when_s0;
  for (int z = 0; z < 2; ++z) {
    if (c.arm_total(z) == 0) throw ValidationError("data", "arm z" + std::to_string(z) + " is empty");
  }
  return c;
}

ThreeVarCounts ThreeVarCounts::with_merged_s0(
    const std::array<std::array<std::int64_t, 2>, 2>& s1_cells,
    const std::array<std::int64_t, 2>& s0_totals) {
  Cells cells{};
  for (int z = 0; z < 2; ++z) {
    check_count(s0_totals[z], "z" + std::to_string(z) + ".s0");
    cells[0][0][z] = s0_totals[z];
    for (int y = 0; y < 2; ++y) cells[y][1][z] = s1_cells[y][z];
  }
  return from_cells(cells, false);
}

StratifiedCounts StratifiedCounts::make(std::vector<Stratum> strata) {
  if (strata.empty()) throw ValidationError("data", "stratified data needs at least one stratum");
  double sum = 0.0;
  for (const auto& st : strata) {
    if (!(st.weight >= 0.0) || !std::isfinite(st.weight)) {
      throw ValidationError("data", "stratum '" + st.label + "' has a negative weight");
    }
    sum += st.weight;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("data", "stratum weights do not sum to 1");
  StratifiedCounts sc;
  sc.strata_ = std::move(strata);
  return sc;
}

FileFormat parse_file_format(const std::string& text) {
  if (text == "json") return FileFormat::json;
  if (text == "csv") return FileFormat::csv;
  throw ParseError("data", "unknown input format '" + text + "' (expected json or csv)");
}

CountData parse_counts_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("data", std::string("malformed JSON: ") + e.what());
  }
  const std::string design = read_design(root);
  if (design == "two_arm") {
    reject_unknown_keys(root, {"design", "counts"}, "document");
    if (!root.contains("counts")) throw ParseError("data", "missing 'counts'");
    return two_arm_from_json(root.at("counts"));
  }
  if (design == "three_var") {
    reject_unknown_keys(root, {"design", "counts", "outcome_defined_when_s0"}, "document");
    if (!root.contains("counts")) throw ParseError("data", "missing 'counts'");
    return three_var_from_json(root.at("counts"), read_outcome_flag(root));
  }
  if (design == "stratified") {
    reject_unknown_keys(root, {"design", "counts"}, "document");
    if (!root.contains("counts") || !root.at("counts").is_array()) {
      throw ParseError("data", "stratified 'counts' must be an array of strata");
    }
    std::vector<Stratum> strata;
    for (const json& item : root.at("counts")) {
      if (!item.is_object()) throw ParseError("data", "stratum must be an object");
      reject_unknown_keys(item, {"label", "weight", "design", "counts", "outcome_defined_when_s0"},
                          "stratum");
      Stratum st;
      if (!item.contains("label") || !item.at("label").is_string()) {
        throw ParseError("data", "stratum is missing a string 'label'");
      }
      st.label = item.at("label").get<std::string>();
      st.weight = read_real(item, "weight", "stratum '" + st.label + "'");
      try {
        st.counts = stratum_counts_from_json(item);
      } catch (const ParseError& e) {
        throw ParseError("data", "stratum '" + st.label + "': " + bare_message(e));
      } catch (const ValidationError& e) {
        throw ValidationError("data", "stratum '" + st.label + "': " + bare_message(e));
      }
      strata.push_back(std::move(st));
    }
    return StratifiedCounts::make(std::move(strata));
  }
  if (design == "ate_summary") {
    reject_unknown_keys(root, {"design", "mean_y", "pz", "n"}, "document");
    return summary_from_json(root);
  }
  throw ParseError("data", "unknown design '" + design + "'");
}

CountData parse_counts_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw ParseError("data", "CSV input is empty");

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(header[i], i).second) {
      throw ParseError("data", "duplicate CSV column '" + header[i] + "'");
    }
  }
  for (const auto& [name, idx] : col) {
    if (name != "y" && name != "s" && name != "z" && name != "count" && name != "stratum") {
      throw ParseError("data", "unexpected CSV column '" + name + "'");
    }
  }
  for (const char* required : {"y", "z", "count"}) {
    if (!col.count(required)) {
      throw ParseError("data", std::string("CSV header needs column '") + required + "'");
    }
  }
  const bool has_s = col.count("s") > 0;
  const bool has_stratum = col.count("stratum") > 0;

  std::vector<std::string> order;
  std::map<std::string, CsvCells> groups;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("data", "line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(header.size()) + " fields");
    }
    const std::string label = has_stratum ? fields[col.at("stratum")] : std::string();
    auto [it, inserted] = groups.try_emplace(label);
    if (inserted) order.push_back(label);
    CsvCells& cc = it->second;
    cc.has_s = has_s;

    const int z = parse_binary_field(fields[col.at("z")], "z", line_no);
    const int s = has_s ? parse_binary_field(fields[col.at("s")], "s", line_no) : 0;
    const std::string& ytext = fields[col.at("y")];
    int y = 0;
    if (ytext.empty() || ytext == "NA") {
      if (!has_s || s != 0) {
        throw ParseError("data", "line " + std::to_string(line_no) +
                                     ": y may be empty only on s=0 rows");
      }
      y = -1;
    } else {
      y = parse_binary_field(ytext, "y", line_no);
    }
    const std::int64_t n = parse_int_field(fields[col.at("count")], "count", line_no);
    if (n < 0) {
      throw ValidationError("data", "line " + std::to_string(line_no) + ": negative count in cell " +
                                        (has_s ? cell_name(y < 0 ? 0 : y, s, z) : cell_name(y, z)));
    }
    if (!cc.cells.emplace(std::make_tuple(y, s, z), n).second) {
      throw ParseError("data", "line " + std::to_string(line_no) + ": duplicate cell");
    }
  }
  if (groups.empty()) throw ParseError("data", "CSV input has no data rows");

  if (!has_stratum) {
    auto counts = counts_from_csv_cells(groups.begin()->second);
    return std::visit([](auto&& c) -> CountData { return c; }, counts);
  }

  std::vector<Stratum> strata;
  std::int64_t grand = 0;
  for (const auto& label : order) {
    Stratum st;
    st.label = label;
    try {
      st.counts = counts_from_csv_cells(groups.at(label));
    } catch (const ValidationError& e) {
      throw ValidationError("data", "stratum '" + label + "': " + bare_message(e));
    }
    grand += std::visit([](const auto& c) { return c.total(); }, st.counts);
    strata.push_back(std::move(st));
  }
  // Empirical stratum weights.
  for (auto& st : strata) {
    st.weight = static_cast<double>(std::visit([](const auto& c) { return c.total(); }, st.counts)) /
                static_cast<double>(grand);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < strata.size(); ++i) sum += strata[i].weight;
  strata.back().weight = 1.0 - sum;
  return StratifiedCounts::make(std::move(strata));
}

CountData load_counts(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("data", "cannot open input file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return format == FileFormat::json ? parse_counts_json(ss.str()) : parse_counts_csv(ss.str());
}

std::string design_name(const CountData& data) {
  struct Visitor {
    std::string operator()(const TwoArmCounts&) const { return "two_arm"; }
    std::string operator()(const ThreeVarCounts&) const { return "three_var"; }
    std::string operator()(const StratifiedCounts&) const { return "stratified"; }
    std::string operator()(const MeanSummary&) const { return "ate_summary"; }
  };
  return std::visit(Visitor{}, data);
}

std::string serialize_counts_json(const CountData& data) {
  json root = json::object();
  root["design"] = design_name(data);
  if (const auto* two = std::get_if<TwoArmCounts>(&data)) {
    root["counts"] = two_arm_to_json(*two);
  } else if (const auto* three = std::get_if<ThreeVarCounts>(&data)) {
    root["outcome_defined_when_s0"] = three->outcome_defined_when_s0();
    root["counts"] = three_var_to_json(*three);
  } else if (const auto* strat = std::get_if<StratifiedCounts>(&data)) {
    json arr = json::array();
    for (const auto& st : strat->strata()) arr.push_back(stratum_to_json(st));
    root["counts"] = arr;
  } else {
    const auto& sum = std::get<MeanSummary>(data);
    root["mean_y"] = {{"z0", sum.mean_y[0]}, {"z1", sum.mean_y[1]}};
    root["pz"] = {{"z0", sum.pz[0]}, {"z1", sum.pz[1]}};
    if (sum.n) root["n"] = *sum.n;
  }
  return root.dump(2) + "\n";
}

}  // namespace partialid
