#include "edag/schema.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "edag/crc32.hpp"
#include "edag/errors.hpp"

namespace edag {

int EventTypeSpec::role_index(std::string_view role_name) const {
  for (size_t i = 0; i < roles.size(); ++i)
    if (roles[i].name == role_name) return static_cast<int>(i);
  return -1;
}

const EventRole* EventTypeSpec::find_role(std::string_view role_name) const {
  int i = role_index(role_name);
  return i < 0 ? nullptr : &roles[i];
}

int SchemaRegistry::spec_index(std::string_view code) const {
  for (size_t i = 0; i < specs.size(); ++i)
    if (specs[i].code == code) return static_cast<int>(i);
  return -1;
}

const EventTypeSpec* SchemaRegistry::find_spec(std::string_view code) const {
  int i = spec_index(code);
  return i < 0 ? nullptr : &specs[i];
}

std::optional<TagInfo> tag_info(const SchemaRegistry& reg, int tag_id) {
  if (tag_id <= 0 || tag_id >= reg.num_tags()) return std::nullopt;
  for (size_t s = 0; s < reg.specs.size(); ++s) {
    const auto& roles = reg.specs[s].roles;
    for (size_t r = 0; r < roles.size(); ++r) {
      if (roles[r].b_tag == tag_id)
        return TagInfo{static_cast<int>(s), static_cast<int>(r), true};
      if (roles[r].i_tag == tag_id)
        return TagInfo{static_cast<int>(s), static_cast<int>(r), false};
    }
  }
  return std::nullopt;
}

bool EventRecord::has_arg(std::string_view role_name) const {
  return arg(role_name) != nullptr;
}

const std::string* EventRecord::arg(std::string_view role_name) const {
  auto it = args.find(std::string(role_name));
  if (it == args.end() || !it->second || it->second->empty()) return nullptr;
  return &*it->second;
}

SchemaRegistry make_registry(std::vector<EventTypeSpec> specs) {
  if (specs.empty()) throw SchemaError("registry has no event types");
  std::set<std::string> codes;
  SchemaRegistry reg;
  reg.tag_vocabulary.push_back("O");
  for (auto& spec : specs) {
    if (spec.code.empty()) throw SchemaError("event type with empty code");
    if (!codes.insert(spec.code).second)
      throw SchemaError("duplicate event type code: " + spec.code);
    if (spec.roles.empty())
      throw SchemaError(spec.code + ": event type has no roles");
    if (spec.min_matched_roles < 1 ||
        spec.min_matched_roles > static_cast<int>(spec.roles.size()))
      throw SchemaError(spec.code + ": min_matched_roles out of range");
    std::set<std::string> names;
    bool any_key = false;
    for (auto& role : spec.roles) {
      if (role.name.empty()) throw SchemaError(spec.code + ": empty role name");
      if (!names.insert(role.name).second)
        throw SchemaError(spec.code + ": duplicate role " + role.name);
      any_key = any_key || role.is_key;
      role.b_tag = static_cast<int>(reg.tag_vocabulary.size());
      role.i_tag = role.b_tag + 1;
      reg.tag_vocabulary.push_back("B-" + spec.code + "." + role.name);
      reg.tag_vocabulary.push_back("I-" + spec.code + "." + role.name);
    }
    if (!any_key) throw SchemaError(spec.code + ": no key role");
    if (spec.generation_order.empty()) {
      spec.generation_order.resize(spec.roles.size());
      std::iota(spec.generation_order.begin(), spec.generation_order.end(), 0);
    } else {
      std::vector<int> sorted = spec.generation_order;
      std::sort(sorted.begin(), sorted.end());
      std::vector<int> identity(spec.roles.size());
      std::iota(identity.begin(), identity.end(), 0);
      if (sorted != identity)
        throw SchemaError(spec.code + ": generation_order is not a permutation");
    }
  }
  reg.specs = std::move(specs);
  return reg;
}

namespace {

EventTypeSpec spec_of(std::string code, std::string name, int min_matched,
                      std::vector<std::pair<std::string, bool>> roles) {
  EventTypeSpec spec;
  spec.code = std::move(code);
  spec.name = std::move(name);
  spec.min_matched_roles = min_matched;
  for (auto& [role_name, key] : roles)
    spec.roles.push_back({role_name, key, -1, -1});
  return spec;
}

}  // namespace

SchemaRegistry builtin_registry() {
  std::vector<EventTypeSpec> specs;
  specs.push_back(spec_of("EF", "Equity Freeze", 5,
                          {{"Equity Holder", true},
                           {"Froze Shares", true},
                           {"Legal Institution", true},
                           {"Start Date", false},
                           {"End Date", false},
                           {"Unfroze Date", false},
                           {"Total Holding Shares", false},
                           {"Total Holding Ratio", false}}));
  specs.push_back(spec_of("ER", "Equity Repurchase", 4,
                          {{"Company Name", true},
                           {"Highest Trading Price", false},
                           {"Lowest Trading Price", false},
                           {"Closing Date", false},
                           {"Repurchased Shares", false},
                           {"Repurchase Amount", false}}));
  specs.push_back(spec_of("EU", "Equity Underweight", 4,
                          {{"Equity Holder", true},
                           {"Traded Shares", true},
                           {"Start Date", false},
                           {"End Date", false},
                           {"Average Price", false},
                           {"Later Holding Shares", false}}));
  specs.push_back(spec_of("EO", "Equity Overweight", 4,
                          {{"Equity Holder", true},
                           {"Traded Shares", true},
                           {"Start Date", false},
                           {"End Date", false},
                           {"Average Price", false},
                           {"Later Holding Shares", false}}));
  specs.push_back(spec_of("EP", "Equity Pledge", 5,
                          {{"Pledger", true},
                           {"Pledged Shares", true},
                           {"Pledgee", true},
                           {"Start Date", false},
                           {"End Date", false},
                           {"Released Date", false},
                           {"Total Pledged Shares", false},
                           {"Total Holding Shares", false},
                           {"Total Holding Ratio", false}}));
  return make_registry(std::move(specs));
}

SchemaRegistry synthetic_registry() {
  std::vector<EventTypeSpec> specs;
  specs.push_back(spec_of("SA", "Share Acquisition", 4,
                          {{"Buyer", true},
                           {"Acquired Shares", true},
                           {"Seller", false},
                           {"Deal Date", false},
                           {"Deal Price", false}}));
  specs.push_back(spec_of("SD", "Share Disposal", 4,
                          {{"Seller", true},
                           {"Sold Shares", true},
                           {"Buyer", false},
                           {"Start Date", false},
                           {"End Date", false},
                           {"Average Price", false}}));
  return make_registry(std::move(specs));
}

bool validate_record(const EventRecord& record, const EventTypeSpec& spec) {
  if (record.event_type != spec.code)
    throw SchemaError("record type " + record.event_type +
                      " validated against spec " + spec.code);
  for (const auto& [role_name, value] : record.args) {
    if (spec.role_index(role_name) < 0)
      throw SchemaError(spec.code + ": record has unknown role " + role_name);
  }
  int filled = 0;
  for (const auto& role : spec.roles) {
    if (record.has_arg(role.name))
      ++filled;
    else if (role.is_key)
      return false;
  }
  return filled >= spec.min_matched_roles;
}

bool compute_generation_order(EventTypeSpec& spec,
                              const std::vector<EventRecord>& records) {
  int total = 0;
  std::vector<int> filled(spec.roles.size(), 0);
  for (const auto& record : records) {
    if (record.event_type != spec.code) continue;
    ++total;
    for (size_t r = 0; r < spec.roles.size(); ++r)
      if (record.has_arg(spec.roles[r].name)) ++filled[r];
  }
  if (total == 0) return false;
  std::vector<int> order(spec.roles.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return filled[a] > filled[b]; });
  spec.generation_order = std::move(order);
  return true;
}

std::string serialize_registry(const SchemaRegistry& reg) {
  std::ostringstream out;
  for (const auto& spec : reg.specs) {
    out << "[event " << spec.code << "]\n";
    out << "name = " << spec.name << "\n";
    out << "min_matched_roles = " << spec.min_matched_roles << "\n";
    for (const auto& role : spec.roles) {
      out << "role = " << role.name;
      if (role.is_key) out << " | key";
      out << "\n";
    }
    out << "generation_order =";
    for (size_t i = 0; i < spec.generation_order.size(); ++i)
      out << (i ? "," : " ") << spec.generation_order[i];
    out << "\n\n";
  }
  return out.str();
}

namespace {

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

SchemaRegistry parse_registry(const std::string& text) {
  std::vector<EventTypeSpec> specs;
  EventTypeSpec current;
  bool in_spec = false;
  auto flush = [&] {
    if (in_spec) specs.push_back(std::move(current));
    current = EventTypeSpec{};
  };
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto fail = [&](const std::string& what) {
      throw SchemaError("schema line " + std::to_string(line_no) + ": " + what);
    };
    if (line.front() == '[') {
      if (line.back() != ']' || line.rfind("[event ", 0) != 0)
        fail("expected [event CODE]");
      flush();
      in_spec = true;
      current.code = trim(line.substr(7, line.size() - 8));
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (!in_spec) fail("key outside an [event] section");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "name") {
      current.name = value;
    } else if (key == "min_matched_roles") {
      try {
        current.min_matched_roles = std::stoi(value);
      } catch (const std::exception&) {
        fail("min_matched_roles is not an integer");
      }
    } else if (key == "role") {
      bool is_key = false;
      size_t bar = value.find('|');
      if (bar != std::string::npos) {
        std::string marker = trim(value.substr(bar + 1));
        if (marker != "key") fail("unknown role marker: " + marker);
        is_key = true;
        value = trim(value.substr(0, bar));
      }
      current.roles.push_back({value, is_key, -1, -1});
    } else if (key == "generation_order") {
      current.generation_order.clear();
      std::istringstream items(value);
      std::string item;
      while (std::getline(items, item, ',')) {
        try {
          current.generation_order.push_back(std::stoi(trim(item)));
        } catch (const std::exception&) {
          fail("generation_order entry is not an integer");
        }
      }
    } else {
      fail("unknown key: " + key);
    }
  }
  flush();
  return make_registry(std::move(specs));
}

SchemaRegistry load_registry(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open schema file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_registry(buf.str());
}

std::string registry_digest(const SchemaRegistry& reg) {
  return crc32_hex(crc32_str(serialize_registry(reg)));
}

}  // namespace edag
