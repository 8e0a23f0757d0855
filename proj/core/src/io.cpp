#include "hessmatch/io.hpp"

#include <sstream>

#include "hessmatch/errors.hpp"
#include "hessmatch/text_io.hpp"

namespace hm {

void write_frame_store(const std::string& path, const FrameStore& store) {
  if (store.space != "AA" && store.space != "CG")
    throw ValidationError("write_frame_store: space must be AA or CG");
  std::ostringstream out;
  out << "FRAMES v1 n=" << store.n << " dim=" << store.dim << " space=" << store.space << "\n";
  for (std::size_t t = 0; t < store.positions.size(); ++t) {
    out << "frame=" << store.frame_indices[t] << "\n";
    out << join_g17(store.positions[t]) << "\n";
    if (store.space == "AA") out << join_g17(store.forces[t]) << "\n";
  }
  atomic_write(path, out.str());
}

FrameStore read_frame_store(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty frame store");
  const std::vector<std::string> toks = split_ws(line);
  if (toks.size() != 5 || toks[0] != "FRAMES" || toks[1] != "v1")
    throw ParseError(path + ": bad frame store header");
  FrameStore store;
  store.n = std::stoi(toks[2].substr(2));
  store.dim = std::stoi(toks[3].substr(4));
  store.space = toks[4].substr(6);
  if (store.space != "AA" && store.space != "CG")
    throw ParseError(path + ": space must be AA or CG");
  const std::size_t width = static_cast<std::size_t>(store.n) * store.dim;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("frame=", 0) != 0) throw ParseError(path + ": expected frame= line");
    store.frame_indices.push_back(std::stoi(line.substr(6)));
    if (!std::getline(in, line)) throw ParseError(path + ": truncated positions");
    Vec r = parse_reals(line);
    if (r.size() != width) throw ParseError(path + ": position length mismatch");
    store.positions.push_back(std::move(r));
    if (store.space == "AA") {
      if (!std::getline(in, line)) throw ParseError(path + ": truncated forces");
      Vec f = parse_reals(line);
      if (f.size() != width) throw ParseError(path + ": force length mismatch");
      store.forces.push_back(std::move(f));
    }
  }
  return store;
}

bool Config::has(const std::string& key) const { return values.count(key) != 0; }

std::string Config::get_string(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end())
    throw ValidationError(path + ": missing required key '" + key + "'");
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double Config::get_real(const std::string& key) const {
  try {
    return std::stod(get_string(key));
  } catch (const std::invalid_argument&) {
    throw ParseError(path + ": key '" + key + "' is not a real number");
  }
}

double Config::get_real(const std::string& key, double fallback) const {
  return has(key) ? get_real(key) : fallback;
}

int Config::get_int(const std::string& key) const {
  try {
    return std::stoi(get_string(key));
  } catch (const std::invalid_argument&) {
    throw ParseError(path + ": key '" + key + "' is not an integer");
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

long Config::get_long(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stol(get_string(key));
  } catch (const std::invalid_argument&) {
    throw ParseError(path + ": key '" + key + "' is not an integer");
  }
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stoull(get_string(key));
  } catch (const std::invalid_argument&) {
    throw ParseError(path + ": key '" + key + "' is not an unsigned integer");
  }
}

Vec Config::get_reals(const std::string& key) const { return parse_reals(get_string(key)); }

Config parse_config(const std::string& path) {
  Config cfg;
  cfg.path = path;
  std::istringstream in(read_file(path));
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError(path + ":" + std::to_string(lineno) + ": unterminated section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    const std::size_t vb = value.find_first_not_of(" \t");
    value = vb == std::string::npos ? "" : value.substr(vb);
    if (key.empty())
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty key");
    cfg.values[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

void Manifest::set(const std::string& key, const std::string& value) {
  for (auto& kv : entries)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  entries.emplace_back(key, value);
}

bool Manifest::has(const std::string& key) const {
  for (const auto& kv : entries)
    if (kv.first == key) return true;
  return false;
}

std::string Manifest::get(const std::string& key) const {
  for (const auto& kv : entries)
    if (kv.first == key) return kv.second;
  throw ValidationError("manifest: missing required key '" + key + "'");
}

void Manifest::add_file(const std::string& name, const std::string& path) {
  set("path." + name, path);
  set("hash." + name, std::to_string(fnv1a_file(path)));
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ostringstream out;
  for (const auto& kv : manifest.entries) out << kv.first << "=" << kv.second << "\n";
  atomic_write(path, out.str());
}

Manifest read_manifest(const std::string& path) {
  Manifest m;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
    m.entries.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return m;
}

void check_manifest_hashes(const Manifest& manifest) {
  for (const auto& kv : manifest.entries) {
    if (kv.first.rfind("hash.", 0) != 0) continue;
    const std::string name = kv.first.substr(5);
    const std::string file = manifest.get("path." + name);
    const std::uint64_t actual = fnv1a_file(file);
    if (std::to_string(actual) != kv.second)
      throw HashMismatch("manifest: content hash mismatch for '" + file + "'");
  }
}

}  // namespace hm
