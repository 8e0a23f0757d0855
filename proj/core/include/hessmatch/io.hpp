#ifndef HESSMATCH_IO_HPP
#define HESSMATCH_IO_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hessmatch/numerics.hpp"

namespace hm {

// On-disk trajectory/frame container. AA stores carry per-frame forces;
// CG stores are positions only.
struct FrameStore {
  int n = 0;    // particles (atoms or beads) per frame
  int dim = 1;  // spatial dimension per particle
  std::string space = "AA";
  std::vector<int> frame_indices;
  std::vector<Vec> positions;
  std::vector<Vec> forces;  // empty for space=CG
};

void write_frame_store(const std::string& path, const FrameStore& store);
FrameStore read_frame_store(const std::string& path);

// Flat key=value config with [section] headers; lookups use "section.key".
struct Config {
  std::string path;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;  // throws naming the key
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_real(const std::string& key) const;
  double get_real(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  long get_long(const std::string& key, long fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  Vec get_reals(const std::string& key) const;
};

Config parse_config(const std::string& path);

// Key-value run manifest; `hash.<name>` entries pin the FNV-1a 64 content
// hash of the file at `path.<name>`.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;
  void add_file(const std::string& name, const std::string& path);
};

void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

// Recomputes every hash.<name> entry; throws HashMismatch on drift.
void check_manifest_hashes(const Manifest& manifest);

}  // namespace hm

#endif
