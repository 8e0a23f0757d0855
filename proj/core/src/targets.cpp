#include "hessmatch/targets.hpp"

#include <sstream>

#include "hessmatch/probes.hpp"
#include "hessmatch/text_io.hpp"

namespace hm {

std::vector<HvpTargetRecord> precompute_term1(const std::vector<AtomisticFrame>& frames,
                                              const ForceField& ff, const CGMap& map,
                                              std::uint64_t global_seed, int k, double epsilon,
                                              double unit_scale) {
  if (!is_linear(map))
    throw UnsupportedMap("precompute_term1: only linear maps are supported");
  const Mat xf = force_projection(map);
  const Mat xf_t = xf.transpose();
  const int d = static_cast<int>(xf.rows());

  std::vector<HvpTargetRecord> records;
  records.reserve(frames.size());
  for (const AtomisticFrame& frame : frames) {
    const ProbeSet probes = generate_probes(global_seed, frame.frame_index, k, d);
    HvpTargetRecord rec;
    rec.frame_index = frame.frame_index;
    rec.seed = probes.seed;
    rec.k = k;
    rec.epsilon = epsilon;
    rec.unit_scale = unit_scale;
    rec.probes = probes.vectors;
    rec.term1.reserve(k);
    for (const Vec& v : probes.vectors) {
      const Vec v_aa = matvec(xf_t, v);
      const Vec hvp_aa = aa_hvp_fd(frame, ff, v_aa, epsilon);
      Vec t1 = matvec(xf, hvp_aa);
      for (double& x : t1) x *= unit_scale;
      rec.term1.push_back(std::move(t1));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

Vec term2_correction(const ForceResidual& residual, const Vec& probe, double beta) {
  if (residual.delta_j.size() != probe.size())
    throw DimensionMismatch("term2_correction: residual/probe length mismatch");
  const double proj = dot(residual.delta_j, probe);
  Vec out(probe.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = beta * proj * residual.delta_j[i];
  return out;
}

Vec assemble_target(const HvpTargetRecord& record, int k, const ForceResidual* residual,
                    double beta, bool use_covariance) {
  if (k < 0 || k >= record.k) throw ValidationError("assemble_target: probe index out of range");
  if (!use_covariance) return record.term1[k];
  if (residual == nullptr)
    throw MissingResidual("assemble_target: covariance enabled but no residual");
  const Vec t2 = term2_correction(*residual, record.probes[k], beta);
  Vec out = record.term1[k];
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= t2[i];
  return out;
}

void write_target_store(const std::string& path, const TargetStoreHeader& header,
                        const std::vector<HvpTargetRecord>& records) {
  std::ostringstream out;
  out << "HVPTARGETS v1 d=" << header.d << " K=" << header.k << " eps=" << g17(header.epsilon)
      << " seed=" << header.seed << " scale=" << g17(header.unit_scale) << "\n";
  for (const HvpTargetRecord& rec : records) {
    out << "frame=" << rec.frame_index << "\n";
    for (const Vec& p : rec.probes) out << join_g17(p) << "\n";
    for (const Vec& t : rec.term1) out << join_g17(t) << "\n";
  }
  atomic_write(path, out.str());
}

std::vector<HvpTargetRecord> read_target_store(const std::string& path,
                                               TargetStoreHeader& header) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty target store");
  const std::vector<std::string> toks = split_ws(line);
  if (toks.size() != 7 || toks[0] != "HVPTARGETS" || toks[1] != "v1")
    throw ParseError(path + ": bad target store header");
  auto field = [&](std::size_t i, const std::string& key) {
    if (toks[i].rfind(key + "=", 0) != 0)
      throw ParseError(path + ": expected " + key + "= in header");
    return toks[i].substr(key.size() + 1);
  };
  header.d = std::stoi(field(2, "d"));
  header.k = std::stoi(field(3, "K"));
  header.epsilon = std::stod(field(4, "eps"));
  header.seed = std::stoull(field(5, "seed"));
  header.unit_scale = std::stod(field(6, "scale"));

  std::vector<HvpTargetRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("frame=", 0) != 0) throw ParseError(path + ": expected frame= line");
    HvpTargetRecord rec;
    rec.frame_index = std::stoi(line.substr(6));
    rec.k = header.k;
    rec.epsilon = header.epsilon;
    rec.unit_scale = header.unit_scale;
    rec.seed = header.seed ^ (static_cast<std::uint64_t>(rec.frame_index) * 0x9E3779B97F4A7C15ULL);
    for (int p = 0; p < header.k; ++p) {
      if (!std::getline(in, line)) throw ParseError(path + ": truncated probe block");
      Vec v = parse_reals(line);
      if (static_cast<int>(v.size()) != header.d)
        throw ParseError(path + ": probe length mismatch");
      rec.probes.push_back(std::move(v));
    }
    for (int p = 0; p < header.k; ++p) {
      if (!std::getline(in, line)) throw ParseError(path + ": truncated term1 block");
      Vec v = parse_reals(line);
      if (static_cast<int>(v.size()) != header.d)
        throw ParseError(path + ": term1 length mismatch");
      rec.term1.push_back(std::move(v));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace hm
