#include "refl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace refl {

namespace {

constexpr char kMagic[8] = {'R', 'F', 'L', 'A', 'L', 'C', 'P', '1'};

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct Writer {
  std::string buf;

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back((char)((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back((char)((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u64(s.size());
    buf.append(s);
  }
  void matrix(const DenseMatrix& m) {
    u64(m.rows);
    u64(m.cols);
    for (double v : m.values) f64(v);
  }
  void pairs(const std::vector<AlignedPair>& ps) {
    u64(ps.size());
    for (const auto& p : ps) {
      u32(p.left);
      u32(p.right);
    }
  }
  void upairs(const std::vector<UnifiedPair>& ps) {
    u64(ps.size());
    for (const auto& p : ps) {
      u32(p.left);
      u32(p.right);
    }
  }
  void ids(const std::vector<std::uint32_t>& v) {
    u64(v.size());
    for (std::uint32_t x : v) u32(x);
  }
};

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= (std::uint32_t)(unsigned char)buf[pos + i] << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= (std::uint64_t)(unsigned char)buf[pos + i] << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  DenseMatrix matrix() {
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    need(rows * cols * 8);
    DenseMatrix m(rows, cols);
    for (double& v : m.values) v = f64();
    return m;
  }
  std::vector<AlignedPair> pairs() {
    const std::uint64_t n = u64();
    need(n * 8);
    std::vector<AlignedPair> ps(n);
    for (auto& p : ps) {
      p.left = u32();
      p.right = u32();
    }
    return ps;
  }
  std::vector<UnifiedPair> upairs() {
    const std::uint64_t n = u64();
    need(n * 8);
    std::vector<UnifiedPair> ps(n);
    for (auto& p : ps) {
      p.left = u32();
      p.right = u32();
    }
    return ps;
  }
  std::vector<std::uint32_t> ids() {
    const std::uint64_t n = u64();
    need(n * 4);
    std::vector<std::uint32_t> v(n);
    for (auto& x : v) x = u32();
    return v;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  Writer w;
  w.buf.append(kMagic, sizeof(kMagic));
  w.u32(ck.version);
  w.str(ck.config.to_text());
  w.u64(ck.epoch);
  w.u64(ck.config.model.rng_seed);  // rng state: all draws are keyed off this
  w.u64(ck.split.rng_seed);
  w.pairs(ck.split.train);
  w.pairs(ck.split.test);
  w.upairs(ck.pseudo_pairs);

  w.u32((std::uint32_t)ck.params.entries().size());
  for (const auto& p : ck.params.entries()) {
    w.str(p.name);
    w.matrix(p.value);
    w.matrix(p.opt.acc);
    w.f64(p.opt.decay);
    w.f64(p.opt.epsilon);
  }

  w.u64(ck.negatives.neg_k);
  w.u64(ck.negatives.refresh_epoch);
  w.ids(ck.negatives.corrupt_right);
  w.ids(ck.negatives.corrupt_left);

  w.u64(fnv1a64(w.buf));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open()) throw std::runtime_error("save_checkpoint: cannot write " + path.string());
  out.write(w.buf.data(), (std::streamsize)w.buf.size());
  if (!out.good()) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw std::runtime_error("load_checkpoint: missing file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + 4 + 8)
    throw std::runtime_error("load_checkpoint: truncated file");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_checkpoint: not a checkpoint file");

  const std::string payload = bytes.substr(0, bytes.size() - 8);
  Reader tail{bytes, bytes.size() - 8};
  if (tail.u64() != fnv1a64(payload))
    throw std::runtime_error("load_checkpoint: truncated or corrupt file (checksum mismatch)");

  Reader r{payload, sizeof(kMagic)};
  Checkpoint ck;
  ck.version = r.u32();
  if (ck.version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: version mismatch (got " +
                             std::to_string(ck.version) + ", expected " +
                             std::to_string(kCheckpointVersion) + ")");
  ck.config = RunConfig::from_text(r.str());
  ck.epoch = r.u64();
  const std::uint64_t seed = r.u64();
  if (seed != ck.config.model.rng_seed)
    throw std::runtime_error("load_checkpoint: rng state disagrees with config snapshot");
  ck.split.rng_seed = r.u64();
  ck.split.train = r.pairs();
  ck.split.test = r.pairs();
  ck.pseudo_pairs = r.upairs();

  const std::uint32_t tables = r.u32();
  for (std::uint32_t t = 0; t < tables; ++t) {
    const std::string name = r.str();
    DenseMatrix value = r.matrix();
    DenseMatrix acc = r.matrix();
    if (!value.same_shape(acc))
      throw std::runtime_error("load_checkpoint: optimizer state shape mismatch for '" + name +
                               "'");
    Parameter& p = ck.params.add(name, std::move(value));
    p.opt.acc = std::move(acc);
    p.opt.decay = r.f64();
    p.opt.epsilon = r.f64();
  }
  if (!ck.params.contains(kEntityTable) || !ck.params.contains(kRelationTable))
    throw std::runtime_error("load_checkpoint: missing parameter tables");
  const auto& ent = ck.params.get(kEntityTable).value;
  if (ent.cols != ck.config.model.dim)
    throw std::runtime_error("load_checkpoint: entity table shape mismatch vs config");
  for (std::size_t l = 0; l < ck.config.model.layers; ++l) {
    if (!ck.params.contains(attention_name(l)))
      throw std::runtime_error("load_checkpoint: missing parameter tables");
    if (ck.params.get(attention_name(l)).value.cols != 3 * ck.config.model.dim)
      throw std::runtime_error("load_checkpoint: attention vector shape mismatch vs config");
  }

  ck.negatives.neg_k = r.u64();
  ck.negatives.refresh_epoch = r.u64();
  ck.negatives.corrupt_right = r.ids();
  ck.negatives.corrupt_left = r.ids();
  return ck;
}

}  // namespace refl
