#include "pgsum/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pgsum/errors.hpp"

namespace pgsum {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'G', 'S', 'U', 'M', 'C', 'K', '\0'};
constexpr char kTrailer[8] = {'P', 'G', 'S', 'U', 'M', 'E', 'N', 'D'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void put_raw(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : in_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void get_raw(void* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw DataError(std::string("checkpoint truncated while reading ") + what);
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const TrainState& state) {
  Writer w;
  w.put_raw(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  const ModelConfig& c = state.params.config;
  for (std::size_t v : {c.hidden_size, c.embedding_size, c.vocab_size, c.max_decode_len, c.max_input_len}) {
    w.put<std::uint64_t>(v);
  }
  w.put<std::uint64_t>(state.step);
  w.put<double>(state.best_valid_loss);
  w.put<std::uint64_t>(state.steps_since_best);
  std::uint32_t count = 0;
  state.params.for_each([&](std::string_view, const Tensor&) { ++count; });
  w.put<std::uint32_t>(count);
  state.params.for_each([&](std::string_view name, const Tensor& t) {
    w.put_string(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.put<std::uint64_t>(d);
    w.put_raw(t.data().data(), t.size() * sizeof(double));
  });
  w.put<std::uint64_t>(fnv1a(w.bytes()));
  w.put_raw(kTrailer, sizeof(kTrailer));
  return std::move(w.bytes());
}

TrainState decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[8];
  r.get_raw(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw DataError("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  TrainState state;
  ModelConfig& c = state.params.config;
  for (std::size_t* field : {&c.hidden_size, &c.embedding_size, &c.vocab_size, &c.max_decode_len, &c.max_input_len}) {
    *field = static_cast<std::size_t>(r.get<std::uint64_t>("config"));
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint has an invalid config: ") + e.what());
  }
  state.step = r.get<std::uint64_t>("step");
  state.best_valid_loss = r.get<double>("best_valid_loss");
  state.steps_since_best = r.get<std::uint64_t>("steps_since_best");

  const auto layout = parameter_layout(c);
  const auto count = r.get<std::uint32_t>("parameter count");
  if (count != layout.size()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                    std::to_string(layout.size()));
  }
  std::size_t i = 0;
  state.params.for_each([&](std::string_view expected_name, Tensor& t) {
    const std::string name = r.get_string("parameter name");
    if (name != expected_name) {
      throw DataError("checkpoint tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                      std::string(expected_name) + "'");
    }
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank == 0 || rank > 8) throw DataError("checkpoint tensor '" + name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    for (std::size_t& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>("shape"));
    if (shape != layout[i].second) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + shape_to_string(shape) + ", expected " +
                      shape_to_string(layout[i].second));
    }
    t = Tensor(shape);
    r.get_raw(t.data().data(), t.size() * sizeof(double), "tensor data");
    ++i;
  });
  const std::size_t body_end = r.pos();
  const auto checksum = r.get<std::uint64_t>("checksum");
  if (checksum != fnv1a(std::string_view(bytes).substr(0, body_end))) throw DataError("checkpoint checksum mismatch");
  char trailer[8];
  r.get_raw(trailer, sizeof(trailer), "trailer");
  if (std::memcmp(trailer, kTrailer, sizeof(trailer)) != 0) throw DataError("checkpoint trailer missing");
  if (r.pos() != bytes.size()) throw DataError("checkpoint has trailing bytes");
  return state;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(state);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace pgsum
