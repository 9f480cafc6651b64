#include "spnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "spnet/error.hpp"

namespace spnet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'P', 'N', 'C'};
constexpr const char* kMomentSuffix1 = "#adam.m";
constexpr const char* kMomentSuffix2 = "#adam.v";
constexpr const char* kStepName = "#adam.step";

class Writer {
 public:
  template <typename U>
  void put(U v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(U));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void entry(const std::string& name, const Tensor& t) {
    if (name.size() > 0xFFFF) throw IoError("parameter name too long: " + name);
    if (t.rank() > 0xFF) throw IoError("tensor rank too large for " + name);
    put(static_cast<std::uint16_t>(name.size()));
    put_bytes(name.data(), name.size());
    put(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) put(static_cast<std::uint32_t>(d));
    put_bytes(t.ptr(), t.size() * sizeof(float));
  }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}
  template <typename U>
  U get() {
    U v;
    get_bytes(&v, sizeof(U));
    return v;
  }
  void get_bytes(void* dst, std::size_t n) {
    if (n > bytes_.size() - pos_) throw TruncatedFileError("checkpoint ends mid-record");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

bool ends_with(const std::string& s, const char* suffix) {
  const std::size_t n = std::strlen(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

}  // namespace

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path,
                     bool include_optimizer_state) {
  const ParameterStore* stores[] = {&store};
  save_checkpoint(stores, path, include_optimizer_state);
}

void save_checkpoint(std::span<const ParameterStore* const> stores,
                     const std::filesystem::path& path, bool include_optimizer_state) {
  std::uint32_t count = 0;
  std::uint64_t step = 0;
  for (const ParameterStore* s : stores) {
    for (const auto& e : *s) {
      ++count;
      if (include_optimizer_state) {
        count += 2;
        step = std::max(step, e.adam.step);
      }
    }
  }
  if (include_optimizer_state) ++count;

  Writer w;
  w.put_bytes(kMagic, 4);
  w.put(kCheckpointVersion);
  w.put(count);
  for (const ParameterStore* s : stores) {
    for (const auto& e : *s) {
      w.entry(e.name, e.value);
      if (include_optimizer_state) {
        const bool has = !e.adam.first_moment.empty();
        w.entry(e.name + kMomentSuffix1, has ? e.adam.first_moment : Tensor(e.value.shape()));
        w.entry(e.name + kMomentSuffix2, has ? e.adam.second_moment : Tensor(e.value.shape()));
      }
    }
  }
  if (include_optimizer_state) w.entry(kStepName, Tensor({1}, static_cast<float>(step)));
  w.put(static_cast<std::uint64_t>(w.bytes().size()));

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r(bytes);
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CorruptMagicError(path.string() + " is not an SPNC checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint version " + std::to_string(version) + ", expected " +
                               std::to_string(kCheckpointVersion));
  }
  const auto count = r.get<std::uint32_t>();

  ParameterStore store;
  std::uint64_t step = 0;
  bool has_step = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name(name_len, '\0');
    r.get_bytes(name.data(), name_len);
    const auto rank = r.get<std::uint8_t>();
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.get<std::uint32_t>();
      if (d == 0) throw TruncatedFileError("zero dimension in entry " + name);
      numel *= d;
    }
    if (numel > r.remaining() / sizeof(float)) {
      throw TruncatedFileError("checkpoint ends inside tensor " + name);
    }
    std::vector<float> data(numel);
    r.get_bytes(data.data(), numel * sizeof(float));
    Tensor t(std::move(shape), std::move(data));

    if (name == kStepName) {
      step = static_cast<std::uint64_t>(t[0]);
      has_step = true;
    } else if (ends_with(name, kMomentSuffix1) || ends_with(name, kMomentSuffix2)) {
      const bool first = ends_with(name, kMomentSuffix1);
      const std::string base = name.substr(0, name.size() - std::strlen(kMomentSuffix1));
      auto& e = store.entry(store.index_of(base));
      (first ? e.adam.first_moment : e.adam.second_moment) = std::move(t);
    } else {
      store.add(std::move(name), std::move(t));
    }
  }
  const std::size_t payload = r.pos();
  if (r.remaining() < sizeof(std::uint64_t)) throw TruncatedFileError("checkpoint trailer missing");
  const auto recorded = r.get<std::uint64_t>();
  if (recorded != payload || r.remaining() != 0) {
    throw TruncatedFileError("checkpoint length check failed: trailer says " +
                             std::to_string(recorded) + " bytes, found " + std::to_string(payload));
  }
  if (has_step) {
    for (auto& e : store) {
      if (!e.adam.first_moment.empty()) e.adam.step = step;
    }
  }
  return store;
}

}  // namespace spnet
