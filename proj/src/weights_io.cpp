#include "litefs/weights_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "litefs/errors.hpp"

namespace litefs {

static_assert(std::endian::native == std::endian::little, "weights archives assume a little-endian host");

namespace {

constexpr char magic[4] = {'F', 'S', 'W', 'T'};

std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

template <typename U>
void put(std::string& buf, U v) {
  char raw[sizeof(U)];
  std::memcpy(raw, &v, sizeof(U));
  buf.append(raw, sizeof(U));
}

class Reader {
 public:
  Reader(const std::string& data, std::string origin) : data_(data), origin_(std::move(origin)) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, data_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > data_.size()) throw LoadError(origin_ + ": truncated while reading " + what);
  }
  const std::string& data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_weight_records(const std::filesystem::path& path, const std::vector<WeightRecord>& records) {
  std::set<std::string> names;
  std::string header(magic, 4);
  put<std::uint32_t>(header, weights_format_version);
  put<std::uint32_t>(header, static_cast<std::uint32_t>(records.size()));
  std::string data;
  for (const auto& r : records) {
    if (!names.insert(r.name).second) throw Error("duplicate tensor name '" + r.name + "' when saving");
    if (r.name.size() > 0xFFFF || r.shape.size() > 0xFF) throw Error("tensor '" + r.name + "' cannot be encoded");
    if (static_cast<std::int64_t>(r.values.size()) != shape_numel(r.shape)) {
      throw Error("tensor '" + r.name + "' value count does not match its shape");
    }
    put<std::uint16_t>(header, static_cast<std::uint16_t>(r.name.size()));
    header += r.name;
    put<std::uint8_t>(header, r.dtype == DType::f32 ? 0 : 1);
    put<std::uint8_t>(header, static_cast<std::uint8_t>(r.shape.size()));
    for (auto d : r.shape) put<std::uint64_t>(header, static_cast<std::uint64_t>(d));
    put<std::uint64_t>(header, data.size());
    for (double v : r.values) {
      if (r.dtype == DType::f32) {
        put<float>(data, static_cast<float>(v));
      } else {
        put<double>(data, v);
      }
    }
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
void save_weights(const std::filesystem::path& path, const std::vector<NamedTensor<T>>& tensors) {
  std::vector<WeightRecord> records;
  records.reserve(tensors.size());
  for (const auto& t : tensors) {
    records.push_back(WeightRecord{t.name, dtype_of<T>(), t.tensor.shape(),
                                   std::vector<double>(t.tensor.values().begin(), t.tensor.values().end())});
  }
  save_weight_records(path, records);
}

std::vector<WeightRecord> read_weights(const std::filesystem::path& path) {
  const std::string origin = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open weights file " + origin);
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader rd(data, origin);
  if (rd.bytes(4, "magic") != std::string(magic, 4)) throw LoadError(origin + ": bad magic, not a weights archive");
  const auto version = rd.get<std::uint32_t>("version");
  if (version != weights_format_version) {
    throw LoadError(origin + ": unsupported version " + std::to_string(version));
  }
  const auto count = rd.get<std::uint32_t>("tensor count");
  struct Entry {
    WeightRecord rec;
    std::uint64_t offset, bytes;
  };
  std::vector<Entry> entries;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const auto len = rd.get<std::uint16_t>("name length");
    e.rec.name = rd.bytes(len, "tensor name");
    if (!names.insert(e.rec.name).second) throw LoadError(origin + ": duplicate tensor '" + e.rec.name + "'");
    const auto dt = rd.get<std::uint8_t>("dtype");
    if (dt > 1) throw LoadError(origin + ": tensor '" + e.rec.name + "' has unknown dtype " + std::to_string(dt));
    e.rec.dtype = dt == 0 ? DType::f32 : DType::f64;
    const auto ndim = rd.get<std::uint8_t>("rank");
    std::uint64_t numel = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const auto extent = rd.get<std::uint64_t>("dims");
      if (extent > (std::uint64_t{1} << 40)) throw LoadError(origin + ": tensor '" + e.rec.name + "' is implausibly large");
      e.rec.shape.push_back(static_cast<std::int64_t>(extent));
      numel *= extent;
      if (numel > (std::uint64_t{1} << 40)) throw LoadError(origin + ": tensor '" + e.rec.name + "' is implausibly large");
    }
    e.offset = rd.get<std::uint64_t>("offset");
    e.bytes = numel * dtype_size(e.rec.dtype);
    entries.push_back(std::move(e));
  }
  const std::size_t base = rd.pos();
  const std::uint64_t available = data.size() - base;
  std::vector<std::pair<std::uint64_t, std::size_t>> spans;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.offset > available || e.bytes > available - e.offset) {
      throw LoadError(origin + ": data for tensor '" + e.rec.name + "' is truncated");
    }
    spans.push_back({e.offset, i});
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t k = 1; k < spans.size(); ++k) {
    const auto& prev = entries[spans[k - 1].second];
    if (prev.offset + prev.bytes > spans[k].first) {
      throw LoadError(origin + ": data for tensor '" + entries[spans[k].second].rec.name + "' overlaps '" +
                      prev.rec.name + "'");
    }
  }
  std::vector<WeightRecord> out;
  for (auto& e : entries) {
    const char* p = data.data() + base + e.offset;
    const std::size_t n = e.bytes / dtype_size(e.rec.dtype);
    e.rec.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (e.rec.dtype == DType::f32) {
        float v;
        std::memcpy(&v, p + 4 * i, 4);
        e.rec.values[i] = v;
      } else {
        std::memcpy(&e.rec.values[i], p + 8 * i, 8);
      }
    }
    out.push_back(std::move(e.rec));
  }
  return out;
}

template <typename T>
void assign_records(const std::vector<WeightRecord>& records, const std::vector<NamedTensor<T>>& targets, bool strict,
                    const std::string& origin) {
  std::map<std::string, const WeightRecord*> by_name;
  for (const auto& r : records) by_name[r.name] = &r;
  // validate everything before touching any target
  for (const auto& t : targets) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw LoadError(origin + ": missing tensor '" + t.name + "'");
    if (it->second->shape != t.tensor.shape()) {
      throw LoadError(origin + ": tensor '" + t.name + "' has shape " + shape_string(it->second->shape) +
                      ", expected " + shape_string(t.tensor.shape()));
    }
  }
  if (strict && records.size() != targets.size()) {
    std::set<std::string> wanted;
    for (const auto& t : targets) wanted.insert(t.name);
    for (const auto& r : records) {
      if (!wanted.count(r.name)) throw LoadError(origin + ": unexpected tensor '" + r.name + "'");
    }
  }
  for (const auto& t : targets) {
    const auto& src = by_name.at(t.name)->values;
    Tensor<T> dst = t.tensor;
    auto v = dst.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(src[i]);
  }
}

template <typename T>
void load_weights_into(const std::filesystem::path& path, const std::vector<NamedTensor<T>>& targets, bool strict) {
  assign_records(read_weights(path), targets, strict, path.string());
}

template void save_weights<float>(const std::filesystem::path&, const std::vector<NamedTensor<float>>&);
template void save_weights<double>(const std::filesystem::path&, const std::vector<NamedTensor<double>>&);
template void load_weights_into<float>(const std::filesystem::path&, const std::vector<NamedTensor<float>>&, bool);
template void load_weights_into<double>(const std::filesystem::path&, const std::vector<NamedTensor<double>>&, bool);
template void assign_records<float>(const std::vector<WeightRecord>&, const std::vector<NamedTensor<float>>&, bool,
                                    const std::string&);
template void assign_records<double>(const std::vector<WeightRecord>&, const std::vector<NamedTensor<double>>&, bool,
                                     const std::string&);

}  // namespace litefs
