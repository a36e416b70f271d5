#ifndef ADCGS_TENSOR_CHECKPOINT_H_
#define ADCGS_TENSOR_CHECKPOINT_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adcgs/io/bytes.h"
#include "adcgs/tensor/tensor.h"

namespace adcgs {

// Named tensor collection with a versioned little-endian binary form:
//   "ADCT" u32 version, u32 count, then per tensor
//   u32 name length, name bytes, u8 dtype, u32 rank, u32 dims[rank], values.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  struct Entry {
    DType dtype = DType::kF32;
    Shape shape;
    std::vector<double> values;  // exact for both dtypes
  };

  template <typename T>
  void put(const std::string& name, const Tensor<T>& t) {
    Entry e{dtype_of<T>(), t.shape(), {}};
    e.values.assign(t.values().begin(), t.values().end());
    put_entry(name, std::move(e));
  }
  void put_scalars(const std::string& name, std::vector<double> values,
                   DType dtype = DType::kF64) {
    put_entry(name, Entry{dtype, Shape{values.size()}, std::move(values)});
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  const Entry& entry(const std::string& name) const;
  template <typename T>
  Tensor<T> tensor(const std::string& name) const {
    const Entry& e = entry(name);
    std::vector<T> v(e.values.begin(), e.values.end());
    return Tensor<T>(e.shape, std::move(v));
  }
  double scalar(const std::string& name, std::size_t i = 0) const;

  // Insertion order is preserved so serialization is deterministic.
  const std::vector<std::string>& names() const { return order_; }

  void write(io::ByteWriter& w) const;
  static Checkpoint read(io::ByteReader& r);

 private:
  void put_entry(const std::string& name, Entry e);

  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

}  // namespace adcgs

#endif  // ADCGS_TENSOR_CHECKPOINT_H_
