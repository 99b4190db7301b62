#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ergae/schema.hpp"

namespace ergae {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric form of one property value. Dense for scalar-like types, symbols
/// for categorical (one index) and text (index sequence).
struct PackedValue {
  std::vector<double> dense;
  std::vector<std::int32_t> symbols;

  friend bool operator==(const PackedValue&, const PackedValue&) = default;
};

/// Parameter-free mapping between a property's human and numeric forms.
/// Statistics and vocabularies are fixed when the codec is built.
class PropertyCodec {
 public:
  static constexpr std::int32_t kUnknownSymbol = 0;
  static constexpr std::int32_t kStartSymbol = 1;
  static constexpr std::int32_t kEndSymbol = 2;
  static constexpr std::int32_t kFirstCharSymbol = 3;
  static constexpr std::size_t kMaxTextLength = 256;

  PropertyCodec() = default;
  PropertyCodec(std::string property, PropertyType type) : property_(std::move(property)), type_(type) {}

  /// Fits vocabularies / statistics on training values (already type-checked).
  static PropertyCodec fit(const PropertyDef& def, const std::vector<const Json*>& training_values);

  PackedValue pack(const Json& human) const;
  Json unpack(const PackedValue& numeric) const;

  const std::string& property() const { return property_; }
  PropertyType type() const { return type_; }

  // categorical
  std::size_t vocabulary_size() const { return categories_.size(); }
  std::int32_t unknown_category() const { return static_cast<std::int32_t>(categories_.size()); }
  const std::vector<Json>& categories() const { return categories_; }
  std::int32_t category_index(const Json& value) const;

  // text
  std::size_t symbol_count() const { return kFirstCharSymbol + characters_.size(); }
  const std::vector<char32_t>& characters() const { return characters_; }
  std::size_t max_length() const { return max_length_; }

  // scalar / date
  double mean() const { return mean_; }
  double stddev() const { return stddev_; }
  double standardize(double v) const;
  double destandardize(double z) const;

  // distribution
  std::size_t dimension() const { return dimension_; }

  /// Width of the dense numeric form (1 for scalar/date, 2 for place, D for distribution).
  std::size_t dense_width() const;

  Json to_json() const;
  static PropertyCodec from_json(const Json& j);

  friend bool operator==(const PropertyCodec&, const PropertyCodec&) = default;

 private:
  std::string property_;
  PropertyType type_ = PropertyType::kScalar;
  std::vector<Json> categories_;
  std::map<std::string, std::int32_t> category_lookup_;
  std::vector<char32_t> characters_;
  std::map<char32_t, std::int32_t> character_lookup_;
  std::size_t max_length_ = 0;
  double mean_ = 0.0;
  double stddev_ = 0.0;
  std::size_t dimension_ = 0;

  void index_vocabularies();
};

std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

}  // namespace ergae
