#include "ergae/codec.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ergae/validate.hpp"

namespace ergae {

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c >> 4) == 0xE) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c >> 3) == 0x1E) {
      len = 4;
      cp = c & 0x07;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      ok = ok && (cc >> 6) == 0x2;
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(ok ? cp : 0xFFFD);
    i += ok ? len : 1;
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  return out;
}

namespace {

void fit_moments(const std::vector<double>& xs, double& mean, double& stddev) {
  mean = 0.0;
  stddev = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  stddev = std::sqrt(var);
  if (!(stddev > 1e-12 * std::max(1.0, std::abs(mean)))) stddev = 0.0;
}

std::string category_key(const Json& v) { return v.dump(); }

}  // namespace

void PropertyCodec::index_vocabularies() {
  category_lookup_.clear();
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    category_lookup_[category_key(categories_[i])] = static_cast<std::int32_t>(i);
  }
  character_lookup_.clear();
  for (std::size_t i = 0; i < characters_.size(); ++i) {
    character_lookup_[characters_[i]] = kFirstCharSymbol + static_cast<std::int32_t>(i);
  }
}

PropertyCodec PropertyCodec::fit(const PropertyDef& def, const std::vector<const Json*>& values) {
  PropertyCodec c(def.name, def.type);
  switch (def.type) {
    case PropertyType::kScalar: {
      std::vector<double> xs;
      for (const Json* v : values) xs.push_back(v->get<double>());
      fit_moments(xs, c.mean_, c.stddev_);
      break;
    }
    case PropertyType::kDate: {
      std::vector<double> xs;
      for (const Json* v : values) xs.push_back(static_cast<double>(*parse_iso_date(v->get<std::string>())));
      fit_moments(xs, c.mean_, c.stddev_);
      break;
    }
    case PropertyType::kCategorical: {
      std::map<std::string, Json> distinct;
      for (const Json* v : values) distinct.emplace(category_key(*v), *v);
      for (auto& [k, v] : distinct) c.categories_.push_back(v);
      break;
    }
    case PropertyType::kText: {
      std::set<char32_t> chars;
      std::vector<std::size_t> lengths;
      for (const Json* v : values) {
        auto s = utf8_decode(v->get_ref<const std::string&>());
        chars.insert(s.begin(), s.end());
        lengths.push_back(s.size());
      }
      c.characters_.assign(chars.begin(), chars.end());
      std::size_t p99 = 1;
      if (!lengths.empty()) {
        std::sort(lengths.begin(), lengths.end());
        auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(lengths.size())));
        p99 = lengths[std::max<std::size_t>(rank, 1) - 1];
      }
      c.max_length_ = std::clamp<std::size_t>(p99, 1, kMaxTextLength);
      break;
    }
    case PropertyType::kDistribution: {
      if (def.meta.contains("dimension")) {
        c.dimension_ = def.meta.at("dimension").get<std::size_t>();
      } else if (!values.empty()) {
        c.dimension_ = values.front()->size();
      }
      for (const Json* v : values) {
        if (v->size() != c.dimension_) {
          throw CodecError(def.name + ": distribution sizes differ (" + std::to_string(v->size()) + " vs " +
                           std::to_string(c.dimension_) + ")");
        }
      }
      break;
    }
    case PropertyType::kPlace:
      c.dimension_ = 2;
      break;
    case PropertyType::kImage:
      break;
  }
  c.index_vocabularies();
  return c;
}

double PropertyCodec::standardize(double v) const { return stddev_ > 0.0 ? (v - mean_) / stddev_ : v; }
double PropertyCodec::destandardize(double z) const { return stddev_ > 0.0 ? z * stddev_ + mean_ : z; }

std::int32_t PropertyCodec::category_index(const Json& value) const {
  auto it = category_lookup_.find(category_key(value));
  return it == category_lookup_.end() ? unknown_category() : it->second;
}

std::size_t PropertyCodec::dense_width() const {
  switch (type_) {
    case PropertyType::kScalar:
    case PropertyType::kDate:
      return 1;
    case PropertyType::kPlace:
      return 2;
    case PropertyType::kDistribution:
      return dimension_;
    default:
      return 0;
  }
}

PackedValue PropertyCodec::pack(const Json& human) const {
  if (auto problem = check_property_value(type_, human)) throw CodecError(property_ + ": " + *problem);
  PackedValue out;
  switch (type_) {
    case PropertyType::kScalar:
      out.dense = {standardize(human.get<double>())};
      break;
    case PropertyType::kDate:
      out.dense = {standardize(static_cast<double>(*parse_iso_date(human.get<std::string>())))};
      break;
    case PropertyType::kCategorical:
      out.symbols = {category_index(human)};
      break;
    case PropertyType::kText: {
      auto s = utf8_decode(human.get_ref<const std::string&>());
      if (s.size() > max_length_) s.resize(max_length_);
      for (char32_t ch : s) {
        auto it = character_lookup_.find(ch);
        out.symbols.push_back(it == character_lookup_.end() ? kUnknownSymbol : it->second);
      }
      break;
    }
    case PropertyType::kDistribution: {
      if (human.size() != dimension_) {
        throw CodecError(property_ + ": expected " + std::to_string(dimension_) + " entries, got " +
                         std::to_string(human.size()));
      }
      bool log_form = std::any_of(human.begin(), human.end(), [](const Json& x) { return x.get<double>() < 0.0; });
      double total = 0.0;
      for (const auto& x : human) {
        double p = log_form ? std::exp(x.get<double>()) : x.get<double>();
        out.dense.push_back(p);
        total += p;
      }
      for (double& p : out.dense) p /= total;
      break;
    }
    case PropertyType::kPlace:
      out.dense = {human.at("latitude").get<double>() / 90.0, human.at("longitude").get<double>() / 180.0};
      break;
    case PropertyType::kImage:
      break;
  }
  return out;
}

Json PropertyCodec::unpack(const PackedValue& v) const {
  switch (type_) {
    case PropertyType::kScalar:
      if (v.dense.size() != 1) throw CodecError(property_ + ": scalar needs one value");
      return destandardize(v.dense[0]);
    case PropertyType::kDate:
      if (v.dense.size() != 1) throw CodecError(property_ + ": date needs one value");
      return format_iso_date(std::llround(destandardize(v.dense[0])));
    case PropertyType::kCategorical: {
      if (v.symbols.size() != 1) throw CodecError(property_ + ": categorical needs one index");
      auto i = v.symbols[0];
      if (i < 0 || i > unknown_category()) throw CodecError(property_ + ": category index out of range");
      return i == unknown_category() ? Json(nullptr) : categories_[static_cast<std::size_t>(i)];
    }
    case PropertyType::kText: {
      std::u32string s;
      for (auto sym : v.symbols) {
        if (sym == kEndSymbol) break;
        if (sym == kStartSymbol) continue;
        auto k = sym - kFirstCharSymbol;
        s.push_back(k >= 0 && static_cast<std::size_t>(k) < characters_.size() ? characters_[static_cast<std::size_t>(k)]
                                                                                  : U'�');
      }
      return utf8_encode(s);
    }
    case PropertyType::kDistribution: {
      if (v.dense.size() != dimension_) throw CodecError(property_ + ": wrong distribution size");
      Json out = Json::array();
      for (double p : v.dense) out.push_back(p);
      return out;
    }
    case PropertyType::kPlace:
      if (v.dense.size() != 2) throw CodecError(property_ + ": place needs two values");
      return Json{{"latitude", v.dense[0] * 90.0}, {"longitude", v.dense[1] * 180.0}};
    case PropertyType::kImage:
      return nullptr;
  }
  return nullptr;
}

Json PropertyCodec::to_json() const {
  Json j{{"property", property_}, {"type", std::string(to_string(type_))}};
  switch (type_) {
    case PropertyType::kScalar:
    case PropertyType::kDate:
      j["mean"] = mean_;
      j["stddev"] = stddev_;
      break;
    case PropertyType::kCategorical:
      j["categories"] = categories_;
      break;
    case PropertyType::kText: {
      Json chars = Json::array();
      for (char32_t ch : characters_) chars.push_back(static_cast<std::uint32_t>(ch));
      j["characters"] = std::move(chars);
      j["max_length"] = max_length_;
      break;
    }
    case PropertyType::kDistribution:
    case PropertyType::kPlace:
      j["dimension"] = dimension_;
      break;
    case PropertyType::kImage:
      break;
  }
  return j;
}

PropertyCodec PropertyCodec::from_json(const Json& j) {
  auto type = property_type_from_string(j.at("type").get<std::string>());
  if (!type) throw CodecError("codec has unknown type");
  PropertyCodec c(j.at("property").get<std::string>(), *type);
  c.mean_ = j.value("mean", 0.0);
  c.stddev_ = j.value("stddev", 0.0);
  if (j.contains("categories")) c.categories_ = j.at("categories").get<std::vector<Json>>();
  if (j.contains("characters")) {
    for (const auto& ch : j.at("characters")) c.characters_.push_back(static_cast<char32_t>(ch.get<std::uint32_t>()));
  }
  c.max_length_ = j.value("max_length", std::size_t{0});
  c.dimension_ = j.value("dimension", std::size_t{0});
  c.index_vocabularies();
  return c;
}

}  // namespace ergae
