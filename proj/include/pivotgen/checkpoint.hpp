#pragma once

// Binary checkpoints. Layout (little-endian):
//   "PGCK" | u32 version | u32 kind (0 tagger, 1 realizer)
//   u64 header length | JSON header (config and vocabularies)
//   u32 parameter count | per parameter: u32 name length, name, u64 rows,
//   u64 cols, rows*cols doubles in row-major order
// The same model state always produces the same bytes.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pivotgen/realizer.hpp"
#include "pivotgen/tagger.hpp"

namespace pivotgen {

namespace detail {

constexpr char kMagic[4] = {'P', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("truncated checkpoint '" + path + "'");
  return v;
}

inline void write_checkpoint(const std::string& path, std::uint32_t kind, const nlohmann::ordered_json& header,
                             const std::vector<ag::Parameter*>& params) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, kind);
  const std::string h = header.dump();
  put<std::uint64_t>(os, h.size());
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p->value.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p->value.cols()));
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value.size())));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  const std::string bytes = os.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

struct RawCheckpoint {
  std::uint32_t kind = 0;
  nlohmann::json header;
  std::vector<std::pair<std::string, ag::Matrix>> params;
};

inline RawCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("missing checkpoint '" + path + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw Error("'" + path + "' is not a checkpoint");
  if (get<std::uint32_t>(is, path) != kVersion) throw Error("unsupported checkpoint version in '" + path + "'");
  RawCheckpoint ck;
  ck.kind = get<std::uint32_t>(is, path);
  const auto hlen = get<std::uint64_t>(is, path);
  std::string h(hlen, '\0');
  if (!is.read(h.data(), static_cast<std::streamsize>(hlen))) throw Error("truncated checkpoint '" + path + "'");
  ck.header = nlohmann::json::parse(h);
  const auto n = get<std::uint32_t>(is, path);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = get<std::uint32_t>(is, path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw Error("truncated checkpoint '" + path + "'");
    const auto rows = static_cast<Eigen::Index>(get<std::uint64_t>(is, path));
    const auto cols = static_cast<Eigen::Index>(get<std::uint64_t>(is, path));
    ag::Matrix m(rows, cols);
    if (!is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols)))
      throw Error("truncated checkpoint '" + path + "'");
    ck.params.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

inline void load_values(const std::string& path, const RawCheckpoint& ck, const std::vector<ag::Parameter*>& params) {
  if (ck.params.size() != params.size()) throw Error("checkpoint '" + path + "' does not match the model layout");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, value] = ck.params[i];
    if (name != params[i]->name || value.rows() != params[i]->value.rows() ||
        value.cols() != params[i]->value.cols())
      throw Error("checkpoint '" + path + "': parameter '" + name + "' does not match the model");
    params[i]->value = value;
    params[i]->zero_grad();
  }
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const TaggerConfig& c) {
  return {{"hidden_dim", c.hidden_dim},         {"word_emb_dim", c.word_emb_dim},
          {"attr_emb_dim", c.attr_emb_dim},     {"pos_emb_dim", c.pos_emb_dim},
          {"max_position", c.max_position},     {"word_vocab_cap", c.word_vocab_cap},
          {"attr_vocab_cap", c.attr_vocab_cap}, {"dropout", c.dropout},
          {"seed", c.seed}};
}

inline TaggerConfig tagger_config_from_json(const nlohmann::json& j) {
  TaggerConfig c;
  c.hidden_dim = j.at("hidden_dim");
  c.word_emb_dim = j.at("word_emb_dim");
  c.attr_emb_dim = j.at("attr_emb_dim");
  c.pos_emb_dim = j.at("pos_emb_dim");
  c.max_position = j.at("max_position");
  c.word_vocab_cap = j.at("word_vocab_cap");
  c.attr_vocab_cap = j.at("attr_vocab_cap");
  c.dropout = j.at("dropout");
  c.seed = j.at("seed");
  return c;
}

inline nlohmann::ordered_json to_json(const RealizerConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"hidden_dim", c.hidden_dim},
          {"emb_dim", c.emb_dim},
          {"model_dim", c.model_dim},
          {"ff_dim", c.ff_dim},
          {"heads", c.heads},
          {"blocks", c.blocks},
          {"dropout", c.dropout},
          {"max_decode_length", c.max_decode_length},
          {"vocab_cap", c.vocab_cap},
          {"seed", c.seed}};
}

inline RealizerConfig realizer_config_from_json(const nlohmann::json& j) {
  RealizerConfig c;
  c.variant = parse_variant(j.at("variant"));
  c.hidden_dim = j.at("hidden_dim");
  c.emb_dim = j.at("emb_dim");
  c.model_dim = j.at("model_dim");
  c.ff_dim = j.at("ff_dim");
  c.heads = j.at("heads");
  c.blocks = j.at("blocks");
  c.dropout = j.at("dropout");
  c.max_decode_length = j.at("max_decode_length");
  c.vocab_cap = j.at("vocab_cap");
  c.seed = j.at("seed");
  return c;
}

inline void save_tagger(const std::string& path, TaggerModel& model) {
  nlohmann::ordered_json h;
  h["config"] = to_json(model.config());
  h["words"] = model.words().tokens();
  h["attributes"] = model.attributes().tokens();
  detail::write_checkpoint(path, 0, h, model.parameters());
}

inline TaggerModel load_tagger(const std::string& path) {
  auto ck = detail::read_checkpoint(path);
  if (ck.kind != 0) throw Error("'" + path + "' is not a tagger checkpoint");
  TaggerModel model(tagger_config_from_json(ck.header.at("config")),
                    Vocabulary::from_tokens(ck.header.at("words").get<Tokens>()),
                    Vocabulary::from_tokens(ck.header.at("attributes").get<Tokens>()));
  detail::load_values(path, ck, model.parameters());
  return model;
}

inline void save_realizer(const std::string& path, Realizer& model) {
  nlohmann::ordered_json h;
  h["config"] = to_json(model.config());
  h["vocab"] = model.vocab().tokens();
  detail::write_checkpoint(path, 1, h, model.parameters());
}

inline std::unique_ptr<Realizer> load_realizer(const std::string& path) {
  auto ck = detail::read_checkpoint(path);
  if (ck.kind != 1) throw Error("'" + path + "' is not a realizer checkpoint");
  auto model = make_realizer(realizer_config_from_json(ck.header.at("config")),
                             Vocabulary::from_tokens(ck.header.at("vocab").get<Tokens>()));
  detail::load_values(path, ck, model->parameters());
  return model;
}

}  // namespace pivotgen
