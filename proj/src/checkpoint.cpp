// SPDX-License-Identifier: Apache-2.0
#include "uvcom/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace uvcom {

namespace {

constexpr char kMagic[4] = {'U', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

void put_i64(std::ostream& os, std::int64_t x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_mat(std::ostream& os, const Mat& m) {
  put_i64(os, m.rows());
  put_i64(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double)) * m.size());
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  return x;
}

std::int64_t get_i64(std::istream& is) {
  std::int64_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  return x;
}

std::string get_string(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  if (n > (1u << 24)) throw std::runtime_error("checkpoint: string too long");
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

Mat get_mat(std::istream& is) {
  const std::int64_t r = get_i64(is);
  const std::int64_t c = get_i64(is);
  if (r < 0 || c < 0 || r > (1 << 24) || c > (1 << 24)) {
    throw std::runtime_error("checkpoint: bad tensor shape");
  }
  Mat m(r, c);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double)) * m.size());
  return m;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_string(os, config_to_json_text(state.config));
  put_i64(os, state.step);

  const ModelDims& d = state.params.dims;
  const int dims[11] = {d.raw_dim, d.hidden,        d.tokens,
                        d.heads,   d.fusion_layers, d.gka_layers,
                        d.decoder_layers, d.n_v,    d.n_t,
                        d.conv_kernel,    d.sal_dim};
  for (int x : dims) put_u32(os, static_cast<std::uint32_t>(x));

  const auto entries = param_entries(state.params);
  put_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, mat] : entries) {
    put_string(os, name);
    put_mat(os, *mat);
  }

  const bool with_opt = !state.adam_m.empty();
  put_u32(os, with_opt ? 1 : 0);
  if (with_opt) {
    if (state.adam_m.size() != entries.size() ||
        state.adam_v.size() != entries.size()) {
      throw std::runtime_error("checkpoint: optimizer state misaligned");
    }
    for (const Mat& m : state.adam_m) put_mat(os, m);
    for (const Mat& v : state.adam_v) put_mat(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  if (get_u32(is) != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  }

  TrainState state;
  state.config = config_from_json_text(get_string(is));
  state.step = get_i64(is);

  ModelDims d;
  int* fields[11] = {&d.raw_dim, &d.hidden,        &d.tokens,
                     &d.heads,   &d.fusion_layers, &d.gka_layers,
                     &d.decoder_layers, &d.n_v,    &d.n_t,
                     &d.conv_kernel,    &d.sal_dim};
  for (int* f : fields) *f = static_cast<int>(get_u32(is));
  shape_params(state.params, d);

  std::map<std::string, Mat*> slots;
  for (auto& [name, mat] : param_entries(state.params)) slots[name] = mat;

  const std::uint32_t n_tensors = get_u32(is);
  if (n_tensors != slots.size()) {
    throw std::runtime_error("checkpoint: tensor count mismatch");
  }
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = get_string(is);
    const auto it = slots.find(name);
    if (it == slots.end()) {
      throw std::runtime_error("checkpoint: unknown tensor '" + name + "'");
    }
    *it->second = get_mat(is);
  }

  const std::uint32_t with_opt = get_u32(is);
  if (with_opt != 0) {
    const size_t n = slots.size();
    state.adam_m.reserve(n);
    state.adam_v.reserve(n);
    for (size_t i = 0; i < n; ++i) state.adam_m.push_back(get_mat(is));
    for (size_t i = 0; i < n; ++i) state.adam_v.push_back(get_mat(is));
  }
  if (!is) throw std::runtime_error("checkpoint: truncated file " + path);

  // Cross-check payload shapes against the recorded dims.
  const auto entries = param_entries(state.params);
  ModelParams fresh;
  shape_params(fresh, d);
  Rng rng(0);
  const ModelParams reference = init_params(d, rng);
  const auto ref_entries = param_entries(reference);
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].second->rows() != ref_entries[i].second->rows() ||
        entries[i].second->cols() != ref_entries[i].second->cols()) {
      throw std::runtime_error("checkpoint: tensor '" + entries[i].first +
                               "' has the wrong shape for its dims");
    }
    if (!state.adam_m.empty() &&
        (state.adam_m[i].rows() != entries[i].second->rows() ||
         state.adam_m[i].cols() != entries[i].second->cols() ||
         state.adam_v[i].rows() != entries[i].second->rows() ||
         state.adam_v[i].cols() != entries[i].second->cols())) {
      throw std::runtime_error("checkpoint: optimizer state shape mismatch");
    }
  }
  return state;
}

}  // namespace uvcom
