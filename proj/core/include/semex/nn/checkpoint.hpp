#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "semex/nn/dense_net.hpp"
#include "semex/nn/gru.hpp"

namespace semex::nn {

// Versioned text checkpoint container; see docs/formats.md. Named sections
// hold dense nets, GRU cells, raw vectors, or one-line text blobs. Floating
// point values are serialized as C hexfloats, so save/load round-trips are
// bit-exact.
class CheckpointWriter {
 public:
  void add_dense(const std::string& name, const DenseNet& net);
  void add_gru(const std::string& name, const GruCell& cell);
  void add_vector(const std::string& name, std::span<const double> v);
  void add_text(const std::string& name, const std::string& text);

  // Serializes all added sections. Throws std::runtime_error on IO failure.
  void write(const std::string& path) const;

 private:
  std::string body_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path);

  bool has(const std::string& name) const;
  std::vector<std::string> names() const;

  DenseNet dense(const std::string& name) const;
  GruCell gru(const std::string& name) const;
  std::vector<double> vec(const std::string& name) const;
  std::string text(const std::string& name) const;

 private:
  struct Section {
    std::string kind;
    std::vector<int> ints;
    std::vector<std::string> strings;
    std::vector<double> values;
    std::string text;
  };
  const Section& get(const std::string& name, const std::string& kind) const;

  std::map<std::string, Section> sections_;
};

}  // namespace semex::nn
