#include "semex/nn/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace semex::nn {

namespace {

constexpr const char* kMagic = "semexckpt";
constexpr int kVersion = 1;

std::string format_values(std::span<const double> v) {
  std::string out;
  char buf[48];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a", v[i]);
    out += buf;
    out += ((i + 1) % 8 == 0 || i + 1 == v.size()) ? '\n' : ' ';
  }
  return out;
}

void check_name(const std::string& name) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
    throw std::invalid_argument("invalid checkpoint section name: " + name);
}

}  // namespace

void CheckpointWriter::add_dense(const std::string& name, const DenseNet& net) {
  check_name(name);
  std::ostringstream os;
  os << "section " << name << " dense\n";
  os << "sizes " << net.sizes().size();
  for (int s : net.sizes()) os << ' ' << s;
  os << "\nact " << activation_name(net.hidden_activation()) << ' '
     << activation_name(net.output_activation()) << '\n';
  os << "data " << net.param_count() << '\n';
  os << format_values(net.params());
  os << "end\n";
  body_ += os.str();
}

void CheckpointWriter::add_gru(const std::string& name, const GruCell& cell) {
  check_name(name);
  std::ostringstream os;
  os << "section " << name << " gru\n";
  os << "dims " << cell.input_dim() << ' ' << cell.hidden_dim() << '\n';
  os << "data " << cell.param_count() << '\n';
  os << format_values(cell.params());
  os << "end\n";
  body_ += os.str();
}

void CheckpointWriter::add_vector(const std::string& name, std::span<const double> v) {
  check_name(name);
  std::ostringstream os;
  os << "section " << name << " vector\n";
  os << "data " << v.size() << '\n';
  os << format_values(v);
  os << "end\n";
  body_ += os.str();
}

void CheckpointWriter::add_text(const std::string& name, const std::string& text) {
  check_name(name);
  if (text.find('\n') != std::string::npos)
    throw std::invalid_argument("checkpoint text sections must be single-line");
  body_ += "section " + name + " text\n" + text + "\nend\n";
}

void CheckpointWriter::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << kMagic << ' ' << kVersion << '\n' << body_;
  out.flush();
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

CheckpointReader::CheckpointReader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic) throw std::runtime_error("not a checkpoint file: " + path);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  std::string line;
  std::getline(in, line);  // rest of header line

  auto read_values = [&](Section& s) {
    std::string word;
    in >> word;
    if (word != "data") throw std::runtime_error("checkpoint parse error: expected data");
    std::size_t n = 0;
    in >> n;
    s.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      in >> word;
      char* end = nullptr;
      s.values[i] = std::strtod(word.c_str(), &end);
      if (end == word.c_str()) throw std::runtime_error("checkpoint parse error: bad value");
    }
  };

  std::string word;
  while (in >> word) {
    if (word != "section") throw std::runtime_error("checkpoint parse error: expected section");
    std::string name, kind;
    in >> name >> kind;
    Section s;
    s.kind = kind;
    if (kind == "dense") {
      in >> word;
      if (word != "sizes") throw std::runtime_error("checkpoint parse error: expected sizes");
      std::size_t k = 0;
      in >> k;
      s.ints.resize(k);
      for (auto& v : s.ints) in >> v;
      in >> word;
      if (word != "act") throw std::runtime_error("checkpoint parse error: expected act");
      std::string h, o;
      in >> h >> o;
      s.strings = {h, o};
      read_values(s);
    } else if (kind == "gru") {
      in >> word;
      if (word != "dims") throw std::runtime_error("checkpoint parse error: expected dims");
      int x = 0, hd = 0;
      in >> x >> hd;
      s.ints = {x, hd};
      read_values(s);
    } else if (kind == "vector") {
      read_values(s);
    } else if (kind == "text") {
      std::getline(in, line);  // end of section line
      std::getline(in, s.text);
    } else {
      throw std::runtime_error("checkpoint parse error: unknown section kind " + kind);
    }
    in >> word;
    if (word != "end") throw std::runtime_error("checkpoint parse error: expected end");
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    sections_[name] = std::move(s);
  }
}

bool CheckpointReader::has(const std::string& name) const {
  return sections_.count(name) != 0;
}

std::vector<std::string> CheckpointReader::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : sections_) out.push_back(k);
  return out;
}

const CheckpointReader::Section& CheckpointReader::get(const std::string& name,
                                                       const std::string& kind) const {
  auto it = sections_.find(name);
  if (it == sections_.end())
    throw std::runtime_error("checkpoint section missing: " + name);
  if (it->second.kind != kind)
    throw std::runtime_error("checkpoint section " + name + " has kind " +
                             it->second.kind + ", wanted " + kind);
  return it->second;
}

DenseNet CheckpointReader::dense(const std::string& name) const {
  const Section& s = get(name, "dense");
  DenseNet net(s.ints, activation_from_name(s.strings.at(0)),
               activation_from_name(s.strings.at(1)));
  if (net.param_count() != s.values.size())
    throw std::runtime_error("checkpoint section " + name + " has wrong value count");
  auto p = net.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = s.values[i];
  return net;
}

GruCell CheckpointReader::gru(const std::string& name) const {
  const Section& s = get(name, "gru");
  GruCell cell(s.ints.at(0), s.ints.at(1));
  if (cell.param_count() != s.values.size())
    throw std::runtime_error("checkpoint section " + name + " has wrong value count");
  auto p = cell.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = s.values[i];
  return cell;
}

std::vector<double> CheckpointReader::vec(const std::string& name) const {
  return get(name, "vector").values;
}

std::string CheckpointReader::text(const std::string& name) const {
  return get(name, "text").text;
}

}  // namespace semex::nn
