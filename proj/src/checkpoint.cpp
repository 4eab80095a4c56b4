#include "bayman/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bayman/errors.hpp"

namespace bayman {
namespace {

void write_matrix_block(std::ostream& out, const std::string& tag, const std::string& name,
                        const Matrix& m) {
  out << tag << ' ' << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  // Eigen stores column-major; emit row-major so the layout matches the header.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
  out << '\n';
}

Matrix read_matrix_block(std::istream& in, Eigen::Index rows, Eigen::Index cols,
                         const std::string& name) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      m(r, c) = v;
    }
  }
  if (!in) throw std::runtime_error("checkpoint: truncated tensor data for " + name);
  if (in.get() != '\n') throw std::runtime_error("checkpoint: malformed tensor block for " + name);
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);

  out << kCheckpointHeader << '\n';
  const std::string config_text = ckpt.config.to_string();
  out << "config " << config_text.size() << '\n' << config_text << '\n';

  for (const auto& [name, m] : ckpt.params.entries()) {
    write_matrix_block(out, "param", name, *m);
  }
  if (ckpt.adam) {
    out << "adam " << ckpt.adam->step << ' ' << ckpt.next_epoch << '\n';
    const auto entries = ckpt.params.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      write_matrix_block(out, "m", entries[i].first, ckpt.adam->m[i]);
      write_matrix_block(out, "v", entries[i].first, ckpt.adam->v[i]);
    }
  }
  out << "end\n";
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open checkpoint file: " + path);

  std::string line;
  if (!std::getline(in, line) || line != kCheckpointHeader) {
    throw std::runtime_error("checkpoint: bad header in " + path);
  }

  Checkpoint ckpt;
  if (!std::getline(in, line) || line.rfind("config ", 0) != 0) {
    throw std::runtime_error("checkpoint: missing config block");
  }
  const std::size_t config_len = std::stoull(line.substr(7));
  std::string config_text(config_len, '\0');
  in.read(config_text.data(), static_cast<std::streamsize>(config_len));
  if (!in || in.get() != '\n') throw std::runtime_error("checkpoint: truncated config block");
  ckpt.config = ExperimentConfig::from_string(config_text);

  auto entries = ckpt.params.entries();
  std::size_t params_read = 0;
  bool adam_seen = false;
  std::size_t moments_read = 0;

  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream header(line);
    std::string tag;
    header >> tag;
    if (tag == "adam") {
      ckpt.adam = AdamState{};
      ckpt.adam->m.resize(entries.size());
      ckpt.adam->v.resize(entries.size());
      header >> ckpt.adam->step >> ckpt.next_epoch;
      if (!header) throw std::runtime_error("checkpoint: malformed adam line");
      adam_seen = true;
      continue;
    }
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    header >> name >> rows >> cols;
    if (!header || rows < 0 || cols < 0) {
      throw std::runtime_error("checkpoint: malformed block header: " + line);
    }
    Matrix m = read_matrix_block(in, rows, cols, name);

    std::size_t idx = entries.size();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].first == name) {
        idx = i;
        break;
      }
    }
    if (idx == entries.size()) throw std::runtime_error("checkpoint: unknown tensor " + name);

    if (tag == "param") {
      *entries[idx].second = std::move(m);
      ++params_read;
    } else if (tag == "m" && adam_seen) {
      ckpt.adam->m[idx] = std::move(m);
      ++moments_read;
    } else if (tag == "v" && adam_seen) {
      ckpt.adam->v[idx] = std::move(m);
      ++moments_read;
    } else {
      throw std::runtime_error("checkpoint: unexpected block tag " + tag);
    }
  }

  if (params_read != entries.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(entries.size()) +
                             " parameter tensors, found " + std::to_string(params_read));
  }
  if (adam_seen && moments_read != 2 * entries.size()) {
    throw std::runtime_error("checkpoint: incomplete optimizer state");
  }
  return ckpt;
}

}  // namespace bayman
