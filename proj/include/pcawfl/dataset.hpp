#pragma once

// Data plumbing for experiments: a synthetic Gaussian-blob generator, an IDX
// reader for MNIST-family files, worker sharding, and a small native binary
// cache used by the `pca --out` round trip.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcawfl/dpca.hpp"
#include "pcawfl/mathkit.hpp"

namespace pcawfl::harness {

// Columns are samples, matching dpca::WorkerShard. labels may be empty when
// the container holds something label-free (e.g. a saved basis).
struct Dataset {
  Eigen::MatrixXd samples;
  std::vector<int> labels;
};

// Gaussian blobs: sample m gets label m % classes, class c is centered at
// separation * e_{c % dim} with unit isotropic noise. Per sample the stream
// is consumed in order: dim standard gaussians.
inline Dataset synth_dataset(int dim, int classes, long count, double separation,
                             mathkit::RngStream& stream) {
  if (dim < 1) throw std::invalid_argument("synth_dataset: dim must be >= 1");
  if (classes < 2) throw std::invalid_argument("synth_dataset: classes must be >= 2");
  if (count < 1) throw std::invalid_argument("synth_dataset: count must be >= 1");
  if (separation < 0.0)
    throw std::invalid_argument("synth_dataset: separation must be >= 0");

  Dataset data;
  data.samples.resize(dim, count);
  data.labels.resize(static_cast<std::size_t>(count));
  for (long m = 0; m < count; ++m) {
    const int label = static_cast<int>(m % classes);
    data.labels[static_cast<std::size_t>(m)] = label;
    for (int i = 0; i < dim; ++i)
      data.samples(i, m) = mathkit::sample_real_gaussian(1.0, stream);
    data.samples(label % dim, m) += separation;
  }
  return data;
}

// Stable sort of samples by label; within a label the original order is kept.
inline Dataset sort_by_label(const Dataset& data) {
  if (data.labels.size() != static_cast<std::size_t>(data.samples.cols()))
    throw std::invalid_argument("sort_by_label: label count mismatch");
  std::vector<Eigen::Index> order(data.labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return data.labels[static_cast<std::size_t>(a)] <
           data.labels[static_cast<std::size_t>(b)];
  });
  Dataset out;
  out.samples.resize(data.samples.rows(), data.samples.cols());
  out.labels.resize(data.labels.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.samples.col(static_cast<Eigen::Index>(j)) = data.samples.col(order[j]);
    out.labels[j] = data.labels[static_cast<std::size_t>(order[j])];
  }
  return out;
}

// Even contiguous split into worker shards; sample count must divide evenly.
inline std::vector<dpca::WorkerShard> split_contiguous(const Dataset& data,
                                                       int n_workers) {
  if (n_workers < 1)
    throw std::invalid_argument("split_contiguous: n_workers must be >= 1");
  const Eigen::Index total = data.samples.cols();
  if (data.labels.size() != static_cast<std::size_t>(total))
    throw std::invalid_argument("split_contiguous: label count mismatch");
  if (total % n_workers != 0)
    throw std::invalid_argument(
        "split_contiguous: sample count not divisible by worker count");
  const Eigen::Index per = total / n_workers;
  std::vector<dpca::WorkerShard> shards;
  shards.reserve(static_cast<std::size_t>(n_workers));
  for (int n = 0; n < n_workers; ++n) {
    dpca::WorkerShard shard;
    shard.worker_id = n;
    shard.samples = data.samples.middleCols(per * n, per);
    shard.labels.assign(data.labels.begin() + per * n,
                        data.labels.begin() + per * (n + 1));
    shards.push_back(std::move(shard));
  }
  return shards;
}

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open '" + path + "'");
  std::vector<unsigned char> bytes(std::istreambuf_iterator<char>(in), {});
  return bytes;
}

inline std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

}  // namespace detail

// IDX pair loader: images file (magic 0x00000803, u8 pixels) plus labels file
// (magic 0x00000801, u8 labels). Pixels are scaled to [0, 1]; each image is
// flattened into one column of rows*cols entries.
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  const auto img = detail::read_file_bytes(images_path);
  if (img.size() < 16)
    throw std::runtime_error("idx: '" + images_path + "' truncated header");
  if (detail::be32(img, 0) != 0x00000803u)
    throw std::runtime_error("idx: '" + images_path +
                             "' has wrong magic for an image file");
  const std::uint64_t count = detail::be32(img, 4);
  const std::uint64_t rows = detail::be32(img, 8);
  const std::uint64_t cols = detail::be32(img, 12);
  if (img.size() != 16 + count * rows * cols)
    throw std::runtime_error("idx: '" + images_path + "' truncated payload");

  const auto lab = detail::read_file_bytes(labels_path);
  if (lab.size() < 8)
    throw std::runtime_error("idx: '" + labels_path + "' truncated header");
  if (detail::be32(lab, 0) != 0x00000801u)
    throw std::runtime_error("idx: '" + labels_path +
                             "' has wrong magic for a label file");
  const std::uint64_t lab_count = detail::be32(lab, 4);
  if (lab.size() != 8 + lab_count)
    throw std::runtime_error("idx: '" + labels_path + "' truncated payload");
  if (lab_count != count)
    throw std::runtime_error("idx: image and label counts differ");

  Dataset data;
  const std::uint64_t dim = rows * cols;
  data.samples.resize(static_cast<Eigen::Index>(dim),
                      static_cast<Eigen::Index>(count));
  data.labels.resize(count);
  for (std::uint64_t m = 0; m < count; ++m) {
    for (std::uint64_t i = 0; i < dim; ++i)
      data.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) =
          img[16 + m * dim + i] / 255.0;
    data.labels[m] = lab[8 + m];
  }
  return data;
}

// Native binary cache. Layout: magic, version, rows, cols, label flag, then
// column-major doubles, then i32 labels when flagged. Host byte order; this
// is a scratch format, not an interchange one.
inline void save_dataset(const std::string& path, const Dataset& data) {
  if (!data.labels.empty() &&
      data.labels.size() != static_cast<std::size_t>(data.samples.cols()))
    throw std::invalid_argument("save_dataset: label count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_dataset: cannot open '" + path + "'");
  const std::uint32_t magic = 0x50434157u, version = 1u;
  const std::int64_t rows = data.samples.rows(), cols = data.samples.cols();
  const std::uint8_t has_labels = data.labels.empty() ? 0 : 1;
  out.write(reinterpret_cast<const char*>(&magic), sizeof magic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(&has_labels), sizeof has_labels);
  out.write(reinterpret_cast<const char*>(data.samples.data()),
            static_cast<std::streamsize>(sizeof(double)) * rows * cols);
  if (has_labels) {
    for (int label : data.labels) {
      const std::int32_t v = label;
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw std::runtime_error("save_dataset: write to '" + path + "' failed");
}

inline Dataset load_dataset_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset_bin: cannot open '" + path + "'");
  std::uint32_t magic = 0, version = 0;
  std::int64_t rows = 0, cols = 0;
  std::uint8_t has_labels = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || magic != 0x50434157u || version != 1u)
    throw std::runtime_error("load_dataset_bin: '" + path + "' is not a dataset cache");
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  in.read(reinterpret_cast<char*>(&has_labels), sizeof has_labels);
  if (!in || rows < 0 || cols < 0)
    throw std::runtime_error("load_dataset_bin: '" + path + "' has a bad header");
  Dataset data;
  data.samples.resize(rows, cols);
  in.read(reinterpret_cast<char*>(data.samples.data()),
          static_cast<std::streamsize>(sizeof(double)) * rows * cols);
  if (has_labels) {
    data.labels.resize(static_cast<std::size_t>(cols));
    for (auto& label : data.labels) {
      std::int32_t v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      label = v;
    }
  }
  if (!in) throw std::runtime_error("load_dataset_bin: '" + path + "' truncated");
  return data;
}

}  // namespace pcawfl::harness
