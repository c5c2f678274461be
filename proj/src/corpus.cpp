#include "partgait/data/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "partgait/data/png_io.hpp"
#include "partgait/errors.hpp"

namespace fs = std::filesystem;

namespace partgait::data {

std::vector<dataset_manifest> read_manifest_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open manifest '" + path + "'");
  std::vector<dataset_manifest> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    dataset_manifest m;
    std::string seq_str, weight_str;
    if (!std::getline(ls, m.name, '\t') ||
        !std::getline(ls, m.root_path, '\t') ||
        !std::getline(ls, seq_str, '\t'))
      throw bad_config_error("manifest '" + path + "' line " +
                             std::to_string(lineno) + ": expected 4 fields");
    std::getline(ls, weight_str, '\t');
    try {
      m.num_sequences = std::stoll(seq_str);
      m.downweight_factor = weight_str.empty() ? 1.0 : std::stod(weight_str);
    } catch (const std::exception&) {
      throw bad_config_error("manifest '" + path + "' line " +
                             std::to_string(lineno) + ": bad number");
    }
    if (m.num_sequences <= 0 || m.downweight_factor <= 0)
      throw bad_config_error("manifest '" + path + "' line " +
                             std::to_string(lineno) +
                             ": counts and downweights must be positive");
    out.push_back(std::move(m));
  }
  return out;
}

void write_manifest_file(const std::string& path,
                         const std::vector<dataset_manifest>& manifests) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot write manifest '" + path + "'");
  for (const auto& m : manifests)
    os << m.name << '\t' << m.root_path << '\t' << m.num_sequences << '\t'
       << m.downweight_factor << '\n';
}

corpus_index scan_corpus(const std::string& root) {
  if (!fs::is_directory(root))
    throw io_error("corpus root '" + root + "' is not a directory");

  corpus_index idx;
  idx.root = root;

  std::vector<std::string> subjects;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) subjects.push_back(e.path().filename().string());
  std::sort(subjects.begin(), subjects.end());

  for (const auto& subject : subjects) {
    std::vector<std::string> seqs;
    for (const auto& e : fs::directory_iterator(fs::path(root) / subject))
      if (e.is_directory()) seqs.push_back(e.path().filename().string());
    std::sort(seqs.begin(), seqs.end());
    for (const auto& seq : seqs) {
      sequence_ref ref;
      ref.subject_id = subject;
      ref.sequence_id = subject + "/" + seq;
      ref.dir = (fs::path(root) / subject / seq).string();
      int64_t count = 0;
      for (const auto& f : fs::directory_iterator(ref.dir))
        if (f.path().extension() == ".png") ++count;
      ref.num_frames = count;
      if (count > 0) idx.sequences.push_back(std::move(ref));
    }
  }

  const fs::path labels_path = fs::path(root) / "labels.tsv";
  if (fs::exists(labels_path)) {
    std::ifstream is(labels_path);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string subject, attr, value;
      if (std::getline(ls, subject, '\t') && std::getline(ls, attr, '\t') &&
          std::getline(ls, value, '\t'))
        idx.labels[subject][attr] = std::stoi(value);
    }
  }
  return idx;
}

tensorf load_frames(const sequence_ref& seq,
                    const std::vector<int64_t>& frame_indices) {
  tensorf out({static_cast<int64_t>(frame_indices.size()), 64, 44});
  char name[32];
  for (size_t i = 0; i < frame_indices.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%04lld.png",
                  static_cast<long long>(frame_indices[i]));
    const gray_image img = read_png_gray(seq.dir + "/" + name);
    if (img.height != 64 || img.width != 44)
      throw io_error("frame '" + std::string(name) + "' in " + seq.dir +
                     " is not 64x44");
    float* dst = out.data() + static_cast<int64_t>(i) * 64 * 44;
    for (int64_t px = 0; px < 64 * 44; ++px)
      dst[px] = static_cast<float>(img.pixels[static_cast<size_t>(px)]) / 255.0f;
  }
  return out;
}

clip_pair_sample sample_clip_pair(int64_t seq_len, int64_t clip_len,
                                  rng_stream& rng) {
  int64_t ext = seq_len;
  while (ext < 2 * clip_len) ext += seq_len;

  clip_pair_sample s;
  const int64_t a = rng.uniform_int(ext - 2 * clip_len + 1);
  const int64_t b = a + clip_len + rng.uniform_int(ext - clip_len - (a + clip_len) + 1);
  const bool swap = rng.bernoulli(0.5);
  s.start_a = swap ? b : a;
  s.start_b = swap ? a : b;
  for (int64_t i = 0; i < clip_len; ++i) {
    s.frames_a.push_back((s.start_a + i) % seq_len);
    s.frames_b.push_back((s.start_b + i) % seq_len);
  }
  return s;
}

}  // namespace partgait::data
