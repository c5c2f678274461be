#pragma once

#include <map>
#include <string>
#include <vector>

#include "partgait/rng.hpp"
#include "partgait/tensor.hpp"

namespace partgait::data {

struct dataset_manifest {
  std::string name;
  std::string root_path;
  int64_t num_sequences = 0;
  double downweight_factor = 1.0;
};

// Manifest file: one dataset per line,
// name<TAB>root_path<TAB>num_sequences<TAB>downweight_factor
std::vector<dataset_manifest> read_manifest_file(const std::string& path);
void write_manifest_file(const std::string& path,
                         const std::vector<dataset_manifest>& manifests);

struct sequence_ref {
  std::string subject_id;
  std::string sequence_id;
  std::string dir;  // directory holding frame_%04d.png
  int64_t num_frames = 0;
};

// One scan per corpus root at startup; directories are sorted so the
// sequence order (and therefore sampling) is deterministic.
struct corpus_index {
  std::string root;
  std::vector<sequence_ref> sequences;
  // subject_id -> attribute -> integer label, from labels.tsv when present
  std::map<std::string, std::map<std::string, int>> labels;
};

corpus_index scan_corpus(const std::string& root);  // io_error

// Load the given frame indices of a sequence as a (len, 64, 44) tensor,
// pixel values in [0,1].
tensorf load_frames(const sequence_ref& seq,
                    const std::vector<int64_t>& frame_indices);

// Two clip_len windows with disjoint index ranges; sequences shorter
// than 2*clip_len are extended cyclically first, so sampling never fails.
struct clip_pair_sample {
  int64_t start_a = 0, start_b = 0;        // in the (possibly extended) index space
  std::vector<int64_t> frames_a, frames_b; // concrete frame indices (mod length)
};
clip_pair_sample sample_clip_pair(int64_t seq_len, int64_t clip_len,
                                  rng_stream& rng);

}  // namespace partgait::data
