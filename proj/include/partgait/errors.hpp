#pragma once

#include <stdexcept>
#include <string>

namespace partgait {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// data
struct empty_silhouette_error : error { using error::error; };
struct empty_manifest_error : error { using error::error; };
struct io_error : error { using error::error; };
struct bad_config_error : error { using error::error; };

// partops
struct indivisible_height_error : error { using error::error; };
struct bad_shift_error : error { using error::error; };
struct indivisible_batch_error : error { using error::error; };

// model / training
struct shape_mismatch_error : error { using error::error; };
struct bad_step_error : error { using error::error; };
struct zero_vector_error : error { using error::error; };
struct checkpoint_mismatch_error : error { using error::error; };
struct degenerate_batch_error : error { using error::error; };
struct bad_label_error : error { using error::error; };
struct numerical_error : error { using error::error; };

// evalkit
struct no_valid_match_error : error { using error::error; };
struct empty_input_error : error { using error::error; };

}  // namespace partgait
