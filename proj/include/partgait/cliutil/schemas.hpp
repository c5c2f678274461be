#pragma once

#include "partgait/cliutil/config.hpp"
#include "partgait/data/augment.hpp"
#include "partgait/data/synthetic.hpp"
#include "partgait/finetune/trainer.hpp"
#include "partgait/pretrain/trainer.hpp"

namespace partgait::cli {

// Key schemas for each CLI command, one section.key entry per knob.
config_schema gen_schema();
config_schema pretrain_schema();
config_schema finetune_schema();
config_schema eval_schema();
config_schema diag_schema();

// Resolved-config -> domain-struct converters. These throw
// bad_config_error on semantic problems the schema cannot express
// (e.g. list lengths, unknown enum names).
data::synthetic_corpus_spec corpus_spec_from_config(const config_map& m);
model::tower_config tower_from_config(const config_map& m);
data::augmentation_policy policy_from_config(const config_map& m);
pretrain::pretrain_config pretrain_from_config(const config_map& m);
finetune::finetune_config finetune_from_config(const config_map& m);

}  // namespace partgait::cli
