#pragma once

// Umbrella header. The remote LLM client lives in remote_llm_client.hpp and
// is not pulled in here; it drags the HTTP stack along.

#include "tempokit/errors.hpp"
#include "tempokit/eval_metrics.hpp"
#include "tempokit/event_segmentation.hpp"
#include "tempokit/event_sequence.hpp"
#include "tempokit/grounding_trainer.hpp"
#include "tempokit/instance_tracking.hpp"
#include "tempokit/instruction_engine.hpp"
#include "tempokit/json_io.hpp"
#include "tempokit/math.hpp"
#include "tempokit/pipeline_config.hpp"
#include "tempokit/prompt_templates.hpp"
#include "tempokit/rng.hpp"
#include "tempokit/temporal_space.hpp"
