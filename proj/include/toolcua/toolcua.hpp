#pragma once

// Everything except the HTTP client, which pulls in OpenSSL and is opt-in:
// include "toolcua/http_client.hpp" directly when a live endpoint is needed.

#include "toolcua/common.hpp"
#include "toolcua/prompt_templates.hpp"
#include "toolcua/tool_schema.hpp"
#include "toolcua/traj_model.hpp"
#include "toolcua/llm_client.hpp"
#include "toolcua/agent_io.hpp"
#include "toolcua/merge_tree.hpp"
#include "toolcua/pipeline.hpp"
#include "toolcua/reward.hpp"
#include "toolcua/metrics.hpp"
#include "toolcua/env_sim.hpp"
#include "toolcua/scripted_model.hpp"
#include "toolcua/plot.hpp"
#include "toolcua/run_config.hpp"
