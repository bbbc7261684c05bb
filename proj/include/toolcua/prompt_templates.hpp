#pragma once

// Verbatim prompt bodies. Placeholders use {name}; literal braces are doubled.
// Do not reformat: tests compare these byte-for-byte.

#include <string_view>

namespace toolcua::prompts {

inline constexpr std::string_view k_screenshot_description = R"TPL(Describe this desktop screenshot in English.
Include:
1. Which application, window, or web page is visible
2. The main interactive UI elements that are visible, such as buttons, menus, tabs, tables, forms, inputs, dialogs, or side panels
3. The primary content currently shown on screen

Write 2-4 sentences.
Do not invent details that are not visible in the screenshot.
Return plain text only, not JSON.    )TPL";

inline constexpr std::string_view k_tool_generation = R"TPL(    You need to design a set of semantic-level tools for the following computer-using task.
The tools must be useful for this task and also be grounded to the state transitions visible in the recorded trajectory.

## Task goal
{goal}

## Current diversity round
{round_name}

## Tool granularity strategy
{granularity_instruction}

## Recorded trajectory frame descriptions
{trajectory_context}

## Required tool schema reference
{meta_schema}

## Tool design principles
- Think about the specific applications or software likely used in this task and design tools accordingly.
- Generate no more than 15 tools an no less than 5 tools.
- Category must be one of: navigation / interaction / extraction / filesystem / system / terminate.
- Every non-terminate tool must include `granularity` with value `fine` or `coarse`.
- The `terminate` tool may omit `granularity`, but if present it must be `coarse`.
- Each tool's returns object must contain exactly these fields:
  - success (boolean)
  - result (object/string/null)
  - error_message (string/null)
- Do not generate wait / sleep / delay / get_ui_tree style tools.
- Each tool should represent one complete user intention, not one primitive UI gesture. 
- A user intent such as "open the export dialog" or "apply the date filter" should be a single tool even if the actual UI would require multiple clicks.
- The tools must express user intent at the desktop workflow level, not low-level UI mechanics.

  Avoid low-level tools such as:
  - click_element(element_description)
  - input_text(field, text)
  - scroll_down(pixels)
  - tap_coordinates(x, y)

  Prefer semantic tools such as:
  - open_application(application_name)
  - navigate_to_section(section_name)
  - search_records(query)
  - set_filter(filter_name, value)
  - export_report(destination_path)
  - confirm_submission()

## Multi-granularity requirement
- The tool library must contain both finer-grained tools and coarser-grained tools.
- Fine-grained tools should capture a focused semantic intent that usually corresponds to one local sub-goal, such as opening a specific panel, applying one filter, selecting one record, or confirming one dialog.
- Coarse-grained tools should capture a broader semantic intent that may cover several adjacent UI operations, such as preparing an export, completing a checkout stage, or finishing a search-and-download subroutine.
- Keep every tool grounded to visible state transitions in the recorded trajectory even when it is coarse-grained.
- Avoid making every tool equally granular. The mix should reflect the current round strategy.
- Among non-terminate tools, include at least {min_fine_grained_tools} fine-grained tools and at least {min_coarse_grained_tools} coarse-grained tools.

## Grounding rule
- Prioritize tools that explain real state transitions visible in the recorded trajectory frames.
- The main tool set should be sufficient for the observed workflow in this trajectory.
- You may add a small number of app-relevant helper tools, but do not invent a broad toolbox that cannot be grounded to the recorded states.

## Naming rule
- Use lowercase_with_underscores.
- If a tool is clearly tied to a specific desktop application, its name must start with that application name, for example:
  - `libreoffice_export_pdf`
  - `vscode_open_user_settings`
  - `chrome_download_file`
Do not use the specific website name as the application name, where 'chrome' is the suitbale application name.
- If no concrete application can be determined, the name must start with `general_`.
- Avoid vague names whose purpose is unclear from the name alone.
- Bad examples:
  - `open_file`
  - `set_option`
  - `click_button`
  - `edit_content`

## Terminate rule
- There must be exactly one tool named `terminate`.
- The `terminate` tool must use category `terminate`.
- No non-`terminate` tool may use category `terminate`.
- No other tool may express task-ending semantics such as finish task, complete task, end task, stop task, or report task completion.


## Existing tools that may be reused
{existing_tools}

## Output format
{{
  "tools": [...]
}}
Return valid JSON only.)TPL";

inline constexpr std::string_view k_fix_tool = R"TPL(The following tool definition is invalid:
{tool}

## Validation errors
{error_msg}

## Required schema
{meta_schema}

Please repair the tool definition so that it matches the schema.
Return exactly one JSON object in the following format:
{{
  "name": "...",
  "description": "...",
  "granularity": "fine or coarse",
  "parameters": {{}},
  "returns": {{
    "success": {{"type": "boolean"}},
    "result": {{"type": ["string", "object", "null"]}},
    "error_message": {{"type": ["string", "null"]}}
  }},
  "category": "...",
  "side_effects": []
}})TPL";

inline constexpr std::string_view k_joint_generation = R"TPL(## Role
You are a trajectory generator, not a real agent.
You must simulate how a smart and efficient agent would complete exactly the current step of a computer-using task.

## Current trajectory diversity strategy
{granularity_instruction}

## Important constraints
- Do not generate multiple steps at once.
1. The screenshot description already tells you the current screen state, so you do not need a separate "view page" or "inspect page" tool.
2. Do not call wait-like tools more than once in a row.
3. Do not call wait-like tools unless there is a clear error condition.
4. Every step must make progress toward the task goal.
5. Assume the network, application, and desktop environment are functioning normally. Do not wait for loading unless the state explicitly requires it.
6. Choose only a tool action that can plausibly move the current state to a later real state in the recorded trajectory.
7. Do not call terminate unless the task has already reached the final recorded state.

## Task goal
{goal}

## Trajectory history
{history}

## Current screenshot description
{screenshot_description}

## Current virtual world state
{world_state}

## Available tools for this task
{tools}

Generate the complete output for the current step, including:
1. Observation
2. Thought
3. Action
4. Tool Call
5. Tool Response

## Rules for generating the Step
- The observation should reflect the current screenshot description, especial attention to important region.
- Thougt must demonstrate the agent's real thinking progress advancing the task given current step.
- Action must be a natural-language description of the intended tool call action, it should be a simple, short and concise sentence. NOT any explict GUI desctiption like `click`, `drag`, `key` and so no.
- Tool call should be a valid JSON foramt of the intended tool call.

## Rules for generating the Tool Response
- The response fields must strictly follow the selected tool's returns schema.
- Do not include fields that are not defined by the tool's returns schema.
- The value of success must be consistent with the current world_state.
- Concrete values in result, such as URLs, file paths, window names, or extracted content, must come from the trajectory history or the current screenshot description.
- Do not invent a tool usage whose effect would not be visibly groundable to a later recorded screenshot.

## Output requirements
- Generate exactly one step.
- The root object must contain the following fields and no wrapper layer.
- Output as exactly the JSON object in the following format:

## Output format
{{
  "observation": "Observation grounded in the current screenshot description",
  "thought": "Reasoning about the next Tool calling action. It must clearly advance the task.",
  "action": "Simple and concise natural-language description of the intended Tool calling action",
  "tool_call": {{
    "tool_name": "One of the available tools",
    "tool_parameters": {{
      "parameter_name": "parameter value that matches the tool schema"
    }}
  }},
  "tool_response": {{
    "success": true,
    "result": "...",
    "error_message": null
  }}
}})TPL";

inline constexpr std::string_view k_predict_screenshot = R"TPL(## Role
You are a desktop UI state predictor.

## Task goal
{goal}

## Action that was just performed
- Tool: {tool_name}
- Parameters: {tool_parameters}
- Result: {tool_response}

## UI state before the action
{previous_screenshot_description}

## Current world state
{world_state}

## Instruction
Predict what the desktop interface most likely shows after that action.
Be concrete. Mention the current page, window, dialog, visible UI elements, and any visible data or status changes.
Write 3-5 sentences in English.
Return plain text only, not JSON.    )TPL";

inline constexpr std::string_view k_describe_and_locate = R"TPL(## Action that was just performed
Tool: {tool_name}
Parameters: {tool_parameters}
Result: {tool_response}

## Tasks

### Task 1: Describe the current screenshot
Describe the current desktop screenshot before the action in 3-5 English sentences.

### Task 2: Locate the best matching result screenshot
You are given {num_candidates} candidate screenshots, indexed from 1.
Select the candidate that best represents the UI state after the action has completed.

## Output format
{{
  "current_description": "English description of the current screenshot",
  "matched_index": 1,
  "confidence": "high/medium/low/none",
  "reason": "What visible evidence shows that this screenshot matches the post-action state"
}}

If none of the candidates match, set matched_index to null.    )TPL";

inline constexpr std::string_view k_merge_tree_planning = R"TPL(You are planning an optimal bottom-up merge tree for a fine-grained desktop tool trajectory.

## Task goal
{goal}

## Fine-grained leaf steps
{leaf_summary}

## Constraints
- Leaf steps are indexed from 0 to {max_leaf_index}.
- Preserve the original left-to-right leaf order exactly.
- Every internal merge node must merge between 2 and {max_branching_factor} contiguous children.
- Children may be either direct leaf indices or nested internal nodes.
- Every internal node must represent a coherent higher-level sub-goal.
- Prefer a tree that maximizes semantic cohesion inside each merge and clear abstraction jumps between levels.
- Avoid unnecessary merges that do not create a meaningful higher-level action.
- The final root must cover all leaves from 0 to {max_leaf_index}.
- The tree height must not exceed {max_coarse_levels} coarse levels above the fine leaves.
- Return English only.

## Output format
{{
  "tree": {{
    "summary": "Short summary of the root-level task subroutine",
    "children": [
      0,
      {{
        "summary": "Merged sub-goal summary",
        "children": [1, 2]
      }},
      {{
        "summary": "Another merged sub-goal summary",
        "children": [
          {{
            "summary": "Nested merged sub-goal",
            "children": [3, 4]
          }},
          5
        ]
      }}
    ]
  }}
}}

Return valid JSON only.)TPL";

inline constexpr std::string_view k_bottom_up_merge = R"TPL(You are performing bottom-up multi-granularity tool synthesis for a desktop task trajectory.

## Task goal
{goal}

## Target granularity level
{target_level}

## Instruction
You are given a contiguous chunk of already-grounded finer-grained tool steps.
Synthesize one broader tool that compresses the whole chunk into a single higher-level semantic action.
The merged tool must still be grounded to the same final UI state reached by the chunk.

## Rules
- The merged tool must summarize the whole chunk, not just the final fine-grained action.
- The merged tool must be semantically broader than each constituent fine-grained tool.
- Do not invent effects beyond the final state already reached by the chunk.
- The merged tool must use `granularity = "coarse"`.
- The merged tool call name in `merged_step.tool_call.tool_name` must exactly match `tool_definition.name`.
- The merged step's screenshot index and result state will be assigned by the caller, so do not include them.
- Keep the tool response grounded to the final fine-grained step in the chunk.
- Do not use terminate semantics.
- Return English only.

## Chunk summary
{chunk_summary}

## Output format
{{
  "tool_definition": {{
    "name": "lowercase_with_underscores",
    "description": "One-sentence broader semantic intent for the whole chunk",
    "granularity": "coarse",
    "parameters": {{}},
    "returns": {{
      "success": {{"type": "boolean"}},
      "result": {{"type": ["string", "object", "null"]}},
      "error_message": {{"type": ["string", "null"]}}
    }},
    "category": "navigation|interaction|extraction|filesystem|system",
    "side_effects": []
  }},
  "merged_step": {{
    "observation": "Observation of the UI state before the merged action starts",
    "thought": "Reasoning about why this broader tool covers the whole chunk",
    "action": "Short natural-language summary of the merged higher-level action",
    "tool_call": {{
      "tool_name": "same as tool_definition.name",
      "tool_parameters": {{
        "parameter_name": "parameter value"
      }}
    }},
    "tool_response": {{
      "success": true,
      "result": {{}},
      "error_message": null
    }}
  }}
}}

Return valid JSON only.)TPL";

// Agent-side system prompt pieces. k_system_prompt takes {tool_list} and {important_reminder}.

inline constexpr std::string_view k_important_gui_only = R"TPL(<IMPORTANT>
Reminder:
- The `computer_use` function provides **GUI actions** to interact with the computer directly via mouse and keyboard.
- After each GUI action, you will receive a new screenshot reflecting the current state of the screen.
- Always consult the latest screenshot before deciding your next action.
</IMPORTANT>)TPL";

inline constexpr std::string_view k_important_with_tools = R"TPL(<IMPORTANT>
Reminder:
- Use `computer_use` to interact with the computer via mouse and keyboard.
    - `computer_use` GUI actions usually only provide a simple success result such as `Success`.
    - After each action, you will receive a new screenshot of the current state of the computer.
- If there are other functions, they are MCP Tool actions, used to interact with the MCP server in computer. 
    - Their results are returned as screenshot and a textual raw JSON string with fields `success`, `result`, and `error_message`.   
    - Some MCP Tool actions may NOT cause any visible change in the screenshot, so rely on the JSON tool result when appropriate.
    - Do NOT use `read_text_file` to read PDF or other non-plaintext files; use GUI actions instead.
    - Do NOT repeat the same MCP Tool call if it keeps failing or produces no useful progress — try a different approach or terminate.
    - Do NOT repeatedly call `env_info` tools to retrieve file information.
</IMPORTANT>)TPL";

inline constexpr std::string_view k_system_prompt = R"TPL(# Tools

You may call one or more functions to assist with the user query.

You are provided with function signatures within <tools></tools> XML tags:
<tools>
{{"type": "function", "function": {{"name_for_human": "computer_use", "name": "computer_use", "description": ("Use a mouse and keyboard to interact with a computer, and take screenshots.\n* This is an interface to a desktop GUI. You do not have access to a terminal or applications menu. You must click on desktop icons to start applications.\n* Some applications may take time to start or process actions, so you may need to wait and take successive screenshots to see the results of your actions. E.g. if you click on Firefox and a window doesn't open, try wait and taking another screenshot.\n* The screen's resolution is 1000x1000.\n* Whenever you intend to move the cursor to click on an element like an icon, you should consult a screenshot to determine the coordinates of the element before moving the cursor.\n* If you tried clicking on a program or link but it failed to load even after waiting, try adjusting your cursor position so that the tip of the cursor visually falls on the element that you want to click.\n* Make sure to click any buttons, links, icons, etc with the cursor tip in the center of the element. Don't click boxes on their edges unless asked."), "parameters": {{"properties": {{"action": {{"description": ("\n* `key`: Performs key down presses on the arguments passed in order, then performs key releases in reverse order.\n* `type`: Type a string of text on the keyboard.\n* `mouse_move`: Move the cursor to a specified (x, y) pixel coordinate on the screen.\n* `left_click`: Click the left mouse button at a specified (x, y) pixel coordinate on the screen.\n* `left_click_drag`: Click and drag the cursor to a specified (x, y) pixel coordinate on the screen.\n* `right_click`: Click the right mouse button at a specified (x, y) pixel coordinate on the screen.\n* `middle_click`: Click the middle mouse button at a specified (x, y) pixel coordinate on the screen.\n* `double_click`: Double-click the left mouse button at a specified (x, y) pixel coordinate on the screen.\n* `triple_click`: Triple-click the left mouse button at a specified (x, y) pixel coordinate on the screen (simulated as double-click since it's the closest action).\n* `scroll`: Performs a scroll of the mouse scroll wheel.\n* `hscroll`: Performs a horizontal scroll (mapped to regular scroll).\n* `wait`: Wait specified seconds for the change to happen.\n* `terminate`: Terminate the current task and report its completion status.\n* `answer`: Answer a question.\n        "), "enum": ["key", "type", "mouse_move", "left_click", "left_click_drag", "right_click", "middle_click", "double_click", "scroll", "wait", "terminate"], "type": "string"}}, "keys": {{"description": "Required only by `action=key`.", "type": "array"}}, "text": {{"description": "Required only by `action=type`.", "type": "string"}}, "coordinate": {{"description": "The x,y coordinates for mouse actions.", "type": "array"}}, "pixels": {{"description": "The amount of scrolling.", "type": "number"}}, "time": {{"description": "The seconds to wait.", "type": "number"}}, "status": {{"description": "The status of the task.", "type": "string", "enum": ["success", "failure"]}}}}, "required": ["action"], "type": "object"}}, "args_format": "Format the arguments as a JSON object."}}}}
{tool_list}
</tools>

For each function call, return a json object with function name and arguments within <tool_call></tool_call> XML tags:
<tool_call>
{{"name": <function-name>, "arguments": <args-json-object>}}
</tool_call>

{important_reminder}

# Response format

Response format for every step:
1) Action: a short imperative describing what to do in the UI, or specifying which tool to invoke
2) A single <tool_call>...</tool_call> block containing only the JSON: {{"name": <function-name>, "arguments": <args-json-object>}}.

Rules:
- Output exactly in the order: Action, <tool_call>.
- Be brief: one sentence for Action.
- Do not output anything else outside those parts.
- If finishing, use action=terminate in the tool call.)TPL";

}  // namespace toolcua::prompts
