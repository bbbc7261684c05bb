#!/usr/bin/env python3
"""Regenerates sample_corpus.jsonl: 20 clean GUI trajectories plus two that filtering should drop."""
import json
import random
import sys

APPS = {
    "chrome": ["Bookmark the current page in Chrome", "Set the Chrome homepage to the team wiki",
               "Clear browsing history for the last hour in Chrome", "Open the downloads page in Chrome and pin it"],
    "libreoffice": ["Make the title bold in the Writer document", "Sort column B ascending in the Calc sheet",
                    "Insert a page number footer in Writer", "Export the Calc sheet as a PDF"],
    "vscode": ["Enable word wrap in VS Code", "Rename the variable count to total in VS Code",
               "Install the Python extension in VS Code", "Change the VS Code color theme to light"],
    "gimp": ["Resize the image to 800 pixels wide in GIMP", "Flip the layer horizontally in GIMP",
             "Convert the image to grayscale in GIMP", "Crop the image to a square in GIMP"],
    "thunderbird": ["Create a mail filter for invoices in Thunderbird", "Mark all messages in the inbox as read",
                    "Add a signature to the default account in Thunderbird", "Move the newest message to Archive"],
}

TARGETS = ["menu bar", "settings panel", "toolbar button", "dialog field", "list entry", "confirm button"]


def gui_step(rng, i, traj_id):
    roll = rng.random()
    target = rng.choice(TARGETS)
    if roll < 0.5:
        action = {"type": "gui", "kind": "left_click", "coordinate": [rng.randint(20, 980), rng.randint(20, 980)]}
        text = f"Click the {target}."
    elif roll < 0.65:
        action = {"type": "gui", "kind": "type", "text": f"value {i}"}
        text = f"Type the value into the {target}."
    elif roll < 0.8:
        action = {"type": "gui", "kind": "key", "keys": rng.choice([["enter"], ["ctrl", "s"], ["tab"]])}
        text = "Press the shortcut to continue."
    elif roll < 0.9:
        action = {"type": "gui", "kind": "scroll", "pixels": rng.choice([-300, 300])}
        text = f"Scroll to reveal the {target}."
    else:
        action = {"type": "gui", "kind": "double_click", "coordinate": [rng.randint(20, 980), rng.randint(20, 980)]}
        text = f"Double-click the {target}."
    return {
        "index": i,
        "observation": f"The {target} is visible.",
        "thought": f"Interacting with the {target} moves the task forward.",
        "action_text": text,
        "action": action,
        "screenshot_ref": f"file:///data/screens/{traj_id}/{i:02d}.png",
    }


def terminate_step(i, traj_id, status="success"):
    return {
        "index": i,
        "observation": "The requested change is in place.",
        "thought": "The goal is satisfied.",
        "action_text": "Finish the task.",
        "action": {"type": "gui", "kind": "terminate", "status": status},
        "screenshot_ref": f"file:///data/screens/{traj_id}/{i:02d}.png",
    }


def trajectory(traj_id, goal, app, steps, status):
    return {
        "schema_version": 1,
        "trajectory_id": traj_id,
        "goal": goal,
        "application_tags": [app],
        "terminal_status": status,
        "steps": steps,
    }


def main():
    rng = random.Random(20240601)
    out = []
    for app, goals in APPS.items():
        for k, goal in enumerate(goals):
            traj_id = f"{app}-{k:02d}"
            n = rng.randint(5, 11)
            steps = [gui_step(rng, i, traj_id) for i in range(n)]
            steps.append(terminate_step(n, traj_id))
            out.append(trajectory(traj_id, goal, app, steps, "success"))
    failed = [gui_step(rng, i, "chrome-fail") for i in range(4)] + [terminate_step(4, "chrome-fail", "failure")]
    out.append(trajectory("chrome-fail", "Change the Chrome download folder", "chrome", failed, "failure"))
    short = [gui_step(rng, 0, "vscode-short"), terminate_step(1, "vscode-short")]
    out.append(trajectory("vscode-short", "Open a new VS Code window", "vscode", short, "success"))
    path = sys.argv[1] if len(sys.argv) > 1 else "sample_corpus.jsonl"
    with open(path, "w", encoding="utf-8") as f:
        for t in out:
            f.write(json.dumps(t, ensure_ascii=False, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
