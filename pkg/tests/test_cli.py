import json
import os
import subprocess
import sys

import pytest

from dungeonworld.serialization import load_json, save_canonical

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def run_cli(args, expect=0):
    proc = subprocess.run([sys.executable, "-m", "dungeonworld"] + args,
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == expect, proc.stderr or proc.stdout
    return proc


def write_config(path, connections=(("d0", "d1", "gate"),)):
    save_canonical({
        "dungeons": [
            {"id": "d0", "side_count": 6, "radius": [6.0, 7.5],
             "progression_index": 0, "has_columns": False},
            {"id": "d1", "side_count": 5, "radius": [6.0, 7.0],
             "progression_index": 1, "has_columns": False},
        ],
        "connections": [list(c) for c in connections],
    }, str(path))


class TestCli:
    def test_generate_with_obj_export(self, tmp_path):
        cfg = tmp_path / "config.json"
        write_config(cfg)
        out = tmp_path / "world.json"
        run_cli(["generate", "--config", str(cfg), "--seed", "3",
                 "--out", str(out), "--obj", str(tmp_path / "meshes")])
        assert out.exists()
        obj = (tmp_path / "meshes" / "deploy.obj").read_text()
        assert obj.count("\no ") > 10
        assert "v " in obj and "f " in obj
        assert (tmp_path / "meshes" / "bake.obj").exists()

    def test_invalid_config_rejected_with_diagnostic(self, tmp_path):
        cfg = tmp_path / "config.json"
        write_config(cfg, connections=())  # two dungeons, no connection
        proc = run_cli(["generate", "--config", str(cfg), "--seed", "3",
                        "--out", str(tmp_path / "w.json")], expect=2)
        assert "not connected" in proc.stderr

    def test_simulate_emits_metrics_json(self, tmp_path):
        cfg = tmp_path / "config.json"
        write_config(cfg)
        world = tmp_path / "world.json"
        grids = tmp_path / "grids.json"
        scen = tmp_path / "scen.json"
        trace = tmp_path / "trace.jsonl"
        metrics = tmp_path / "metrics.json"
        save_canonical({"duration_ticks": 30, "player_spawn": "d0",
                        "timeline": [{"tick": 0, "input": {"move": [1, 0]}}]},
                       str(scen))
        run_cli(["generate", "--config", str(cfg), "--seed", "3",
                 "--out", str(world)])
        run_cli(["voxelize", "--world", str(world), "--out", str(grids),
                 "--layers", "4"])
        proc = run_cli(["simulate", "--world", str(world), "--grids", str(grids),
                        "--scenario", str(scen), "--trace", str(trace),
                        "--metrics", str(metrics), "--audit"])
        doc = json.loads(proc.stdout)
        assert doc["ticks"] == 30
        assert doc["violations"]["camera_clip"] == 0
        assert json.loads(metrics.read_text()) == doc
        assert len(trace.read_text().splitlines()) == 30

    @pytest.mark.parametrize("name", ["world_tworoom", "world_chain8", "world_ring"])
    def test_shipped_configs_generate(self, name):
        from dungeonworld.worldgen import WorldConfig, generate_world
        doc = load_json(os.path.join(REPO, "configs", f"{name}.json"))
        world = generate_world(WorldConfig.from_json(doc, seed=7))
        assert len(world.dungeons) == len(doc["dungeons"])
        assert len(world.connectors) == len(doc["connections"])

    def test_shipped_scenario_parses(self):
        from dungeonworld.simharness import Scenario
        doc = load_json(os.path.join(REPO, "configs", "scenario_walk.json"))
        scen = Scenario.from_json(doc)
        assert scen.duration_ticks > 0 and scen.agents
