"""File formats and deterministic randomness plumbing.

All structured artifacts are JSON (diff-able); bulk floats are flat
little-endian float32 binaries sitting next to a JSON manifest of the same
stem. Every manifest embeds the hash of the run configuration that produced
it. Randomness everywhere derives from a single root seed through named
substreams so that no code path touches ambient entropy.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nets import ArchSpec, NetworkParameters, SetInput, TrainingSample

FLOAT_FMT = "%.9g"


def seed_for(root_seed: int, *keys) -> np.random.SeedSequence:
    """Named substream: stable across runs, platforms and worker schedules."""
    blob = repr(keys).encode()
    digest = hashlib.sha256(blob).digest()
    words = tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=words)


def rng_for(root_seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(seed_for(root_seed, *keys))


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path) -> dict:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(stem, params: NetworkParameters, *, role: str, team: str | None,
                    iteration: int, seed: int, config_hash: str,
                    parents: dict | None = None, datasets: list | None = None) -> Path:
    """Write <stem>.json manifest plus <stem>.bin flat float32 parameters."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    raw = params.theta.astype("<f4")
    stem.with_suffix(".bin").write_bytes(raw.tobytes())
    manifest = {
        "kind": "checkpoint",
        "role": role,
        "team": team,
        "iteration": iteration,
        "seed": seed,
        "out_dim": params.arch.out_dim,
        "arch": params.arch.to_json(),
        "param_count": params.arch.param_count,
        "param_dtype": "float32_le",
        "config_hash": config_hash,
        "parents": parents or {},
        "datasets": datasets or [],
    }
    _write_json(stem.with_suffix(".json"), manifest)
    return stem.with_suffix(".json")


def load_checkpoint(path) -> tuple[NetworkParameters, dict]:
    path = Path(path)
    if path.suffix != ".json":
        path = path.with_suffix(".json")
    manifest = _read_json(path)
    if manifest.get("kind") != "checkpoint":
        raise ValueError(f"{path} is not a checkpoint manifest")
    arch = ArchSpec.from_json(manifest["arch"])
    raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f4")
    if raw.shape[0] != manifest["param_count"] or raw.shape[0] != arch.param_count:
        raise ValueError(f"{path}: parameter count does not match the architecture")
    return NetworkParameters(arch, raw.astype(np.float64)), manifest


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------
# Record layout (all float32): [n_a, n_b, self features..., set_a rows...,
# set_b rows..., count?, target...]. Set sizes vary per record, so the two
# leading counts make the stream self-describing given the manifest dims.

def save_dataset(stem, samples: list[TrainingSample], arch: ArchSpec, *,
                 kind: str, team: str | None, iteration: int, seed: int,
                 config_hash: str, source: dict | None = None) -> Path:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    chunks = []
    for s in samples:
        head = [float(s.input.set_a.shape[0]), float(s.input.set_b.shape[0])]
        fields = [np.asarray(head)]
        if arch.self_dim:
            fields.append(np.asarray(s.input.self_features, float))
        fields.append(np.asarray(s.input.set_a, float).ravel())
        fields.append(np.asarray(s.input.set_b, float).ravel())
        if arch.has_count:
            fields.append(np.asarray([s.input.count or 0.0]))
        fields.append(np.asarray(s.target, float).ravel())
        chunks.append(np.concatenate(fields))
    flat = (np.concatenate(chunks) if chunks else np.zeros(0)).astype("<f4")
    stem.with_suffix(".bin").write_bytes(flat.tobytes())
    manifest = {
        "kind": kind,
        "sample_count": len(samples),
        "team": team,
        "iteration": iteration,
        "seed": seed,
        "arch": arch.to_json(),
        "record_layout": "[n_a, n_b, self..., set_a..., set_b..., count?, target...]",
        "config_hash": config_hash,
        "source": source or {},
    }
    _write_json(stem.with_suffix(".json"), manifest)
    return stem.with_suffix(".json")


def load_dataset(path) -> tuple[list[TrainingSample], dict]:
    path = Path(path)
    if path.suffix != ".json":
        path = path.with_suffix(".json")
    manifest = _read_json(path)
    arch = ArchSpec.from_json(manifest["arch"])
    flat = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f4").astype(float)
    samples = []
    off = 0
    for _ in range(manifest["sample_count"]):
        na, nb = int(flat[off]), int(flat[off + 1])
        off += 2
        self_f = None
        if arch.self_dim:
            self_f = flat[off:off + arch.self_dim]
            off += arch.self_dim
        set_a = flat[off:off + na * arch.set_dim].reshape(na, arch.set_dim)
        off += na * arch.set_dim
        set_b = flat[off:off + nb * arch.set_dim].reshape(nb, arch.set_dim)
        off += nb * arch.set_dim
        count = None
        if arch.has_count:
            count = float(flat[off])
            off += 1
        target = flat[off:off + arch.out_dim].copy()
        off += arch.out_dim
        samples.append(TrainingSample(SetInput(self_f, set_a, set_b, count), target))
    if off != flat.shape[0]:
        raise ValueError(f"{path}: trailing bytes in dataset binary")
    return samples, manifest


# ---------------------------------------------------------------------------
# lineage, losses, trajectories
# ---------------------------------------------------------------------------

def save_lineage(path, *, seed: int, config_hash: str, iterations: list) -> Path:
    path = Path(path)
    _write_json(path, {"kind": "lineage", "seed": seed,
                       "config_hash": config_hash, "iterations": iterations})
    return path


def load_lineage(path) -> dict:
    manifest = _read_json(Path(path))
    if manifest.get("kind") != "lineage":
        raise ValueError(f"{path} is not a lineage manifest")
    return manifest


def save_loss_trace(path, trace) -> Path:
    path = Path(path)
    lines = ["epoch,train_loss"]
    lines += [f"{i},{FLOAT_FMT % loss}" for i, loss in enumerate(trace)]
    path.write_text("\n".join(lines) + "\n")
    return path


class TrajectoryWriter:
    """JSON-lines trajectory: one header line, then one line per timestep."""

    def __init__(self, path, header: dict):
        self.path = Path(path)
        self._fh = self.path.open("w")
        self._fh.write(json.dumps({"kind": "trajectory", **header},
                                  sort_keys=True) + "\n")

    def write_step(self, t: int, state, action, events) -> None:
        line = {
            "t": t,
            "states": np.asarray(state.vectors).tolist(),
            "active": np.asarray(state.active).astype(int).tolist(),
            "action": np.asarray(action).tolist(),
            "events": {"reached": list(events.reached),
                       "tagged": list(events.tagged),
                       "violated": list(events.violated),
                       "terminal": events.terminal},
        }
        self._fh.write(json.dumps(line, sort_keys=True) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
