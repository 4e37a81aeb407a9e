"""Emit reference vectors for the scenario RNG streams.

The scenario generator keys a Philox4x64 counter-based generator with
(seed, stream_id).  This script freezes the first raw 64-bit outputs and
uniforms of a few streams so any reimplementation can check its keying
against the shipped fixture.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "philox_reference.json"


def stream_vectors(seed: int, stream_id: int) -> dict:
    key = np.array([seed, stream_id], dtype=np.uint64)
    bits = np.random.Philox(key=key)
    raw = [int(x) for x in np.random.Generator(bits).integers(0, 2**64, size=8, dtype=np.uint64)]
    key = np.array([seed, stream_id], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    uniforms = [float(x) for x in gen.random(size=4)]
    key = np.array([seed, stream_id], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    normals = [float(x) for x in gen.standard_normal(size=4)]
    return {
        "seed": seed,
        "stream": stream_id,
        "raw_uint64": raw,
        "uniform01": uniforms,
        "standard_normal": normals,
    }


def main() -> None:
    entries = [
        stream_vectors(0, 0),
        stream_vectors(0, 1),
        stream_vectors(12345, 0),
        stream_vectors(12345, 3),
        stream_vectors(2**63, 7),
    ]
    payload = {
        "generator": "numpy.random.Philox (Philox4x64-10), key=[seed, stream_id] as uint64",
        "note": "raw outputs via Generator.integers(0, 2**64, dtype=uint64); "
        "uniform01 via Generator.random; normals via Generator.standard_normal "
        "(each from a fresh generator)",
        "numpy_version": np.__version__,
        "streams": entries,
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
