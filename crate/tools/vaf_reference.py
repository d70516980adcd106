#!/usr/bin/env python3
"""Reference value-network inference for parity fixtures.

Independent of the Rust engine: weights and inputs are regenerated from the
seeded splitmix construction and pushed through torch in float64.

    python3 tools/vaf_reference.py crates/core/tests/fixtures

writes vaf_small.vaf1, vaf_small_parity.json and vaf_full_parity.json.
"""

import hashlib
import json
import math
import struct
import sys
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

GOLDEN = 0x9E3779B97F4A7C15
MASK = (1 << 64) - 1

SMALL = {"rows": 11, "full_cols": 11, "local_cols": 5}
CORRIDOR = {"rows": 43, "full_cols": 800, "local_cols": 121}
SMALL_SEED = 7
FULL_SEED = 20240611
INPUT_SEED = 99
VECTORS = 10


def mix(z):
    """splitmix64 finalizer on numpy uint64 arrays (wrapping)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hashes(seed, stream, n, start=0):
    base = mix(np.uint64((seed ^ (stream * GOLDEN)) & MASK))
    idx = np.arange(start, start + n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix(base + idx)


def scale_for(fan_in):
    # Ties (fan_in an odd power of two) round up.
    return 2.0 ** -math.floor(0.5 * math.log2(fan_in) + 0.5)


def uniform(seed, stream, n, scale):
    out = np.empty(n, dtype=np.float32)
    step = 1 << 22
    for s in range(0, n, step):
        h = hashes(seed, stream, min(step, n - s), s)
        v = (h >> np.uint64(40)).astype(np.int64) - (1 << 23)
        out[s : s + len(v)] = (v.astype(np.float64) * 2.0**-23 * scale).astype(np.float32)
    return out


def conv_out(n, k, s):
    return (n - k) // s + 1


def layers_for(shape):
    r, fw, lw = shape["rows"], shape["full_cols"], shape["local_cols"]
    fh1, fw1 = conv_out(r, 5, 3), conv_out(fw, 5, 3)
    fh2, fw2 = conv_out(fh1, 3, 2), conv_out(fw1, 3, 2)
    lh1, lw1 = conv_out(r, 3, 1), conv_out(lw, 3, 1)
    lh2, lw2 = conv_out(lh1, 3, 2), conv_out(lw1, 3, 2)

    def conv(name, i, o, k, s):
        return {"name": name, "kind": "conv", "in_channels": i, "out_channels": o, "kernel": [k, k], "stride": s}

    def fc(name, i, o):
        return {"name": name, "kind": "fc", "in_features": i, "out_features": o}

    return [
        conv("full_conv1", 3, 64, 5, 3),
        conv("full_conv2", 64, 128, 3, 2),
        fc("full_fc", 128 * fh2 * fw2, 512),
        fc("full_proj", 512, 256),
        conv("local_conv1", 3, 64, 3, 1),
        conv("local_conv2", 64, 128, 3, 2),
        fc("local_proj", 128 * lh2 * lw2, 128),
        fc("head_hidden", 384, 128),
        fc("head_out", 128, 1),
    ]


def weight_shape(layer):
    if layer["kind"] == "conv":
        k = layer["kernel"]
        return (layer["out_channels"], layer["in_channels"], k[0], k[1])
    return (layer["out_features"], layer["in_features"])


def synth_params(shape, seed):
    params = []
    for l, layer in enumerate(layers_for(shape)):
        ws = weight_shape(layer)
        n = int(np.prod(ws))
        scale = scale_for(n // ws[0])
        w = uniform(seed, 2 * l, n, scale).reshape(ws)
        b = uniform(seed, 2 * l + 1, ws[0], scale)
        params.append((w, b))
    return params


def synth_inputs(shape, seed, vector):
    def draw(stream, n):
        return ((hashes(seed, stream, n) >> np.uint64(62)).astype(np.float64) / 3.0).astype(np.float32)

    r = shape["rows"]
    full = draw(1000 + 2 * vector, 3 * r * shape["full_cols"])
    local = draw(1001 + 2 * vector, 3 * r * shape["local_cols"])
    return full, local


def payload(params):
    h = hashlib.sha256()
    chunks = []
    for w, b in params:
        for a in (w, b):
            raw = np.ascontiguousarray(a, dtype="<f4").tobytes()
            h.update(raw)
            chunks.append(raw)
    return chunks, h.hexdigest()


def forward(shape, params, full, local):
    t = lambda a: torch.from_numpy(np.asarray(a, dtype=np.float64))
    p = [(t(w), t(b)) for w, b in params]
    r = shape["rows"]
    x = t(full).reshape(1, 3, r, shape["full_cols"])
    x = F.relu(F.conv2d(x, *p[0], stride=3))
    x = F.relu(F.conv2d(x, *p[1], stride=2))
    x = F.relu(F.linear(x.flatten(), *p[2]))
    x = F.linear(x, *p[3])
    y = t(local).reshape(1, 3, r, shape["local_cols"])
    y = F.relu(F.conv2d(y, *p[4], stride=1))
    y = F.relu(F.conv2d(y, *p[5], stride=2))
    y = F.linear(y.flatten(), *p[6])
    z = F.relu(torch.cat([x, y]))
    z = F.relu(F.linear(z, *p[7]))
    return float(F.linear(z, *p[8])[0])


def write_vaf1(path, shape, params):
    chunks, digest = payload(params)
    header = {
        "version": 1,
        "input": shape,
        "layers": layers_for(shape),
        "payload_len": sum(len(c) for c in chunks),
        "payload_sha256": digest,
    }
    text = json.dumps(header, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(b"VAF1")
        f.write(struct.pack("<I", len(text)))
        f.write(text)
        for c in chunks:
            f.write(c)


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    # Small network: committed weight file and explicit input arrays.
    params = synth_params(SMALL, SMALL_SEED)
    write_vaf1(out / "vaf_small.vaf1", SMALL, params)
    vectors = []
    for v in range(VECTORS):
        full, local = synth_inputs(SMALL, INPUT_SEED, v)
        vectors.append({
            "full": [float(a) for a in full],
            "local": [float(a) for a in local],
            "output": forward(SMALL, params, full, local),
        })
    doc = {
        "format": "vaf-parity/1",
        "weights": {"file": "vaf_small.vaf1"},
        "input": SMALL,
        "tolerance": 1e-4,
        "vectors": vectors,
    }
    (out / "vaf_small_parity.json").write_text(json.dumps(doc, indent=1) + "\n")

    # Corridor network: too large to commit, so weights are regenerated from
    # the seed and pinned by their payload digest.
    params = synth_params(CORRIDOR, FULL_SEED)
    _, digest = payload(params)
    vectors = []
    for v in range(VECTORS):
        full, local = synth_inputs(CORRIDOR, INPUT_SEED, v)
        vectors.append({"input_seed": INPUT_SEED, "vector": v, "output": forward(CORRIDOR, params, full, local)})
    doc = {
        "format": "vaf-parity/1",
        "weights": {"synth_seed": FULL_SEED, "payload_sha256": digest},
        "input": CORRIDOR,
        "tolerance": 1e-4,
        "vectors": vectors,
    }
    (out / "vaf_full_parity.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(digest, [round(x["output"], 6) for x in vectors])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures")
