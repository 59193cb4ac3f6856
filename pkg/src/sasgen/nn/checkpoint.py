"""Network checkpoints as ``.npz`` archives with a JSON header."""
from __future__ import annotations

import json

import numpy as np

from .network import Network

FORMAT = "sasgen.network"
VERSION = 1


def pack_network(net: Network, prefix: str = "") -> dict:
    state = net.state()
    header = {"format": FORMAT, "version": VERSION, "input_shape": state["input_shape"],
              "seed": state["seed"], "layers": state["layers"]}
    arrays = {f"{prefix}header": np.array(json.dumps(header))}
    for i, (p, b) in enumerate(zip(state["params"], state["buffers"])):
        for k, v in p.items():
            arrays[f"{prefix}param/{i}/{k}"] = v
        for k, v in b.items():
            arrays[f"{prefix}buffer/{i}/{k}"] = v
    return arrays


def unpack_network(arrays, prefix: str = "") -> Network:
    header = json.loads(str(arrays[f"{prefix}header"]))
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint header {header.get('format')!r} "
                         f"v{header.get('version')}")
    n = len(header["layers"])
    params = [{} for _ in range(n)]
    buffers = [{} for _ in range(n)]
    for key in arrays.keys():
        if not key.startswith(prefix):
            continue
        parts = key[len(prefix):].split("/")
        if parts[0] == "param":
            params[int(parts[1])][parts[2]] = arrays[key]
        elif parts[0] == "buffer":
            buffers[int(parts[1])][parts[2]] = arrays[key]
    return Network.from_state({"input_shape": header["input_shape"], "seed": header["seed"],
                               "layers": header["layers"], "params": params, "buffers": buffers})


def save_network(net: Network, path) -> None:
    np.savez(path, **pack_network(net))


def load_network(path) -> Network:
    with np.load(path) as data:
        return unpack_network(data)
