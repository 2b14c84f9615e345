"""Versioned binary checkpoints for the spiking denoiser.

Layout (little-endian):
    magic "DTSN0001"
    u32 header length, then UTF-8 JSON architecture descriptor
    per weight tensor, in the descriptor's order:
        u32 name length, name bytes, u8 ndim, u32 dims..., float32 data
"""

import json
import struct

import numpy as np
import torch

from .lif import LifParams
from .network import DTSNN

MAGIC = b"DTSN0001"


class CheckpointError(ValueError):
    pass


def save_checkpoint(net: DTSNN, path):
    state = net.state_dict()
    descriptor = {
        "in_channels": net.in_channels,
        "mode": net.mode,
        "fixed_threshold": net.fixed_threshold,
        "alpha": net.alpha,
        "lif": {"tau": net.lif.tau, "v_reset": net.lif.v_reset,
                "v_th_fixed": net.lif.v_th_fixed},
        "tensors": list(state.keys()),
    }
    header = json.dumps(descriptor).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for name in descriptor["tensors"]:
            arr = state[name].detach().numpy().astype("<f4")
            nb = name.encode()
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise CheckpointError(f"{path}: not a DTSN0001 checkpoint")
        (hlen,) = struct.unpack("<I", f.read(4))
        descriptor = json.loads(f.read(hlen).decode())
        lif = LifParams(**descriptor["lif"])
        net = DTSNN(in_channels=descriptor["in_channels"], lif=lif,
                    alpha=descriptor["alpha"], mode=descriptor["mode"],
                    fixed_threshold=descriptor["fixed_threshold"])
        state = {}
        for expected in descriptor["tensors"]:
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode()
            if name != expected:
                raise CheckpointError(f"{path}: tensor order mismatch "
                                      f"({name!r} != {expected!r})")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            data = np.frombuffer(f.read(4 * int(np.prod(shape))), dtype="<f4")
            if data.size != int(np.prod(shape)):
                raise CheckpointError(f"{path}: truncated tensor {name!r}")
            state[name] = torch.from_numpy(data.reshape(shape).copy())
    net.load_state_dict(state)
    return net
