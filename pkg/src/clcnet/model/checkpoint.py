"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"CLCNETCK"                      magic, 8 bytes
    uint32   format version (1)
    uint64   header length in bytes
    header   UTF-8 text, one ``key = value`` per line
    payload  float64 little-endian arrays, concatenated in header order

Header keys: ``config.<field>`` for every TrainConfig field, ``step``,
``best_val_loss``, ``best_step``, ``rng.*`` (PCG64 state of the data
sampler), and ``array.<name> = d0,d1,...`` giving each array's shape in
payload order: W0, b0, ..., gamma, then ``adam_m.*`` and ``adam_v.*`` for
the same list.
"""

from __future__ import annotations

import ast
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError
from .config import TrainConfig
from .network import ModelParams
from .optim import AdamState

MAGIC = b"CLCNETCK"
VERSION = 1


@dataclass
class Checkpoint:
    config: TrainConfig
    params: ModelParams
    adam: AdamState
    step: int = 0
    rng_state: dict | None = None
    best_val_loss: float = float("inf")
    best_step: int = -1

    def to_bytes(self) -> bytes:
        lines = [f"config.{k} = {_fmt(v)}" for k, v in self.config.to_dict().items()]
        lines += [f"step = {self.step}", f"best_val_loss = {self.best_val_loss!r}",
                  f"best_step = {self.best_step}"]
        if self.rng_state is not None:
            st = self.rng_state
            lines += [f"rng.bit_generator = {st['bit_generator']}",
                      f"rng.state = {st['state']['state']}",
                      f"rng.inc = {st['state']['inc']}",
                      f"rng.has_uint32 = {st['has_uint32']}",
                      f"rng.uinteger = {st['uinteger']}"]
        arrays = self._arrays()
        for name, a in arrays:
            lines.append(f"array.{name} = {','.join(str(d) for d in a.shape)}")
        header = ("\n".join(lines) + "\n").encode("utf-8")
        payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
        return MAGIC + struct.pack("<IQ", VERSION, len(header)) + header + payload

    def _arrays(self):
        named = self.params.arrays()
        out = list(named)
        out += [(f"adam_m.{n}", m) for (n, _), m in zip(named, self.adam.m)]
        out += [(f"adam_v.{n}", v) for (n, _), v in zip(named, self.adam.v)]
        return out

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if blob[:8] != MAGIC:
            raise DataError("not a clcnet checkpoint (bad magic)")
        version, hlen = struct.unpack("<IQ", blob[8:20])
        if version != VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        header = blob[20 : 20 + hlen].decode("utf-8")
        kv = {}
        for line in header.splitlines():
            key, _, value = line.partition(" = ")
            kv[key] = value
        cfg = TrainConfig.from_dict({k[7:]: ast.literal_eval(v) for k, v in kv.items()
                                     if k.startswith("config.")})
        offset = 20 + hlen
        arrays = {}
        for key, value in kv.items():
            if not key.startswith("array."):
                continue
            shape = tuple(int(d) for d in value.split(",") if d)
            count = int(np.prod(shape)) if shape else 1
            arrays[key[6:]] = np.frombuffer(blob, "<f8", count, offset).reshape(shape).copy()
            offset += 8 * count
        if offset != len(blob):
            raise DataError("checkpoint payload size does not match its header")
        n_layers = sum(1 for k in arrays if k.startswith("W"))
        names = [f"{p}{i}" for i in range(n_layers) for p in ("W", "b")] + ["gamma"]
        params = ModelParams([arrays[f"W{i}"] for i in range(n_layers)],
                             [arrays[f"b{i}"] for i in range(n_layers)], arrays["gamma"])
        adam = AdamState([arrays[f"adam_m.{n}"] for n in names],
                         [arrays[f"adam_v.{n}"] for n in names], int(kv["step"]))
        rng_state = None
        if "rng.state" in kv:
            rng_state = {"bit_generator": kv["rng.bit_generator"],
                         "state": {"state": int(kv["rng.state"]), "inc": int(kv["rng.inc"])},
                         "has_uint32": int(kv["rng.has_uint32"]),
                         "uinteger": int(kv["rng.uinteger"])}
        return cls(cfg, params, adam, int(kv["step"]), rng_state,
                   float(kv["best_val_loss"]), int(kv["best_step"]))

    @classmethod
    def load(cls, path) -> "Checkpoint":
        try:
            blob = Path(path).read_bytes()
        except OSError as exc:
            raise DataError(f"{path}: cannot read checkpoint ({exc})") from exc
        return cls.from_bytes(blob)


def _fmt(v):
    return repr(v)
