"""Binary checkpoints for any collection of parameter stores.

Layout (little-endian throughout): magic ``SWM1``, a u32-length-prefixed
UTF-8 config-hash string, a u32 entry count, then per entry a length-prefixed
name plus u32 rows/cols, and finally the raw float64 parameter data in
manifest order. Stores are saved under ``<store>.<param>`` names so a single
file can hold the model, both trackers, and both policy heads.
"""

from __future__ import annotations

import struct

import numpy as np

from .exceptions import ContractViolation
from .numerics.params import ParameterStore

__all__ = ["save_checkpoint", "load_checkpoint", "read_checkpoint_hash"]

MAGIC = b"SWM1"


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf-8")


def save_checkpoint(path, stores: dict[str, ParameterStore], config_hash: str = "") -> None:
    manifest = []
    for store_name, store in stores.items():
        for pname, p in store.items():
            manifest.append((f"{store_name}.{pname}", p.value))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_pack_str(config_hash))
        fh.write(struct.pack("<I", len(manifest)))
        for name, value in manifest:
            r, c = value.shape
            fh.write(_pack_str(name) + struct.pack("<II", r, c))
        for _, value in manifest:
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def read_checkpoint_hash(path) -> str:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ContractViolation(f"{path}: not a SWM1 checkpoint")
        return _read_str(fh)


def load_checkpoint(path, stores: dict[str, ParameterStore]) -> str:
    """Fill the given stores in place; returns the embedded config hash.

    Every manifest entry must match an existing parameter of the same
    shape; extra or missing parameters are contract violations so silent
    architecture mismatches cannot load.
    """
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ContractViolation(f"{path}: not a SWM1 checkpoint")
        cfg_hash = _read_str(fh)
        (count,) = struct.unpack("<I", fh.read(4))
        manifest = []
        for _ in range(count):
            name = _read_str(fh)
            r, c = struct.unpack("<II", fh.read(8))
            manifest.append((name, r, c))
        expected = {
            f"{sn}.{pn}": p.value for sn, store in stores.items() for pn, p in store.items()
        }
        if {m[0] for m in manifest} != set(expected):
            raise ContractViolation(f"{path}: parameter manifest does not match the build")
        for name, r, c in manifest:
            target = expected[name]
            if target.shape != (r, c):
                raise ContractViolation(
                    f"{path}: {name} has shape {(r, c)}, expected {target.shape}"
                )
            data = np.frombuffer(fh.read(8 * r * c), dtype="<f8").reshape(r, c)
            target[:] = data
    return cfg_hash
