"""Checkpoint files: a structured-text header plus raw float32 payloads.

Layout
------
line 1   ``CHANDIFF-CKPT v1 <header_bytes>\n`` (ascii)
then     a JSON header with the model shape, a config echo, free-form
         metadata, and an array directory (name, shape, byte offset,
         crc32 per array, all offsets relative to the payload start)
then     the arrays, concatenated as little-endian float32

Loading verifies the magic, version, payload length, and every array
checksum, so a single flipped payload byte fails with an array-level
error.  Save -> load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import zlib

import numpy as np

from . import nn
from .diffusion import DenoiserNet, DiffusionModel, make_schedule
from .e2e import AutoencoderPair
from .errors import CheckpointError

_MAGIC = b"CHANDIFF-CKPT v1 "
VERSION = 1


def save_checkpoint(path, kind, model_info, arrays, config=None, meta=None):
    """Write named float32 arrays with a config echo to `path`."""
    names = sorted(arrays)
    directory = []
    blobs = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(arrays[name], dtype="<f4")
        raw = arr.tobytes()
        directory.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "offset": offset,
                "crc32": zlib.crc32(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    header = {
        "version": VERSION,
        "kind": kind,
        "model": model_info,
        "config": config or {},
        "meta": meta or {},
        "payload_bytes": offset,
        "arrays": directory,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC + str(len(head)).encode("ascii") + b"\n")
        fh.write(head)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path):
    """Read and fully verify a checkpoint; returns (header, arrays)."""
    with open(path, "rb") as fh:
        first = fh.readline()
        if not first.startswith(_MAGIC):
            raise CheckpointError(f"{path}: not a checkpoint file")
        try:
            head_len = int(first[len(_MAGIC) :].strip())
        except ValueError:
            raise CheckpointError(f"{path}: malformed header length") from None
        head = fh.read(head_len)
        if len(head) != head_len:
            raise CheckpointError(f"{path}: truncated header")
        try:
            header = json.loads(head.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable header: {exc}") from None
        if header.get("version") != VERSION:
            raise CheckpointError(f"{path}: unsupported version {header.get('version')!r}")
        payload = fh.read()
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, header says {header['payload_bytes']}"
        )
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        nbytes = 4 * int(np.prod(shape, dtype=np.int64)) if shape else 4
        raw = payload[entry["offset"] : entry["offset"] + nbytes]
        if len(raw) != nbytes:
            raise CheckpointError(f"{path}: array {entry['name']!r} extends past payload")
        if zlib.crc32(raw) != entry["crc32"]:
            raise CheckpointError(f"{path}: array {entry['name']!r} checksum mismatch")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f4").reshape(shape)
    return header, arrays


def _inject(params, arrays, path):
    for name, p in params.items():
        if name not in arrays:
            raise CheckpointError(f"{path}: missing array {name!r}")
        arr = arrays[name]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"{path}: array {name!r} has shape {arr.shape}, expected {p.data.shape}"
            )
        p.data = arr.astype(p.data.dtype)


# -- diffusion-model checkpoints ---------------------------------------------------


def save_dm(path, dm, config=None, meta=None):
    model_info = {
        "n": dm.net.n,
        "T": dm.net.T,
        "n_hidden": dm.net.n_hidden,
        "mode": dm.mode,
        "schedule": {
            "kind": dm.sched.kind,
            "beta": float(dm.sched.beta[0]) if dm.sched.kind == "constant" else None,
            "variance": dm.sched.variance,
        },
    }
    arrays = {k: p.data for k, p in dm.net.named_params().items()}
    save_checkpoint(path, "dm", model_info, arrays, config=config, meta=meta)


def load_dm(path):
    header, arrays = load_checkpoint(path)
    if header["kind"] != "dm":
        raise CheckpointError(f"{path}: expected a dm checkpoint, found {header['kind']!r}")
    info = header["model"]
    sk = info["schedule"]
    kw = {"variance": sk.get("variance", "posterior")}
    if sk["kind"] == "constant":
        kw["beta"] = sk["beta"]
    sched = make_schedule(sk["kind"], info["T"], **kw)
    net = DenoiserNet(info["n"], info["T"], info["n_hidden"], nn.Rng(0).stream("init"))
    _inject(net.named_params(), arrays, path)
    return DiffusionModel(net=net, sched=sched, mode=info["mode"]), header


# -- autoencoder checkpoints ----------------------------------------------------------


def save_ae(path, pair, config=None, meta=None):
    model_info = {"m_count": pair.m_count, "n": pair.n}
    arrays = {k: p.data for k, p in pair.named_params().items()}
    save_checkpoint(path, "ae", model_info, arrays, config=config, meta=meta)


def load_ae(path):
    header, arrays = load_checkpoint(path)
    if header["kind"] != "ae":
        raise CheckpointError(f"{path}: expected an ae checkpoint, found {header['kind']!r}")
    info = header["model"]
    pair = AutoencoderPair(info["m_count"], info["n"], nn.Rng(0).stream("init"))
    _inject(pair.named_params(), arrays, path)
    return pair, header
