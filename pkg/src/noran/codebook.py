"""CSI-keyed NORAN codebook shared by transmitter and receiver.

The legitimate channel ``H`` is quantized on a square grid of step
``delta`` and hashed (FNV-1a-64) into a lookup key. Each entry stores the
optimized power split, the precoder, and a seed for the NORAN sample
stream, so Bob can regenerate exactly what Alice injected and subtract it.

File format (JSON, reals as ``float.hex`` strings for bit-exact round trips)::

    {"version": 1, "delta": hex, "p_budget": hex, "sigma_n2": hex,
     "sigma_e2_assumed": hex,
     "entries": [{"key64": "<uint64>", "quantized": [[re, im], ...],
                  "sigma_u2": hex, "sigma_k2": hex, "noise_seed": "<uint64>",
                  "precoder": [[re_hex, im_hex], ...]}, ...]}

An optional ``key_bits`` (default 64) truncates keys; it exists so tests can
force hash collisions.
"""

import json
import math
import struct
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from noran.channel import Precoder, as_matrix, effective_gain, select_precoder
from noran.errors import (
    CodebookCollisionError,
    CodebookFormatError,
    UnsupportedVersionError,
)
from noran.optimizer import CcpConfig, DcObjective, ccp_solve
from noran.rng import RngStream, splitmix64

__all__ = [
    "FORMAT_VERSION",
    "CODEBOOK_SCHEMA",
    "CsiKey",
    "CodebookEntry",
    "Codebook",
    "fnv1a64",
    "quantize",
    "derive_key",
    "build_codebook",
    "lookup",
    "noran_symbols",
    "cancel_noran",
    "cancel_noran_block",
    "save_codebook",
    "load_codebook",
    "dumps_codebook",
    "loads_codebook",
    "matrix_to_json",
    "matrix_from_json",
]

FORMAT_VERSION = 1
EVE_MODELS = ("expected", "genie")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1
INT64_RANGE = (-(1 << 63), (1 << 63) - 1)

_HEX = r"^-?0x[0-9a-f]+(\.[0-9a-f]+)?p[+-][0-9]+$"
_U64 = r"^[0-9]{1,20}$"

CODEBOOK_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "delta", "p_budget", "sigma_n2", "sigma_e2_assumed", "entries"],
    "additionalProperties": False,
    "properties": {
        "version": {"type": "integer"},
        "delta": {"type": "string", "pattern": _HEX},
        "p_budget": {"type": "string", "pattern": _HEX},
        "sigma_n2": {"type": "string", "pattern": _HEX},
        "sigma_e2_assumed": {"type": "string", "pattern": _HEX},
        "key_bits": {"type": "integer", "minimum": 1, "maximum": 64},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "key64", "quantized", "sigma_u2", "sigma_k2", "noise_seed", "precoder",
                ],
                "additionalProperties": False,
                "properties": {
                    "key64": {"type": "string", "pattern": _U64},
                    "quantized": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "array",
                            "items": {"type": "integer"},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    },
                    "sigma_u2": {"type": "string", "pattern": _HEX},
                    "sigma_k2": {"type": "string", "pattern": _HEX},
                    "noise_seed": {"type": "string", "pattern": _U64},
                    "precoder": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "array",
                            "items": {"type": "string", "pattern": _HEX},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    },
                },
            },
        },
    },
}


def fnv1a64(data):
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def quantize(h, delta):
    """Per-entry ``(round(Re/delta), round(Im/delta))``, halves away from zero."""
    h = as_matrix(h)
    if not (delta > 0 and math.isfinite(delta)):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")
    flat = h.reshape(-1)
    parts = np.stack([flat.real, flat.imag], axis=1) / delta
    q = np.sign(parts) * np.floor(np.abs(parts) + 0.5)
    if not np.all((q >= INT64_RANGE[0]) & (q <= INT64_RANGE[1])):
        raise ValueError("quantized CSI does not fit in int64; increase delta")
    return tuple((int(re), int(im)) for re, im in q)


def _key_bytes(n_rx, n_tx, delta, quantized):
    head = struct.pack("<QQd", n_rx, n_tx, delta)
    body = b"".join(struct.pack("<qq", re, im) for re, im in quantized)
    return head + body


@dataclass(frozen=True)
class CsiKey:
    key64: int
    quantized: tuple
    n_rx: int
    n_tx: int


def _make_key(n_rx, n_tx, delta, quantized, key_bits=64):
    digest = fnv1a64(_key_bytes(n_rx, n_tx, delta, quantized))
    if key_bits < 64:
        digest &= (1 << key_bits) - 1
    return CsiKey(digest, tuple(quantized), n_rx, n_tx)


def derive_key(h, delta, key_bits=64):
    """Quantize ``h`` and hash it into a :class:`CsiKey`."""
    h = as_matrix(h)
    return _make_key(h.shape[0], h.shape[1], float(delta), quantize(h, delta), key_bits)


@dataclass(frozen=True)
class CodebookEntry:
    key: CsiKey
    sigma_u2: float
    sigma_k2: float
    noise_seed: int
    precoder: Precoder

    @property
    def quantized_csi(self):
        return self.key.quantized


@dataclass
class Codebook:
    delta: float
    p_budget: float
    sigma_n2: float
    sigma_e2_assumed: float
    entries: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION
    key_bits: int = 64

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if not 1 <= self.key_bits <= 64:
            raise ValueError("key_bits must be in [1, 64]")

    def __len__(self):
        return len(self.entries)

    def insert(self, entry):
        """Add ``entry``; an existing entry for the same cell wins.

        Returns True when the entry was stored.
        """
        held = self.entries.get(entry.key.key64)
        if held is not None:
            if held.key.quantized == entry.key.quantized:
                return False
            raise CodebookCollisionError(
                f"key {entry.key.key64:#x} maps both quantized CSI {held.key.quantized} "
                f"and {entry.key.quantized}"
            )
        if entry.sigma_u2 + entry.sigma_k2 > self.p_budget + 1e-9:
            raise ValueError("entry exceeds the codebook power budget")
        self.entries[entry.key.key64] = entry
        return True

    def sorted_entries(self):
        return [self.entries[k] for k in sorted(self.entries)]


def build_codebook(
    realizations,
    delta,
    p_budget,
    cfg=None,
    master_seed=0,
    *,
    precoder_mode="max-gain",
    eve_model="expected",
    sigma_n2=None,
    sigma_e2_assumed=None,
    key_bits=64,
):
    """Optimize a NORAN design for each realization and key it by its CSI.

    ``eve_model="expected"`` plans against the Rayleigh average
    ``E||G p||^2 = n_eve`` since the transmitter cannot see Eve's channel;
    ``"genie"`` uses each realization's actual ``g``. Noise variances default
    to those of the first realization.
    """
    realizations = list(realizations)
    if not realizations:
        raise ValueError("cannot build a codebook from zero realizations")
    if eve_model not in EVE_MODELS:
        raise ValueError(f"unknown eve_model {eve_model!r}; expected one of {EVE_MODELS}")
    cfg = cfg or CcpConfig()
    first = realizations[0]
    cb = Codebook(
        delta=float(delta),
        p_budget=float(p_budget),
        sigma_n2=float(first.sigma_n2 if sigma_n2 is None else sigma_n2),
        sigma_e2_assumed=float(first.sigma_e2 if sigma_e2_assumed is None else sigma_e2_assumed),
        key_bits=key_bits,
    )
    for ch in realizations:
        key = derive_key(ch.h, cb.delta, key_bits)
        held = cb.entries.get(key.key64)
        if held is not None and held.key.quantized == key.quantized:
            continue
        noise_seed = splitmix64((int(master_seed) ^ key.key64) & MASK64)
        p = select_precoder(ch.h, precoder_mode, RngStream.derive(noise_seed, 1))
        gain_g = effective_gain(ch.g, p) if eve_model == "genie" else float(ch.n_eve)
        dc = DcObjective(
            a=gain_g,
            b=effective_gain(ch.h, p),
            sigma_n2=cb.sigma_n2,
            sigma_e2=cb.sigma_e2_assumed,
            p_budget=cb.p_budget,
        )
        alloc = ccp_solve(dc, cfg).alloc
        cb.insert(CodebookEntry(key, alloc.sigma_u2, alloc.sigma_k2, noise_seed, p))
    return cb


def lookup(cb, h):
    """The entry for ``h``'s quantization cell, or None on a miss.

    A hit needs both the hash and the full quantized CSI to match, so a
    hash collision can never return another cell's design.
    """
    h = as_matrix(h)
    key = derive_key(h, cb.delta, cb.key_bits)
    entry = cb.entries.get(key.key64)
    if entry is None or entry.key.quantized != key.quantized:
        return None
    if (entry.key.n_rx, entry.key.n_tx) != h.shape:
        return None
    return entry


def noran_symbols(entry, start, count):
    """NORAN scalars ``t_start .. t_{start+count-1}`` from the entry's seed."""
    rng = RngStream(entry.noise_seed)
    rng.skip_complex(start)
    return math.sqrt(entry.sigma_k2) * rng.complex_normal(count)


def cancel_noran(z, h, entry, symbol_index):
    """Subtract the regenerated NORAN ``H p t`` from one received vector."""
    h = as_matrix(h)
    t = noran_symbols(entry, symbol_index, 1)[0]
    return np.asarray(z, dtype=np.complex128) - h @ (entry.precoder.p * t)


def cancel_noran_block(z, h, entry, start=0):
    """Block form of :func:`cancel_noran`; ``z`` is ``(n_sym, n_rx)``."""
    h = as_matrix(h)
    z = np.asarray(z, dtype=np.complex128)
    t = noran_symbols(entry, start, z.shape[0])
    return z - np.outer(t, entry.precoder.p) @ h.T


def _hex(x):
    return float(x).hex()


def _unhex(s):
    return float.fromhex(s)


def matrix_to_json(m):
    """Complex matrix as nested ``[[re_hex, im_hex], ...]`` rows."""
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim == 1:
        return [[_hex(v.real), _hex(v.imag)] for v in m]
    return [[[_hex(v.real), _hex(v.imag)] for v in row] for row in m]


def _parse_real(v):
    if isinstance(v, str):
        return _unhex(v)
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise ValueError(f"not a real number: {v!r}")


def matrix_from_json(rows):
    """Inverse of :func:`matrix_to_json`; plain numbers are accepted too."""
    try:
        return np.array(
            [[complex(_parse_real(re), _parse_real(im)) for re, im in row] for row in rows],
            dtype=np.complex128,
        )
    except (TypeError, ValueError) as exc:
        raise ValueError(f"malformed complex matrix: {exc}") from None


def _to_document(cb):
    doc = {
        "version": cb.version,
        "delta": _hex(cb.delta),
        "p_budget": _hex(cb.p_budget),
        "sigma_n2": _hex(cb.sigma_n2),
        "sigma_e2_assumed": _hex(cb.sigma_e2_assumed),
    }
    if cb.key_bits != 64:
        doc["key_bits"] = cb.key_bits
    doc["entries"] = [
        {
            "key64": str(e.key.key64),
            "quantized": [list(pair) for pair in e.key.quantized],
            "sigma_u2": _hex(e.sigma_u2),
            "sigma_k2": _hex(e.sigma_k2),
            "noise_seed": str(e.noise_seed),
            "precoder": matrix_to_json(e.precoder.p),
        }
        for e in cb.sorted_entries()
    ]
    return doc


def dumps_codebook(cb):
    return json.dumps(_to_document(cb), indent=1) + "\n"


def _from_document(doc):
    if isinstance(doc, dict) and "version" in doc and doc["version"] != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"codebook format version {doc['version']!r} is not supported "
            f"(expected {FORMAT_VERSION})"
        )
    validator = jsonschema.Draft202012Validator(CODEBOOK_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        where = "/".join(str(p) for p in errors[0].absolute_path) or "<root>"
        raise CodebookFormatError(f"schema violation at {where}: {errors[0].message}")
    try:
        cb = Codebook(
            delta=_unhex(doc["delta"]),
            p_budget=_unhex(doc["p_budget"]),
            sigma_n2=_unhex(doc["sigma_n2"]),
            sigma_e2_assumed=_unhex(doc["sigma_e2_assumed"]),
            version=doc["version"],
            key_bits=doc.get("key_bits", 64),
        )
        for i, raw in enumerate(doc["entries"]):
            p = Precoder(matrix_from_json([raw["precoder"]])[0])
            quantized = tuple((int(re), int(im)) for re, im in raw["quantized"])
            n_tx = len(p)
            if len(quantized) % n_tx:
                raise ValueError(f"entry {i}: quantized CSI length does not match precoder")
            key = _make_key(len(quantized) // n_tx, n_tx, cb.delta, quantized, cb.key_bits)
            if key.key64 != int(raw["key64"]):
                raise ValueError(f"entry {i}: key64 does not match its quantized CSI")
            seed = int(raw["noise_seed"])
            if seed > MASK64:
                raise ValueError(f"entry {i}: noise_seed exceeds 64 bits")
            cb.insert(CodebookEntry(key, _unhex(raw["sigma_u2"]), _unhex(raw["sigma_k2"]), seed, p))
    except (ValueError, CodebookCollisionError, struct.error) as exc:
        raise CodebookFormatError(str(exc)) from None
    return cb


def loads_codebook(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodebookFormatError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    return _from_document(doc)


def save_codebook(cb, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_codebook(cb))


def load_codebook(path):
    with open(path, encoding="utf-8") as fh:
        return loads_codebook(fh.read())
