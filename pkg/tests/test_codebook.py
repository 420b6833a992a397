import json
import math
import struct

import jsonschema
import numpy as np
import pytest

from noran.channel import ChannelRealization, effective_gain, select_precoder, transmit_block
from noran.codebook import (
    CODEBOOK_SCHEMA,
    Codebook,
    build_codebook,
    cancel_noran,
    cancel_noran_block,
    derive_key,
    dumps_codebook,
    fnv1a64,
    load_codebook,
    loads_codebook,
    lookup,
    noran_symbols,
    save_codebook,
)
from noran.errors import CodebookCollisionError, CodebookFormatError, UnsupportedVersionError
from noran.optimizer import DcObjective, ccp_solve
from noran.rng import RngStream

from conftest import rayleigh


def ref_fnv(data):
    h = 14695981039346656037
    for b in data:
        h ^= b
        h = (h * 1099511628211) % 2**64
    return h


def realization(n_rx=2, n_tx=2, n_eve=2, seed=0, sn=0.1, se=0.1):
    return ChannelRealization(rayleigh(n_rx, n_tx, seed), rayleigh(n_eve, n_tx, seed + 10_000), sn, se)


def test_fnv_reference_vectors():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_zero_matrix_key():
    key = derive_key(np.zeros((1, 1)), 0.1)
    assert key.quantized == ((0, 0),)
    canonical = struct.pack("<QQd", 1, 1, 0.1) + struct.pack("<qq", 0, 0)
    assert key.key64 == ref_fnv(canonical)


def test_quantization_rounding():
    assert derive_key(np.array([[0.123 + 0.456j]]), 0.1).quantized == ((1, 5),)
    # exact halves go away from zero
    assert derive_key(np.array([[0.25 - 0.75j]]), 0.5).quantized == ((1, -2),)


def test_same_cell_same_key():
    h = np.array([[0.31 + 0.52j, -0.74 + 0.09j]])
    jitter = np.array([[0.01 - 0.01j, 0.02 + 0.01j]])
    assert derive_key(h, 0.1) == derive_key(h + jitter, 0.1)


def test_key_includes_shape_and_delta():
    z = np.zeros((1, 2))
    assert derive_key(z, 0.1).key64 != derive_key(z.T, 0.1).key64
    assert derive_key(z, 0.1).key64 != derive_key(z, 0.2).key64


def test_key_rejects_bad_input():
    with pytest.raises(ValueError):
        derive_key(np.array([[np.nan]]), 0.1)
    with pytest.raises(ValueError):
        derive_key(np.eye(2), 0.0)


def test_key_determinism():
    gen = np.random.default_rng(0)
    mats = [rayleigh(2, 2, int(s)) for s in gen.integers(0, 2**31, 200)]
    first = [derive_key(m, 0.1) for m in mats]
    for _ in range(100):
        assert [derive_key(m, 0.1) for m in mats] == first


def test_build_empty_rejected():
    with pytest.raises(ValueError):
        build_codebook([], 0.1, 1.0)


def test_single_realization_matches_ccp():
    ch = realization(seed=3)
    cb = build_codebook([ch], 0.1, 1.0, master_seed=9)
    assert len(cb) == 1
    (entry,) = cb.entries.values()
    p = select_precoder(ch.h)
    dc = DcObjective(float(ch.n_eve), effective_gain(ch.h, p), ch.sigma_n2, ch.sigma_e2, 1.0)
    assert entry.sigma_k2 == ccp_solve(dc).alloc.sigma_k2


def test_genie_model_uses_true_eve_gain():
    ch = realization(seed=4)
    cb = build_codebook([ch], 0.1, 1.0, eve_model="genie")
    (entry,) = cb.entries.values()
    dc = DcObjective(effective_gain(ch.g, entry.precoder), effective_gain(ch.h, entry.precoder),
                     ch.sigma_n2, ch.sigma_e2, 1.0)
    assert entry.sigma_k2 == ccp_solve(dc).alloc.sigma_k2


def test_build_many_draws():
    reals = [realization(seed=s) for s in range(1000)]
    cb = build_codebook(reals, 0.1, 1.0)
    keys = {derive_key(r.h, 0.1).key64 for r in reals}
    assert len(cb) == len(keys) <= 1000
    for e in cb.entries.values():
        assert e.sigma_u2 >= 0 and e.sigma_k2 >= 0
        assert e.sigma_u2 + e.sigma_k2 <= 1.0 + 1e-9


def test_duplicate_cell_keeps_first():
    a = realization(seed=5)
    b = ChannelRealization(a.h + 0.001, a.g * 3, a.sigma_n2, a.sigma_e2)
    cb = build_codebook([a, b], 0.1, 1.0, eve_model="genie")
    assert len(cb) == 1
    first = build_codebook([a], 0.1, 1.0, eve_model="genie")
    assert cb == first


def test_insertion_order_irrelevant_for_distinct_cells():
    reals = [realization(seed=s) for s in range(20)]
    fwd = build_codebook(reals, 0.1, 1.0, master_seed=3)
    rev = build_codebook(reals[::-1], 0.1, 1.0, master_seed=3)
    assert fwd == rev
    assert dumps_codebook(fwd) == dumps_codebook(rev)


def test_noise_seed_derivation():
    from noran.rng import splitmix64

    ch = realization(seed=6)
    cb = build_codebook([ch], 0.1, 1.0, master_seed=0xABCDEF)
    (entry,) = cb.entries.values()
    assert entry.noise_seed == splitmix64(0xABCDEF ^ entry.key.key64)


def test_lookup_round_trip_and_misses():
    reals = [realization(seed=s) for s in range(10)]
    cb = build_codebook(reals, 0.1, 1.0)
    for r in reals:
        hit = lookup(cb, r.h)
        assert hit is not None and hit.key == derive_key(r.h, 0.1)
    moved = reals[0].h.copy()
    moved[0, 0] += 0.15
    assert lookup(cb, moved) is None
    empty = Codebook(0.1, 1.0, 0.1, 0.1)
    assert lookup(empty, reals[0].h) is None


def _colliding_pair(key_bits=8):
    base = np.array([[0.0 + 0.0j]])
    k0 = derive_key(base, 1.0, key_bits)
    for re in range(1, 5000):
        other = np.array([[complex(re, 0)]])
        k1 = derive_key(other, 1.0, key_bits)
        if k1.key64 == k0.key64:
            return base, other
    raise AssertionError("no collision found")


def test_small_key_collision_is_detected_at_insert():
    h1, h2 = _colliding_pair()
    g = np.ones((1, 1))
    reals = [ChannelRealization(h1 + 1e-3, g, 1.0, 1.0), ChannelRealization(h2, g, 1.0, 1.0)]
    with pytest.raises(CodebookCollisionError):
        build_codebook(reals, 1.0, 1.0, key_bits=8)


def test_small_key_collision_never_returns_wrong_entry():
    h1, h2 = _colliding_pair()
    g = np.ones((1, 1))
    cb = build_codebook([ChannelRealization(h1 + 1e-3, g, 1.0, 1.0)], 1.0, 1.0, key_bits=8)
    assert derive_key(h2, 1.0, 8).key64 in cb.entries
    assert lookup(cb, h2) is None
    assert lookup(cb, h1) is not None


def test_noran_stream_is_addressable():
    ch = realization(seed=7)
    (entry,) = build_codebook([ch], 0.1, 1.0).entries.values()
    block = noran_symbols(entry, 0, 100)
    assert np.array_equal(noran_symbols(entry, 40, 60), block[40:])
    assert np.allclose(block, math.sqrt(entry.sigma_k2) * RngStream(entry.noise_seed).complex_normal(100))


def test_cancel_noiseless_recovers_signal():
    ch = realization(seed=8, sn=0.0, se=0.0)
    (entry,) = build_codebook([ch], 0.1, 1.0, sigma_n2=0.1, sigma_e2_assumed=0.1).entries.values()
    assert entry.sigma_k2 > 0
    s = 0.7 - 0.2j
    for i in (0, 5, 17):
        t = noran_symbols(entry, i, 1)[0]
        z = ch.h @ (entry.precoder.p * (s + t))
        out = cancel_noran(z, ch.h, entry, i)
        ref = ch.h @ (entry.precoder.p * s)
        assert np.linalg.norm(out - ref) <= 1e-12 * np.linalg.norm(ref)


def test_cancel_with_zero_noran_is_identity():
    ch = realization(seed=9)
    (entry,) = build_codebook([ch], 0.1, 1.0).entries.values()
    from dataclasses import replace

    silent = replace(entry, sigma_k2=0.0)
    z = np.array([1 + 2j, -0.5j])
    assert np.array_equal(cancel_noran(z, ch.h, silent, 3), z)


@pytest.mark.parametrize("n_rx", [1, 2, 4])
@pytest.mark.parametrize("n_tx", [1, 2, 4, 8])
def test_cancellation_exact_across_dimensions(n_rx, n_tx):
    ch = realization(n_rx, n_tx, 2, seed=n_rx * 10 + n_tx, sn=0.2, se=0.2)
    (entry,) = build_codebook([ch], 0.1, 1.0, eve_model="genie").entries.values()
    n = 500
    s = np.sqrt(entry.sigma_u2) * (1 - 2 * RngStream(1).bits(n).astype(float))
    t = noran_symbols(entry, 0, n)
    z, _ = transmit_block(ch, entry.precoder, s, t, RngStream(2))
    z_ref, _ = transmit_block(ch, entry.precoder, s, np.zeros(n), RngStream(2))
    out = cancel_noran_block(z, ch.h, entry)
    noran_power = np.sum(np.abs(np.outer(t, ch.h @ entry.precoder.p)) ** 2)
    if noran_power > 0:
        assert np.sum(np.abs(out - z_ref) ** 2) <= 1e-12 * noran_power


def test_measured_rate_proxy_improves_after_cancellation():
    """Interference power measured in the samples, before vs after cancelling."""
    n = 2000
    for seed in range(30):
        ch = realization(seed=100 + seed, sn=0.3, se=0.3)
        (entry,) = build_codebook([ch], 0.1, 1.0, eve_model="genie").entries.values()
        if entry.sigma_k2 == 0:
            continue
        hp = ch.h @ entry.precoder.p
        gain = np.vdot(hp, hp).real
        s = np.sqrt(entry.sigma_u2) * np.ones(n)
        t = noran_symbols(entry, 0, n)
        z, _ = transmit_block(ch, entry.precoder, s, t, RngStream(seed))
        z_clean, _ = transmit_block(ch, entry.precoder, s, np.zeros(n), RngStream(seed))
        before = np.mean(np.abs(z - z_clean) ** 2) / gain
        after = np.mean(np.abs(cancel_noran_block(z, ch.h, entry) - z_clean) ** 2) / gain
        rate = lambda k: math.log2(1 + gain * entry.sigma_u2 / (gain * k + ch.sigma_n2))  # noqa: E731
        assert rate(after) >= rate(before)
        assert after <= 1e-12 * before


def _three_entry_codebook():
    reals = [realization(seed=s) for s in (11, 12, 13)]
    return build_codebook(reals, 0.1, 1.0, master_seed=77)


def test_save_load_round_trip(tmp_path):
    cb = _three_entry_codebook()
    assert len(cb) == 3
    path = tmp_path / "cb.json"
    save_codebook(cb, path)
    back = load_codebook(path)
    assert back == cb
    for k, e in cb.entries.items():
        b = back.entries[k]
        assert b.sigma_k2.hex() == e.sigma_k2.hex()
        assert np.array_equal(b.precoder.p.view(np.uint64), e.precoder.p.view(np.uint64))
    jsonschema.validate(json.loads(path.read_text()), CODEBOOK_SCHEMA)
    assert dumps_codebook(back) == path.read_text()


def test_unsupported_version(tmp_path):
    doc = json.loads(dumps_codebook(_three_entry_codebook()))
    doc["version"] = 999
    path = tmp_path / "v999.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(UnsupportedVersionError):
        load_codebook(path)


def test_truncated_file(tmp_path):
    text = dumps_codebook(_three_entry_codebook())
    path = tmp_path / "cut.json"
    path.write_text(text[: len(text) // 2])
    with pytest.raises(CodebookFormatError) as info:
        load_codebook(path)
    assert info.value.line is not None


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("delta"),
        lambda d: d.update(extra=1),
        lambda d: d["entries"][0].update(sigma_k2=0.5),
        lambda d: d["entries"][0].update(key64="12345"),
        lambda d: d["entries"][0]["quantized"].pop(),
        lambda d: d.update(delta="0.1"),
    ],
)
def test_schema_invalid_rejected(mutate):
    doc = json.loads(dumps_codebook(_three_entry_codebook()))
    mutate(doc)
    with pytest.raises(CodebookFormatError):
        loads_codebook(json.dumps(doc))


def test_codebook_key_bits_persist():
    h1, _ = _colliding_pair()
    cb = build_codebook([ChannelRealization(h1 + 1e-3, np.ones((1, 1)), 1.0, 1.0)], 1.0, 1.0, key_bits=8)
    back = loads_codebook(dumps_codebook(cb))
    assert back.key_bits == 8 and back == cb
