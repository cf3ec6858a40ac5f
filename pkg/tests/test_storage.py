import bz2
import gzip
import io
import lzma
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from zbtrace.classify import TrainConfig
from zbtrace.errors import StoreError
from zbtrace.features import FEATURE_NAMES, N_FEATURES, FeatureVector
from zbtrace.storage import (CODECS, QuantizerSpec, decode_store, dequantize, encode_store, fit_quantizer,
                             lossless_baseline, pack_codes, quantize, rate_accuracy_sweep, roundtrip,
                             storage_rate, unpack_codes, write_sweep_csv)
from zbtrace.synth import generate, load_scenario


def spec1(lo, hi, bits):
    return QuantizerSpec(np.full(N_FEATURES, lo), np.full(N_FEATURES, hi), bits)


def vectors(n=40, seed=0, labels=("H1", "B2", "C1")):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        lab = labels[i % len(labels)]
        out.append(FeatureVector(rng.normal(size=N_FEATURES) * 50 + 100, lab, "Socket", "A", 5.0 * (i // 3), 5.0))
    return out


# -- quantizer -----------------------------------------------------------------

def test_storage_rate_values():
    assert storage_rate(14, 51, 8, 5) == 1142.4
    assert storage_rate(1, 1, 1, 1) == 1


def test_two_bit_examples():
    s = spec1(0.0, 10.0, 2)
    x = np.full((1, N_FEATURES), 10.0)
    assert quantize(x, s)[0, 0] == 3 and dequantize(quantize(x, s), s)[0, 0] == 10.0
    x = np.full((1, N_FEATURES), 3.4)
    assert quantize(x, s)[0, 0] == 1
    # nearest of the four levels 0, 10/3, 20/3, 10
    levels = np.array([0, 10 / 3, 20 / 3, 10])
    assert np.argmin(np.abs(levels - 3.4)) == 1
    assert dequantize(quantize(x, s), s)[0, 0] == pytest.approx(10 / 3, abs=1e-12)


def test_one_bit_two_levels():
    s = spec1(-2.0, 5.0, 1)
    x = np.linspace(-3, 6, 50)[:, None] * np.ones(N_FEATURES)
    assert set(np.unique(roundtrip(x, s)).tolist()) == {-2.0, 5.0}


def test_degenerate_axis():
    X = np.ones((5, N_FEATURES)) * np.arange(5)[:, None]
    X[:, 4] = 7.0
    s = fit_quantizer(X, 4)
    codes = quantize(X, s)
    assert np.all(codes[:, 4] == 0) and np.all(dequantize(codes, s)[:, 4] == 7.0)


def test_clamping_outside_training_range():
    s = fit_quantizer(np.array([[0.0] * N_FEATURES, [1.0] * N_FEATURES]), 3)
    codes = quantize(np.array([[-5.0] * N_FEATURES, [9.0] * N_FEATURES]), s)
    assert np.all(codes[0] == 0) and np.all(codes[1] == 7)


def test_passthrough_identity():
    X = np.random.default_rng(0).normal(size=(20, N_FEATURES)) * 1e6
    for b in (53, 64):
        s = fit_quantizer(X, b)
        assert s.passthrough and s.code_bits == 64
        assert np.array_equal(roundtrip(X, s), X)


def test_bad_specs():
    with pytest.raises(StoreError):
        spec1(0, 1, 0)
    with pytest.raises(StoreError):
        spec1(1, 0, 4)
    with pytest.raises(StoreError):
        fit_quantizer(np.zeros((0, N_FEATURES)), 4)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.integers(1, 52), finite, st.floats(1e-3, 1e6), arrays(np.float64, 30, elements=st.floats(0, 1)))
def test_half_step_bound(bits, lo, span, u):
    s = spec1(lo, lo + span, bits)
    x = np.clip(lo + u[:, None] * span, lo, lo + span) * np.ones(N_FEATURES)
    err = np.abs(roundtrip(x, s) - x)
    half = span / (2 * ((1 << bits) - 1))
    assert np.all(err <= half * (1 + 1e-9) + 1e-9 * max(abs(lo), abs(lo + span)))


@given(st.integers(1, 52), finite, st.floats(1e-3, 1e6), arrays(np.float64, 40, elements=finite))
def test_monotone_codes(bits, lo, span, x):
    s = spec1(lo, lo + span, bits)
    xs = np.sort(x)[:, None] * np.ones(N_FEATURES)
    codes = quantize(xs, s)[:, 0]
    assert np.all(np.diff(codes.astype(np.int64)) >= 0)


@given(st.integers(1, 52), finite, st.floats(1e-3, 1e6))
def test_endpoints_exact(bits, lo, span):
    hi = lo + span
    s = spec1(lo, hi, bits)
    x = np.array([[lo] * N_FEATURES, [hi] * N_FEATURES])
    back = roundtrip(x, s)
    assert np.all(back[0] == lo) and np.all(back[1] == hi)
    assert np.all(quantize(x, s)[1] == s.top_code)


@given(st.integers(1, 64), st.integers(1, 12), st.data())
def test_pack_unpack(bits, rows, data):
    top = (1 << bits) - 1
    codes = np.array(data.draw(st.lists(st.integers(0, top), min_size=rows * 3, max_size=rows * 3)),
                     dtype=np.uint64).reshape(rows, 3)
    payload = pack_codes(codes, bits)
    assert len(payload) == (rows * 3 * bits + 7) // 8
    assert np.array_equal(unpack_codes(payload, rows, 3, bits), codes)


def test_msb_first_packing():
    assert pack_codes(np.array([[1, 2]], dtype=np.uint64), 2) == bytes([0b01100000])


# -- container -------------------------------------------------------------------

@pytest.mark.parametrize("bits", [1, 2, 5, 8, 13, 16, 32, 52, 64])
@pytest.mark.parametrize("wrap", ["none", "gzip", "bzip2", "lzma"])
def test_container_roundtrip(bits, wrap):
    vs = vectors()
    X = np.vstack([v.values for v in vs])
    s = fit_quantizer(X, bits)
    blob, report = encode_store(vs, s, 600.0, wrap_codec=wrap)
    store = decode_store(blob)
    order = sorted(range(len(vs)), key=lambda i: (vs[i].topology, vs[i].device_label, vs[i].t_start))
    assert np.array_equal(store.codes, quantize(X[order], s))
    assert store.payload_bits == len(vs) * 51 * s.code_bits == report.notes["payload_bits"]
    if bits < 53:
        assert store.payload_bits == len(vs) * 51 * bits
    assert [(r.device_label, r.t_start) for r in store.rows] == [(vs[i].device_label, vs[i].t_start) for i in order]
    assert np.array_equal(store.spec.mins, s.mins) and store.spec.bits == bits
    assert store.window_s == 5.0 and store.duration_s == 600.0


def test_report_rate_identity():
    vs = vectors()
    s = fit_quantizer(np.vstack([v.values for v in vs]), 8)
    blob, rep = encode_store(vs, s, 600.0)
    for m in rep.methods.values():
        assert m.bits_per_second == m.size_bytes * 8 / 600.0
    assert rep.methods["lzma"].size_bytes == len(blob)
    assert rep.effective_rate == len(blob) * 8 / 600.0
    assert rep.nominal_rate == storage_rate(3, 51, 8, 5.0)
    assert encode_store(vs, s, 600.0, n_devices=14)[1].nominal_rate == storage_rate(14, 51, 8, 5.0)


def test_corrupt_container():
    vs = vectors()
    s = fit_quantizer(np.vstack([v.values for v in vs]), 4)
    blob, _ = encode_store(vs, s, 100.0, wrap_codec="none")
    with pytest.raises(StoreError):
        decode_store(b"NOPE" + blob[4:])
    with pytest.raises(StoreError):
        decode_store(blob[:-6])
    with pytest.raises(StoreError):
        encode_store(vs, s, 0.0)


# -- lossless baseline -------------------------------------------------------------

def test_baseline_on_synthetic_capture(tmp_path):
    pcap, truth = generate(load_scenario("tests/data/mesh_scenario.json"))
    p = tmp_path / "s.pcap"
    p.write_bytes(pcap)
    rep = lossless_baseline(p)
    duration = rep.capture_duration
    assert rep.methods["raw"].size_bytes == len(pcap)
    assert rep.methods["raw"].bits_per_second == len(pcap) * 8 / duration
    assert rep.methods["gzip"].size_bytes == len(gzip.compress(pcap, 6, mtime=0))
    assert rep.methods["bzip2"].size_bytes == len(bz2.compress(pcap, 9))
    assert rep.methods["lzma"].size_bytes == len(lzma.compress(pcap, preset=9))
    assert rep.methods["lzma"].size_mb == rep.methods["lzma"].size_bytes / 1e6
    for name in CODECS:
        assert CODECS[name][1](CODECS[name][0](pcap)) == pcap
    buf = io.StringIO()
    rep.to_csv(buf)
    assert buf.getvalue().startswith("method,size_bytes,size_mb,bits_per_second")


def test_baseline_edge_cases(tmp_path):
    from zbtrace.pcap import PcapWriter
    p = tmp_path / "one.pcap"
    with open(p, "wb") as fp:
        PcapWriter(fp).write(1, 0, b"\x02\x00\x7b\x00\x00")
    with pytest.raises(StoreError, match="zero-duration"):
        lossless_baseline(p)
    pcap, _ = generate(load_scenario("tests/data/mesh_scenario.json"))
    p.write_bytes(pcap)
    with pytest.warns(UserWarning, match="zstd"):
        rep = lossless_baseline(p, ["gzip", "zstd"])
    assert set(rep.methods) == {"raw", "gzip"}


# -- sweep ------------------------------------------------------------------------

def sweep_vectors():
    rng = np.random.default_rng(7)
    out = []
    for k, (lab, cat) in enumerate([("H1", "Socket"), ("B1", "Motion"), ("L1", "Bulb")]):
        for i in range(30):
            v = rng.normal(size=N_FEATURES)
            v[k] += 3.0
            out.append(FeatureVector(v, lab, cat, "A", 5.0 * i, 5.0))
    return out


def test_sweep_passthrough_equals_baseline_and_rates():
    vs = sweep_vectors()
    cfg = TrainConfig(n_estimators=10, max_depth=3, backend="native")
    pts = rate_accuracy_sweep(vs, cfg, [2, 64], k=3, duration_s=150.0)
    assert pts[0].regime == "baseline" and pts[0].bits is None
    by = {(p.bits, p.regime): p for p in pts}
    assert set(by) == {(None, "baseline"), (2, "i"), (2, "ii"), (64, "i"), (64, "ii")}
    for r in ("i", "ii"):
        assert by[(64, r)].macro_f1 == pts[0].macro_f1
        assert by[(64, r)].weighted_f1 == pts[0].weighted_f1
    assert by[(2, "ii")].nominal_rate == storage_rate(3, 51, 2, 5.0)
    assert by[(64, "i")].nominal_rate == storage_rate(3, 51, 64, 5.0)
    buf = io.StringIO()
    write_sweep_csv(pts, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",")[:4] == ["bits", "regime", "nominal_rate", "effective_rate"]
    assert len(lines) == 6


def test_sweep_rejects_bad_arguments():
    cfg = TrainConfig(n_estimators=2, max_depth=2, backend="native")
    with pytest.raises(StoreError):
        rate_accuracy_sweep(sweep_vectors(), cfg, [0])
    with pytest.raises(StoreError):
        rate_accuracy_sweep(sweep_vectors(), cfg, [4], regimes=["iii"])


def test_feature_order_contract():
    s = QuantizerSpec(np.zeros(N_FEATURES), np.ones(N_FEATURES), 4, tuple(reversed(FEATURE_NAMES)))
    with pytest.raises(StoreError):
        encode_store(vectors(), s, 10.0)
