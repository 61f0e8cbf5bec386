import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stocheuler.dynamics import GalerkinSystem
from stocheuler.observables import (
    SUMMARY_SCHEMA,
    EnsembleSummary,
    TrajectoryRecord,
    decay_bound_indicator,
    decay_rate,
    energy,
    energy_bound_indicator,
    enstrophy,
    ensemble_distance,
    growth_bound_indicator,
    interpolation_gap,
    mixing_pairing,
    summarize,
    sup_distance,
    validate_summary,
    wilson_interval,
)
from stocheuler.spectral import FourierField, sobolev_norm

from oracles import random_field

NU = 0.01


def fields_strategy(N=4):
    return arrays(np.float64, (2 * N + 1, 2 * N + 1), elements=st.floats(-5, 5, allow_nan=False)).map(
        lambda a: FourierField(N, a)
    )


def ns_record(N=8, steps=200, dt=5e-3, scheme="deterministic_ns", delta=0.5):
    sys_ = GalerkinSystem(N, NU)
    xi = FourierField.from_modes(N, {(1, 0): 1.0, (1, 1): 1.0, (0, 2): 0.3})
    w = sys_.pack([xi])
    fields, times = [xi], [0.0]
    for n in range(1, steps + 1):
        w = sys_.step_rk2(w, dt)
        if n % 20 == 0:
            fields.append(sys_.unpack(w)[0])
            times.append(n * dt)
    return TrajectoryRecord.from_fields(fields, times, delta, scheme=scheme, track=[(1, 0)], keep_snapshots=True)


def constant_record(values, times, scheme="ito_dissipative", delta=0.5):
    values = np.asarray(values, dtype=float)
    return TrajectoryRecord(
        sample=0, scheme=scheme, N=4, seed=0, delta=delta, times=times,
        energy=values, enstrophy=values, hminus=np.sqrt(values), hplus=np.sqrt(values),
    )


# -- per-field diagnostics --------------------------------------------------------------


def test_decay_rate():
    assert decay_rate(0.01) == pytest.approx(8 * 0.01 * math.pi ** 2)


def test_energy_examples():
    assert energy(FourierField.basis((1, 0))) == pytest.approx(1 / (8 * math.pi ** 2))
    assert energy(FourierField.basis((1, 0))) == pytest.approx(0.012665, abs=1e-6)
    assert energy(FourierField.zeros(3)) == 0.0


def test_energy_equals_velocity_norm():
    from stocheuler.spectral import biot_savart

    rng = np.random.default_rng(0)
    xi = random_field(rng, 6)
    assert energy(xi) == pytest.approx(0.5 * biot_savart(xi).norm() ** 2, rel=1e-12)
    assert energy(xi) == pytest.approx(0.5 * sobolev_norm(xi, -1) ** 2 / (4 * math.pi ** 2), rel=1e-12)


def test_enstrophy():
    xi = FourierField.from_modes(3, {(1, 0): 3.0, (0, -2): 4.0})
    assert enstrophy(xi) == pytest.approx(25.0)


def test_mixing_pairing_examples():
    e = FourierField.basis((1, 0), 2)
    assert mixing_pairing(e, e, 0.5) == pytest.approx((1.0, 1.0))
    lhs, rhs = mixing_pairing(e, FourierField.basis((0, 1), 2), 0.5)
    assert lhs == 0.0 and rhs > 0


def test_mixing_pairing_bound_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        xi, f = random_field(rng, 8), random_field(rng, 8)
        lhs, rhs = mixing_pairing(xi, f, rng.uniform(0.1, 2))
        assert lhs <= rhs * (1 + 1e-12)


def test_interpolation_inequality_random():
    rng = np.random.default_rng(2)
    for _ in range(100):
        xi = random_field(rng, 8)
        assert interpolation_gap(xi, rng.uniform(0.05, 2)) >= -1e-12 * enstrophy(xi)


def test_interpolation_is_tight_on_a_single_shell():
    xi = FourierField.from_modes(5, {(3, 4): 1.0, (-4, 3): 2.0, (5, 0): -1.0})
    assert interpolation_gap(xi, 0.7) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(fields_strategy(), st.floats(0.01, 2))
def test_sobolev_ordering(xi, delta):
    lo, mid, hi = sobolev_norm(xi, -delta), sobolev_norm(xi, 0), sobolev_norm(xi, delta)
    assert lo <= mid * (1 + 1e-12) and mid <= hi * (1 + 1e-12)


# -- records --------------------------------------------------------------------------------


def test_record_requires_increasing_times():
    with pytest.raises(ValueError):
        constant_record([1, 1, 1], [0.0, 0.5, 0.5])
    with pytest.raises(ValueError):
        constant_record([1, 1], [0.0, 0.5, 1.0])


def test_record_from_fields_values():
    xi = FourierField.from_modes(4, {(2, 0): 2.0})
    rec = TrajectoryRecord.from_fields([xi, xi * 0.5], [0.0, 1.0], 0.5, track=[(2, 0), (1, 0)])
    assert rec.enstrophy.tolist() == [4.0, 1.0]
    assert rec.hminus[0] == pytest.approx(2.0 / math.sqrt(2))
    assert rec.hplus[0] == pytest.approx(2.0 * math.sqrt(2))
    assert rec.pairings[(2, 0)].tolist() == [2.0, 1.0]
    assert rec.pairings[(1, 0)].tolist() == [0.0, 0.0]
    assert rec.snapshots is None


def test_record_csv_round_trip():
    rec = ns_record()
    rec.rho_lp = {2.0: np.linspace(1, 2, len(rec.times))}
    text = rec.to_csv()
    assert text.startswith("# sample=0")
    header = [ln for ln in text.splitlines() if not ln.startswith("#")][0]
    assert header.split(",")[:5] == ["t", "energy", "enstrophy", "hminus", "hplus"]
    back = TrajectoryRecord.from_csv(text)
    for name in ("times", "energy", "enstrophy", "hminus", "hplus"):
        assert np.array_equal(getattr(back, name), getattr(rec, name))
    assert np.array_equal(back.pairings[(1, 0)], rec.pairings[(1, 0)])
    assert np.array_equal(back.rho_lp[2.0], rec.rho_lp[2.0])
    assert back.scheme == rec.scheme and back.delta == rec.delta


# -- bound indicators -----------------------------------------------------------------------------


def test_decay_indicator_true_for_navier_stokes():
    rec = ns_record()
    for eps in (1e-9, 0.1, 10.0):
        assert decay_bound_indicator(rec, NU, eps)
        assert energy_bound_indicator(rec, NU, eps)


def test_decay_indicator_false_for_constant_record():
    times = np.linspace(0, 5, 11)
    rec = constant_record(np.full(11, 1.0), times)
    assert not decay_bound_indicator(rec, NU, 0.2)
    assert not energy_bound_indicator(rec, NU, 0.2)


def test_energy_indicator_single_excursion():
    times = np.linspace(0, 1, 5)
    e = np.exp(-decay_rate(NU) * times) * 0.5
    e[3] = 2.0
    rec = constant_record(e, times)
    assert not energy_bound_indicator(rec, NU, 0.1)
    e[3] = 0.1
    assert energy_bound_indicator(constant_record(e, times), NU, 0.1)


def test_decay_indicator_checks_delta():
    rec = ns_record()
    with pytest.raises(ValueError):
        decay_bound_indicator(rec, NU, 0.1, delta=0.25)


def test_growth_indicator_rejects_dissipative_records():
    with pytest.raises(ValueError):
        growth_bound_indicator(ns_record(), NU)


def test_growth_indicator_initial_and_interpolation():
    # at t = 0 the envelope is half the L2 norm, always below the H^delta norm
    xi = FourierField.from_modes(4, {(1, 0): 1.0, (2, 1): 0.5})
    rec = TrajectoryRecord.from_fields([xi], [0.0], 0.5, scheme="stratonovich_conservative")
    assert growth_bound_indicator(rec, NU)
    # conserved L2 norm: the indicator reduces to the interpolation bound with H^-delta decay
    times = np.array([0.0, 1.0, 2.0])
    a = np.exp(-0.5 * decay_rate(NU) * times)
    hminus = a * math.sqrt(2.0)
    rec = TrajectoryRecord(
        sample=0, scheme="stratonovich_conservative", N=4, seed=0, delta=0.5, times=times,
        energy=np.ones(3), enstrophy=np.full(3, 2.0), hminus=hminus, hplus=2.0 / hminus,
    )
    assert growth_bound_indicator(rec, NU)


# -- ensemble statistics --------------------------------------------------------------------------


def test_wilson_interval():
    lo, hi = wilson_interval(64, 64)
    assert hi == 1.0 and 0.94 < lo < 0.95
    lo, hi = wilson_interval(0, 10)
    assert lo == 0.0 and 0.27 < hi < 0.28
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)


def test_ensemble_distance_trivial_cases():
    rec = ns_record()
    ref = rec.snapshots
    assert ensemble_distance([ref, ref], ref, 0.5) == 0.0
    a = FourierField.from_modes(4, {(1, 0): 1.0})
    b = FourierField.from_modes(8, {(1, 0): 0.5, (2, 0): 0.5})
    expected = sobolev_norm(a.with_cutoff(8) - b, -0.5)
    assert ensemble_distance([[a]], [b], 0.5) == pytest.approx(expected)
    assert ensemble_distance([[a]], [b], 0.5, p=3) == pytest.approx(expected)


def test_ensemble_distance_moment():
    a = FourierField.basis((1, 0), 2)
    ref = [FourierField.zeros(2)]
    samples = [[a * 1.0], [a * 3.0]]
    assert ensemble_distance(samples, ref, 0.5, p=1) == pytest.approx(2.0)
    assert ensemble_distance(samples, ref, 0.5, p=2) == pytest.approx(math.sqrt(5.0))


def test_ensemble_distance_accepts_records():
    rec = ns_record()
    assert ensemble_distance([rec], rec.snapshots, 0.5, ref_times=rec.times) == 0.0


def test_ensemble_distance_rejects_mismatch():
    rec = ns_record()
    with pytest.raises(ValueError):
        ensemble_distance([rec.snapshots[:-1]], rec.snapshots, 0.5)
    with pytest.raises(ValueError):
        ensemble_distance([rec.snapshots], rec.snapshots, 0.5, times=[0, 1], ref_times=[0, 2])
    with pytest.raises(ValueError):
        ensemble_distance([rec.snapshots], rec.snapshots, 0.5, p=0.5)
    with pytest.raises(ValueError):
        sup_distance([FourierField.zeros(8)], [FourierField.zeros(4)], 0.5)


def test_adding_the_reference_does_not_increase_distance():
    rng = np.random.default_rng(3)
    ref = [random_field(rng, 4) for _ in range(3)]
    samples = [[r + random_field(rng, 4, 0.1) for r in ref] for _ in range(5)]
    before = ensemble_distance(samples, ref, 0.5)
    after = ensemble_distance(samples + [ref], ref, 0.5)
    assert after <= before


def test_summarize_and_schema():
    sups = [0.1, 0.3, None, 0.2]
    events = {"decay_bound": [True, False, None, True]}
    entry = summarize(8, sups, events, p=1.0)
    assert entry.samples == 4 and entry.completed == 3 and entry.failures == 1
    assert entry.D == pytest.approx(0.2)
    assert entry.probabilities["decay_bound"]["p"] == pytest.approx(2 / 3)
    doc = EnsembleSummary({"seed": 1}, {"N_ref": 16, "status": "ok"}, [entry]).dumps()
    parsed = json.loads(doc)
    validate_summary(parsed)
    assert list(parsed) == sorted(parsed)


def test_summary_with_all_failures_serializes_nulls():
    entry = summarize(4, [None, None], {"decay_bound": [None, None]}, p=1.0)
    parsed = json.loads(EnsembleSummary({}, {"N_ref": 8, "status": "ok"}, [entry]).dumps())
    assert parsed["entries"][0]["D"] is None
    validate_summary(parsed)


def test_schema_rejects_bad_probability():
    entry = summarize(4, [0.1], {"x": [True]}, p=1.0).to_json()
    entry["probabilities"]["x"]["p"] = 1.5
    with pytest.raises(jsonschema.ValidationError):
        validate_summary({"config": {}, "reference": {"N_ref": 8, "status": "ok"}, "entries": [entry]})
    assert SUMMARY_SCHEMA["required"] == ["config", "reference", "entries"]
