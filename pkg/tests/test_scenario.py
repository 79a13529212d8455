from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbrrm.errors import ParseError, ValidationError
from mbrrm.scenario import (BEAM_SHAPE, BeamModel, ScenarioParams, generate_scenario,
                            generate_user_channels, hex_centers, load_scenario,
                            scenario_to_document)


def minimal_doc(**over):
    doc = {
        "beams": [{"id": "a", "center": [0, 0], "demand_bps": 1e6, "users": 1, "noise_w": 1e-3}],
        "gain_matrix": [[1.0]],
        "spectrum": {"b_total_hz": 1e6, "k_carriers": 1},
        "power": {"p_total_w": 10},
    }
    doc.update(over)
    return doc


def two_beam_doc(g12=0.9, g11=0.5):
    return {
        "beams": [
            {"id": "a", "center": [0, 0], "demand_bps": 1e6, "users": 1, "noise_w": 1e-3},
            {"id": "b", "center": [1, 0], "demand_bps": 1e6, "users": 1, "noise_w": 1e-3},
        ],
        "gain_matrix": [[g11, g12], [0.1, 1.0]],
        "spectrum": {"b_total_hz": 1e6, "k_carriers": 1},
        "power": {"p_total_w": 10},
    }


def test_minimal_document():
    s = load_scenario(json.dumps(minimal_doc()))
    assert s.num_beams == 1
    assert s.carrier_width == 1e6


def test_inexact_carrier_split_rejected():
    doc = minimal_doc(spectrum={"b_total_hz": 1e6, "k_carriers": 3})
    with pytest.raises(ValidationError) as err:
        load_scenario(json.dumps(doc))
    assert "spectrum" in err.value.field


def test_diagonal_dominance_rejected():
    with pytest.raises(ValidationError) as err:
        load_scenario(json.dumps(two_beam_doc(g12=0.9, g11=0.5)))
    assert err.value.field.startswith("gain_matrix")


def test_malformed_json_is_parse_error():
    with pytest.raises(ParseError):
        load_scenario("{not json")


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d["beams"][0].pop("demand_bps"), "beams[0].demand_bps"),
    (lambda d: d["beams"][0].update(demand_bps=-1), "beams[0].demand_bps"),
    (lambda d: d["beams"][0].update(noise_w=0), "beams[0].noise_w"),
    (lambda d: d["power"].update(p_total_w=0), "power.p_total_w"),
    (lambda d: d.update(gain_matrix=[[-1.0]]), "gain_matrix"),
])
def test_validation_names_field(mutate, field):
    doc = minimal_doc()
    mutate(doc)
    with pytest.raises(ValidationError) as err:
        load_scenario(json.dumps(doc))
    assert err.value.field.startswith(field.split(".")[0])
    assert field.split("[")[0] in str(err.value)


def test_transponder_partition_and_caps():
    doc = two_beam_doc(g12=0.1, g11=1.0)
    doc["power"]["transponders"] = [{"id": "t", "p_cap_w": 6, "k_cap": 2}]
    doc["beams"][0]["transponder"] = "t"
    with pytest.raises(ValidationError):  # beam b is not covered
        load_scenario(json.dumps(doc))
    doc["beams"][1]["transponder"] = "t"
    s = load_scenario(json.dumps(doc))
    assert s.transponders[0].beams == (0, 1)
    doc["power"]["transponders"][0]["p_cap_w"] = 11
    with pytest.raises(ValidationError):
        load_scenario(json.dumps(doc))


def test_document_round_trip():
    s = generate_scenario(ScenarioParams(num_beams=5, seed=3, n_transponders=2))
    s2 = load_scenario(json.dumps(scenario_to_document(s)))
    np.testing.assert_array_equal(s.gain, s2.gain)
    np.testing.assert_array_equal(s.demands, s2.demands)
    assert [t.beams for t in s.transponders] == [t.beams for t in s2.transponders]
    assert s2.beam_model == s.beam_model


def test_single_beam_generation():
    s = generate_scenario(ScenarioParams(num_beams=1, seed=99))
    assert s.gain.shape == (1, 1) and s.gain[0, 0] > 0


def test_generation_deterministic():
    p = ScenarioParams(num_beams=7, seed=42)
    a, b = generate_scenario(p), generate_scenario(p)
    assert scenario_to_document(a) == scenario_to_document(b)
    assert scenario_to_document(a) != scenario_to_document(generate_scenario(
        ScenarioParams(num_beams=7, seed=43)))


def test_hex_seven_beams_dominance():
    s = generate_scenario(ScenarioParams(num_beams=7, seed=42))
    off = s.gain - np.diag(np.diag(s.gain))
    assert np.all(off.max(axis=1) / np.diag(s.gain) < 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32), st.sampled_from(["hex", "line"]),
       st.integers(0, 3))
def test_generated_scenarios_pass_validator(L, seed, layout, n_tp):
    s = generate_scenario(ScenarioParams(num_beams=L, seed=seed, layout=layout,
                                         n_transponders=min(n_tp, L)))
    load_scenario(json.dumps(scenario_to_document(s)))
    lo, hi = ScenarioParams(num_beams=1).demand_min_bps, ScenarioParams(num_beams=1).demand_max_bps
    assert np.all((s.demands >= lo) & (s.demands <= hi))


def test_beam_model_half_power_point_and_decay():
    m = BeamModel(g_peak=2.0, theta_3db=0.8)
    assert math.isclose(float(m.gain(0.4)), 1.0, rel_tol=1e-12)
    assert BEAM_SHAPE == pytest.approx(4 * math.log(2))
    d = np.linspace(0, 3, 200)
    assert np.all(np.diff(m.gain(d)) < 0)
    assert float(BeamModel(1.0, 1.0, 3.0).gain(0.0)) == pytest.approx(10 ** -0.3)


def test_hex_centers_distinct():
    c = hex_centers(19, 1.0)
    d = np.sqrt(((c[:, None] - c[None]) ** 2).sum(-1)) + np.eye(19)
    assert d.min() == pytest.approx(1.0)


def test_user_channels_single_beam():
    s = generate_scenario(ScenarioParams(num_beams=1, seed=0, users_min=1, users_max=1))
    ch = generate_user_channels(s, 5)
    assert ch.channels[0].shape == (1, 1)
    pos = ch.positions[0][0]
    expected = s.beam_model.gain(np.linalg.norm(pos - s.centers[0]))
    assert abs(ch.channels[0][0, 0]) ** 2 == pytest.approx(float(expected), rel=1e-12)


def test_user_channels_without_model_use_gain_row():
    s = load_scenario(json.dumps(two_beam_doc(g12=0.1, g11=1.0)))
    ch = generate_user_channels(s, 0)
    np.testing.assert_allclose(np.abs(ch.channels[1][0]) ** 2, s.gain[1], rtol=1e-12)


def test_user_channels_reproducible_and_counts():
    s = generate_scenario(ScenarioParams(num_beams=4, seed=1))
    a, b = generate_user_channels(s, 9), generate_user_channels(s, 9)
    for l in range(4):
        assert a.channels[l].shape == (s.users_per_beam[l], 4)
        np.testing.assert_array_equal(a.channels[l], b.channels[l])


def test_user_channel_dominance_monte_carlo():
    s = generate_scenario(ScenarioParams(num_beams=3, seed=4, users_min=1000, users_max=1000))
    ch = generate_user_channels(s, 11)
    for l in range(3):
        p = np.abs(ch.channels[l]) ** 2
        for m in range(3):
            if m != l:
                assert np.mean(p[:, l] / p[:, m]) > 1.0
