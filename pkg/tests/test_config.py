import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmchaos import states as S
from bohmchaos.config import (ConfigError, ExperimentConfig, StateSpec, bundled_configs, load, number,
                              state_spec_from_catalog)


def sph_state(*qns):
    return {"family": "SPH3D",
            "terms": [{"coefficient": {"abs": 1, "phase": f"pi/{k + 2}"}, "quantum_numbers": [q]}
                      for k, q in enumerate(qns)]}


def traj_cfg(**extra):
    d = {"name": "t", "command": "trajectory",
         "state": sph_state({"n": 3, "l": 3, "m": 1}, {"n": 3, "l": 1, "m": 0}),
         "x0": [1.0, 0.5, -0.2], "t_span": [0, 1]}
    d.update(extra)
    return d


@pytest.mark.parametrize("text, value", [
    (2, 2.0), ("pi/3", math.pi / 3), ("2*pi/5", 2 * math.pi / 5), ("-1/8", -0.125),
    ("sqrt(2)/2", math.sqrt(0.5)), ("π", math.pi), ("1e-7", 1e-7),
])
def test_number_expressions(text, value):
    assert number(text, "v") == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["__import__('os')", "x", "1/0", True, None, "inf", [1]])
def test_number_rejects(text):
    with pytest.raises(ConfigError):
        number(text, "v")


@pytest.mark.parametrize("name", bundled_configs())
def test_bundled_configs_validate_and_roundtrip(name):
    cfg = load(name)
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_dict() == json.loads(cfg.to_json())


def test_bundled_set_covers_regression_states():
    names = set(bundled_configs())
    for required in ["ho3d_stat", "ho3d_stat_cart", "polar_pair_2p", "cart_triple_2p", "box_2p",
                     "cart_triple_3p", "box_3p", "polar_w_3p", "sweep_eq31_alpha", "sweep_eq32_alpha",
                     "sweep_eq31_beta", "sweep_eq100_a", "sweep_eq101_a", "sweep_eq101_prime_a"]:
        assert required in names


def test_bundled_states_match_catalogue():
    for name in ["ho3d_stat", "polar_pair_2p", "cart_triple_2p", "box_2p"]:
        cfg = load(name)
        reg = S.REGRESSIONS["box_triple_2p" if name == "box_2p" else name]
        wf, ref = cfg.wavefunction(), reg.make()
        q = np.asarray(reg.x0)
        assert wf.evaluate(q, 0.3).psi == pytest.approx(ref.evaluate(q, 0.3).psi, rel=1e-12)
        assert np.allclose(cfg.x0(wf), reg.x0, atol=1e-12)


@pytest.mark.parametrize("name", ["ho3d_stat", "cart_triple_3p", "polar_w_3p"])
def test_catalogue_state_to_json_roundtrip(name):
    spec = StateSpec.parse(json.loads(json.dumps(state_spec_from_catalog(name))))
    wf, ref = spec.build(), S.REGRESSIONS[name].make()
    q = np.asarray(S.REGRESSIONS[name].x0)
    assert wf.evaluate(q, 1.0).psi == pytest.approx(ref.evaluate(q, 1.0).psi, rel=1e-12)


def test_l_parity_error_names_the_term():
    d = traj_cfg(state=sph_state({"n": 3, "l": 3, "m": 1}, {"n": 3, "l": 2, "m": 0}))
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(d)
    assert err.value.path == "state.terms[1].quantum_numbers[0]"
    assert "parity" in str(err.value)


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("command"), "command"),
    (lambda d: d.update(command="fly"), "command"),
    (lambda d: d.update(bogus=1), "config.bogus"),
    (lambda d: d.update(x0=[1.0, 2.0]), "x0"),
    (lambda d: d.update(t_span=[1, 1]), "t_span"),
    (lambda d: d.update(integrator={"rel_tol": -1}), "integrator"),
    (lambda d: d.update(name="a/b"), "name"),
    (lambda d: d["state"]["terms"][0].update(coefficient={"abs": 1, "re": 1}),
     "state.terms[0].coefficient"),
    (lambda d: d["state"]["terms"][0].update(coefficient={"abs": -1}), "state.terms[0].coefficient.abs"),
    (lambda d: d["state"].update(family="NOPE"), "state.terms[0].family"),
    (lambda d: d["state"]["terms"][0]["quantum_numbers"][0].update(k=0), "state.terms[0].quantum_numbers[0]"),
    (lambda d: d["state"].update(masses=[0]), "state.masses"),
], ids=lambda x: x if isinstance(x, str) else "")
def test_validation_errors_name_the_field(mutate, path):
    d = traj_cfg()
    mutate(d)
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(d)
    assert err.value.path == path


def test_stochastic_commands_need_a_seed():
    d = {"command": "ensemble", "state": {"generator": "eq31", "params": {"alpha": "pi/4"}}}
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(d)
    assert err.value.path == "seed"
    assert ExperimentConfig.from_dict({**d, "seed": 3}).seed == 3
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**d, "seed": -1})


@pytest.mark.parametrize("sweep, path", [
    ({"generator": "eq99", "parameter": "a", "grid": [0]}, "sweep.generator"),
    ({"generator": "eq100", "parameter": "alpha", "grid": [0]}, "sweep.parameter"),
    ({"generator": "eq100", "parameter": "a", "grid": []}, "sweep.grid"),
    ({"generator": "eq100", "parameter": "a", "grid": [0.2, 0.1]}, "sweep.grid"),
    ({"generator": "eq100", "parameter": "a"}, "sweep.grid"),
    ({"generator": "eq100", "parameter": "a", "grid": {"start": 0, "stop": 1, "num": 0}}, "sweep.grid.num"),
])
def test_sweep_validation(sweep, path):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict({"command": "sweep", "seed": 1, "sweep": sweep})
    assert err.value.path == path


def test_sweep_grid_forms_and_aliases():
    cfg = ExperimentConfig.from_dict({"command": "sweep", "seed": 1, "sweep": {
        "generator": "eq31", "parameter": "α", "grid": {"start": 0, "stop": "pi/2", "num": 5},
        "fixed": {"β": 0}}})
    gen, param, grid = cfg.sweep
    assert (gen, param) == ("eq31", "alpha")
    assert grid == pytest.approx(np.linspace(0, math.pi / 2, 5))


def test_generator_state_needs_its_parameter():
    with pytest.raises(ConfigError) as err:
        StateSpec.parse({"generator": "eq100"})
    assert err.value.path == "state.params.a"
    with pytest.raises(ConfigError):
        StateSpec.parse({"generator": "eq100", "params": {"alpha": 0}})


def test_box_start_outside_domain():
    d = load("box_2p").to_dict()
    d["x0"][0] = 1.5
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(d)
    assert err.value.path == "x0"


def test_spherical_x0():
    cfg = ExperimentConfig.from_dict(traj_cfg(x0={"spherical": [[2, "pi/2", 0]]}))
    assert cfg.x0(cfg.wavefunction()) == pytest.approx([2, 0, 0], abs=1e-15)


def test_with_seed_and_defaults():
    cfg = ExperimentConfig.from_dict(traj_cfg())
    assert cfg.with_seed(9).seed == 9 and cfg.seed is None
    assert cfg.outputs == {"dir": "runs/t", "regularity": True}
    assert cfg.sample_every == 1.0


def test_invalid_json():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{not json")


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0.1, 5), st.integers(0, 2 ** 31))
def test_roundtrip_preserves_raw_values(phase, r, seed):
    d = traj_cfg(seed=seed, x0={"spherical": [[r, 1.0, phase]]})
    d["state"]["terms"][0]["coefficient"] = {"abs": r, "phase": phase}
    cfg = ExperimentConfig.from_dict(d)
    assert ExperimentConfig.from_json(cfg.to_json()).raw == d
