import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdout.model import (
    SCENARIO_KEYS,
    ControlPath,
    HerdingScenario,
    HouseholdParams,
    MarketParams,
    ValidationError,
    dumps_scenario,
    loads_scenario,
    make_uniform_grid,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)


def test_baseline_scenario_is_valid(baseline):
    assert validate_scenario(baseline) is baseline
    assert baseline.follower == HouseholdParams(0.2, 0.2, 1.0, 1.0)
    assert baseline.leader == HouseholdParams(0.4, 0.4, 1.0, 1.0)
    assert baseline.theta == 0.01


def test_zero_sigma_rejected(baseline):
    with pytest.raises(ValidationError, match="sigma must be > 0"):
        validate_scenario(baseline.replace(sigma=0.0))


def test_negative_theta_rejected(baseline):
    with pytest.raises(ValidationError, match="theta must be ≥ 0"):
        validate_scenario(baseline.replace(theta=-0.1))


@pytest.mark.parametrize("field", ["r", "T", "rho", "follower.alpha", "follower.beta", "leader.gamma"])
def test_strict_positivity(baseline, field):
    d = scenario_to_dict(baseline)
    d[field] = 0.0
    with pytest.raises(ValidationError, match=field.split(".")[-1]):
        scenario_from_dict(d)


@pytest.mark.parametrize("field", ["v", "follower.x0"])
def test_non_finite_rejected(baseline, field):
    d = scenario_to_dict(baseline)
    d[field] = math.inf
    with pytest.raises(ValidationError, match="finite"):
        scenario_from_dict(d)


def test_scenario_keys_exact(baseline):
    assert tuple(scenario_to_dict(baseline)) == SCENARIO_KEYS
    d = scenario_to_dict(baseline)
    del d["leader.x0"]
    with pytest.raises(ValidationError, match="leader.x0"):
        scenario_from_dict(d)
    d = scenario_to_dict(baseline)
    d["kappa"] = 1.0
    with pytest.raises(ValidationError, match="kappa"):
        scenario_from_dict(d)


def test_malformed_json_names_line():
    with pytest.raises(ValidationError, match="line 2"):
        loads_scenario('{"r": 0.01,\n}')


@st.composite
def scenarios(draw):
    pos = st.floats(1e-3, 50, allow_nan=False)
    real = st.floats(-1e3, 1e3, allow_nan=False)
    return HerdingScenario(
        MarketParams(draw(pos), draw(real), draw(pos), draw(pos), draw(pos)),
        HouseholdParams(draw(pos), draw(pos), draw(pos), draw(real)),
        HouseholdParams(draw(pos), draw(pos), draw(pos), draw(real)),
        draw(st.floats(0, 1e6, allow_nan=False)),
    )


@given(scenarios())
def test_round_trip(s):
    back = loads_scenario(dumps_scenario(s))
    assert back == s
    assert json.loads(dumps_scenario(s)) == scenario_to_dict(s)


_value = st.one_of(
    st.sampled_from([0.0, -0.0, 1e-300, -1e-300, math.inf, -math.inf, math.nan, 1.0, -1.0]),
    st.floats(-10, 10),
)


@given(st.fixed_dictionaries({k: _value for k in SCENARIO_KEYS}))
def test_validation_accepts_exactly_the_invariant_set(d):
    finite = all(math.isfinite(x) for x in d.values())
    positive = ["r", "sigma", "T", "rho"] + [f"{w}.{k}" for w in ("follower", "leader") for k in ("alpha", "beta", "gamma")]
    expected = finite and all(d[k] > 0 for k in positive) and d["theta"] >= 0
    try:
        scenario_from_dict(d)
        accepted = True
    except ValidationError:
        accepted = False
    assert accepted == expected


def test_grid_endpoints_only():
    g = make_uniform_grid(1.0, 2)
    assert g.times.tolist() == [0.0, 1.0]


def test_grid_unit_spacing():
    g = make_uniform_grid(10.0, 11)
    assert np.all(np.diff(g.times) == 1.0)


def test_grid_fine_spacing():
    g = make_uniform_grid(10.0, 1025)
    assert g.times[0] == 0.0 and g.times[-1] == 10.0
    assert g.step == 10.0 / 1024
    np.testing.assert_allclose(np.diff(g.times), 10.0 / 1024, rtol=1e-12)


@pytest.mark.parametrize("T,n", [(10.0, 1), (10.0, 0), (0.0, 5), (-1.0, 5), (10.0, 2.5)])
def test_grid_rejects(T, n):
    with pytest.raises(ValidationError):
        make_uniform_grid(T, n)


def test_control_path_shape_and_immutability():
    g = make_uniform_grid(1.0, 3)
    p = ControlPath(g, [1.0, -2.0, 3.0], [0.5, 0.5, 0.5])
    assert p.is_admissible()
    with pytest.raises(ValueError):
        p.investment[0] = 9.0
    with pytest.raises(ValidationError):
        ControlPath(g, [1.0, 2.0], [1.0, 1.0, 1.0])
    assert not ControlPath(g, [0, 0, 0], [1.0, 0.0, 1.0]).is_admissible()


def test_replace_unknown_field(baseline):
    with pytest.raises(ValidationError, match="unknown"):
        baseline.replace(gamma=2)
    assert baseline.replace(follower_gamma=2.0).follower.gamma == 2.0
