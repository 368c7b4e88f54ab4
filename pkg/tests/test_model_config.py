import logging
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chemoflow import (
    DomainError,
    Grid,
    InitialData,
    ModelParams,
    OutOfRegimeError,
    ParameterError,
    PotentialSpec,
    ScalarField,
    SensitivitySpec,
    VectorField,
    eval_sensitivity,
    theorem_exponents,
    validate_params,
)


def _init(grid, n_shift=0.0):
    n = np.ones(grid.dims)
    n[2, 3] = n_shift if n_shift else 1.0
    return InitialData(ScalarField(grid, n), ScalarField.constant(grid, 0.5), VectorField.zeros(grid))


def test_valid_params_all_pass():
    p = ModelParams(m=1.2)
    rep = validate_params(p, SensitivitySpec("rotational", (1.0, 0.5), theta=0.3), PotentialSpec([0.0, -1.0]),
                          _init(Grid.unit(8)))
    assert rep.ok and rep.may_start
    assert rep.theorem_regime is True


def test_subthreshold_m_warns_and_blocks(caplog):
    p = ModelParams(m=1.0)
    with caplog.at_level(logging.WARNING, logger="chemoflow.model_config"):
        rep = validate_params(p, SensitivitySpec(), PotentialSpec([0.0, -1.0]))
    assert rep.theorem_regime is False
    assert [c.name for c in rep.failures] == ["theorem_regime"]
    assert not rep.may_start
    assert any("10/9" in r.message for r in caplog.records)
    assert validate_params(p, SensitivitySpec(), PotentialSpec([0.0, -1.0]), override=True).may_start


def test_override_does_not_waive_other_failures():
    g = Grid.unit(8)
    rep = validate_params(ModelParams(m=1.0), SensitivitySpec(), PotentialSpec([0.0, -1.0]), _init(g, -1e-6),
                          override=True)
    assert not rep.may_start


def test_negative_initial_cell_fails():
    rep = validate_params(ModelParams(m=1.5), SensitivitySpec(), PotentialSpec([0.0, -1.0]), _init(Grid.unit(8), -1e-6))
    assert [c.name for c in rep.failures] == ["n0_nonnegative"]


def test_nonsolenoidal_u0_fails():
    g = Grid.unit(8)
    x, y = g.face_coords(0)
    u = VectorField(g, [np.sin(np.pi * x) * (1 + y), np.zeros(g.face_shape(1))])
    init = InitialData(ScalarField.constant(g, 1.0), ScalarField.constant(g, 1.0), u)
    rep = validate_params(ModelParams(m=1.5), SensitivitySpec(), PotentialSpec([0.0, 0.0]), init)
    assert [c.name for c in rep.failures] == ["u0_solenoidal"]


def test_validation_is_deterministic():
    args = (ModelParams(m=1.5), SensitivitySpec("saturating", (0.5, 1.0)), PotentialSpec([1.0, 0.0]))
    assert validate_params(*args).to_dict() == validate_params(*args).to_dict()


def test_dimension_mismatch_fails():
    rep = validate_params(ModelParams(m=1.5, dim=3), SensitivitySpec(), PotentialSpec([0.0, -1.0]))
    assert {c.name for c in rep.failures} == {"sensitivity_dim", "potential_dim"}


def test_one_dimensional_runs_fail_dimension_check():
    rep = validate_params(ModelParams(m=1.5, dim=1), SensitivitySpec(dim=1), PotentialSpec([0.0]))
    assert [c.name for c in rep.failures] == ["dimension"]


@pytest.mark.parametrize("field,value", [("m", math.nan), ("kappa", math.inf), ("epsilon", "x"), ("m", -1.0),
                                         ("epsilon", 0.0), ("epsilon", 1.5), ("c_d_lower", 0.0)])
def test_bad_params_rejected(field, value):
    with pytest.raises(ParameterError):
        ModelParams(**{"m": 1.5, field: value})


def test_bracket_order():
    with pytest.raises(ParameterError):
        ModelParams(m=1.5, c_d_lower=2.0, c_d_upper=1.0)
    assert ModelParams(m=1.5, c_d_lower=2.0).c_d_upper == 2.0


def test_scalar_sensitivity_constant_profile():
    s = SensitivitySpec("scalar", (1.0,))
    t = eval_sensitivity(s, (0.2, 0.3), 5.0, 7.0)
    # normalised so |S|_F = S_0 = 1
    assert np.allclose(t, np.eye(2) / np.sqrt(2))
    assert np.linalg.norm(t) == pytest.approx(1.0)


def test_rotational_quarter_turn():
    c = 3.0
    s = SensitivitySpec("rotational", (0.0, 1.0), theta=np.pi / 2)
    t = eval_sensitivity(s, (0.5, 0.5), 1.0, c)
    assert np.allclose(t, c * np.array([[0.0, -1.0], [1.0, 0.0]]) / np.sqrt(2), atol=1e-15)
    assert np.linalg.norm(t) == pytest.approx(c, rel=1e-14)


def test_rotational_3d_axis():
    s = SensitivitySpec("rotational", (2.0,), theta=np.pi / 2, axis=(0.0, 0.0, 5.0), dim=3)
    t = eval_sensitivity(s, (0.1, 0.2, 0.3), 0.0, 0.0) * np.sqrt(3) / 2
    assert np.allclose(t, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


def test_saturating_bound():
    s = SensitivitySpec("saturating", (1.0, 2.0))
    for n in (0.0, 0.5, 10.0, 1e6):
        assert np.linalg.norm(eval_sensitivity(s, (0, 0), n, 2.0)) <= 5.0 + 1e-12


def test_sensitivity_domain_errors():
    s = SensitivitySpec()
    with pytest.raises(DomainError):
        eval_sensitivity(s, (0, 0), -1.0, 1.0)
    with pytest.raises(DomainError):
        eval_sensitivity(s, (0, 0), 1.0, -1e-9)
    with pytest.raises(ParameterError):
        SensitivitySpec("spiral")
    with pytest.raises(ParameterError):
        SensitivitySpec("scalar", (1.0, -0.1))


@given(
    st.sampled_from(["scalar", "rotational", "saturating"]),
    st.lists(st.floats(0, 5), min_size=1, max_size=3),
    st.floats(-7, 7),
    st.sampled_from([2, 3]),
    st.integers(0, 2**32 - 1),
)
def test_frobenius_bound_property(family, coeffs, theta, dim, seed):
    s = SensitivitySpec(family, tuple(coeffs), theta=theta, dim=dim, axis=(1.0, 2.0, -1.0) if dim == 3 else None)
    r = np.random.default_rng(seed)
    n = r.uniform(0, 100, 1000)
    c = r.uniform(0, 100, 1000)
    norms = np.linalg.norm(s.tensor(r.random((1000, dim)), n, c), axis=(-2, -1))
    assert np.all(norms <= s.s0(c) * (1 + 1e-14) + 1e-12)


def test_s0_polynomial_horner():
    s = SensitivitySpec("scalar", (1.0, 2.0, 3.0))
    assert s.s0(2.0) == pytest.approx(1 + 4 + 12)


def test_potential_spec():
    phi = PotentialSpec([3.0, -4.0])
    assert phi.is_constant and phi.sup_norm == 5.0
    g = Grid.unit(4)
    field = np.zeros((2,) + g.dims)
    field[1, 1, 1] = -2.0
    sampled = PotentialSpec(field)
    assert not sampled.is_constant and sampled.sup_norm == 2.0
    assert sampled.component_at_cells(1, g)[1, 1] == -2.0


def test_exponents_m2():
    t = theorem_exponents(2)
    assert t.as_tuple() == (Fraction(8, 3), Fraction(2), Fraction(8, 5), Fraction(20, 11))
    assert all(isinstance(x, Fraction) for x in t.as_tuple())


def test_exponents_m3():
    assert theorem_exponents(3).as_tuple() == (Fraction(16, 3), None, Fraction(16, 11), Fraction(5, 4))


def test_exponents_generic_branch_formulas():
    m = Fraction(3, 2)
    t = theorem_exponents(m)
    assert t.n_exponent == (3 * m + 2) / 3
    assert t.grad_n_exponent == (3 * m + 2) / 4
    assert t.flux_exponent == 4 * (3 * m + 2) / (3 * m + 14)


@pytest.mark.parametrize("m", [Fraction(10, 9), 1.0, 0.5])
def test_exponents_out_of_regime(m):
    with pytest.raises(OutOfRegimeError):
        theorem_exponents(m)


def test_n_exponent_continuous_at_two():
    below = theorem_exponents(Fraction(2)).n_exponent
    above = theorem_exponents(Fraction(2) + Fraction(1, 10**9)).n_exponent
    assert abs(float(below - above)) < 1e-8
