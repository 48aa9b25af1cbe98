import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavepinn.activations import (
    COEF_NAMES,
    ActivationSpec,
    activation_value,
    all_activation_names,
    hermite_poly,
    init_activation,
    inverse_softplus,
    parse_activation,
    softplus_map,
)
from wavepinn.autodiff import Tape, scalar_param, softplus_value

from helpers import SOFTGABOR_AT_1, SOFTGAUSS_AT_1, SOFTPLUS_0, SOFTPLUS_1, activation_jet_error, activation_mp, ten_variants


def spec_with(name, **eff):
    kind = parse_activation(name)
    return ActivationSpec(kind, {c: inverse_softplus(eff[c]) for c in kind.coefficients})


class TestNames:
    def test_all_names_parse_round_trip(self):
        names = all_activation_names()
        assert len(names) == 17
        for n in names:
            assert parse_activation(n).name == n

    def test_w_suffix(self):
        k = parse_activation("softgabortanhw")
        assert k.w_variant and k.family == "softgabortanh"
        assert parse_activation("softher3tanh").order == 3

    @pytest.mark.parametrize("bad", ["relu", "softher5tanh", "softgabor", "tanhww", ""])
    def test_unknown_names(self, bad):
        with pytest.raises(ValueError):
            parse_activation(bad)

    def test_coefficient_sets(self):
        assert parse_activation("softmextanh").coefficients == ("alpha", "beta", "gamma")
        assert parse_activation("softmortanh").coefficients == ("omega", "sigma", "beta")
        assert parse_activation("softgausstanh").coefficients == ("alpha", "beta")
        assert parse_activation("softgabortanh").coefficients == ("sigma", "omega", "beta")
        assert parse_activation("softher1tanh").coefficients == ("alpha", "beta")
        assert parse_activation("tanh").coefficients == ()
        assert COEF_NAMES == ("alpha", "beta", "gamma", "omega", "sigma")


class TestSoftplus:
    def test_values(self):
        t = Tape()
        assert math.isclose(softplus_map(scalar_param(t, 0.0)).primal, SOFTPLUS_0, rel_tol=1e-15)
        assert math.isclose(softplus_map(scalar_param(t, 1.0)).primal, SOFTPLUS_1, rel_tol=1e-15)
        v = softplus_map(scalar_param(t, -40.0)).primal
        assert 0 < v < 1e-17

    @given(st.floats(-10, 10, allow_nan=False))
    def test_positive(self, raw):
        assert softplus_value(raw) > 0

    @given(st.floats(0.01, 20, allow_nan=False))
    def test_inverse(self, y):
        assert math.isclose(softplus_value(inverse_softplus(y)), y, rel_tol=1e-12)


class TestHermite:
    def test_values(self):
        assert hermite_poly(2, 1.0) == 2.0
        assert hermite_poly(3, 0.0) == 0.0
        assert hermite_poly(4, 1.0) == -20.0
        assert hermite_poly(1, 0.5) == 1.0

    def test_unsupported_order(self):
        with pytest.raises(ValueError):
            hermite_poly(5, 1.0)


class TestFormulas:
    def test_softgauss_at_one(self):
        v = activation_value(spec_with("softgausstanh", alpha=1.0, beta=1.0), 1.0)
        assert math.isclose(v, SOFTGAUSS_AT_1, rel_tol=1e-14)

    def test_softmex_zero_factor(self):
        v = activation_value(spec_with("softmextanh", alpha=1.0, beta=1.0, gamma=1.0), 1.0)
        assert abs(v) < 1e-15

    def test_softgabor_at_one(self):
        v = activation_value(spec_with("softgabortanh", sigma=1.0, omega=math.pi, beta=1.0), 1.0)
        assert math.isclose(v, SOFTGABOR_AT_1, rel_tol=1e-14)

    @pytest.mark.parametrize("name", [n for n in all_activation_names() if n != "tanh"])
    def test_odd_at_origin(self, name):
        assert activation_value(init_activation(name), 0.0) == 0.0

    @pytest.mark.parametrize("name", [n for n in all_activation_names() if n != "tanh"])
    def test_matches_mp_closed_form(self, name):
        spec = init_activation(name)
        f = activation_mp(name, spec.effective())
        for x in (-2.5, -0.3, 0.7, 1.9):
            assert math.isclose(activation_value(spec, x), float(f(mp.mpf(x))), rel_tol=1e-13, abs_tol=1e-15)

    @given(st.sampled_from([n for n in all_activation_names() if n != "tanh"]), st.data())
    def test_decay(self, name, data):
        # sigma enters as the envelope rate 1/(2 sigma^2); that rate is drawn from [0.1, 10]
        kind = parse_activation(name)
        eff = {c: data.draw(st.floats(0.1, 10)) for c in kind.coefficients}
        if "sigma" in eff:
            eff["sigma"] = 1.0 / math.sqrt(2.0 * eff["sigma"])
        spec = spec_with(name, **eff)
        xs = np.array([-60.0, -25.0, -20.5, 20.5, 30.0, 100.0])
        assert np.all(np.abs(activation_value(spec, xs)) < 1e-6)

    @pytest.mark.parametrize("name", ten_variants() + ["tanh", "softher1tanh", "softher3tanh", "softher4tanhw"])
    def test_jet_vs_oracle(self, name):
        assert activation_jet_error(name) < 1e-6

    def test_trainable_coefficients_on_tape(self):
        spec = init_activation("softgabortanh")
        t = Tape()
        bound = spec.bind(t)
        assert t.parameter_count == 3
        assert set(bound.raw) == {"sigma", "omega", "beta"}


class TestInit:
    def test_softgauss(self):
        s = init_activation("softgausstanh")
        assert s.raw == {"alpha": 1.0, "beta": 1.0}
        assert s.trainable_names == ["alpha", "beta"]

    def test_gabor_w_omega5(self):
        s = init_activation("softgabortanhw", gabor_omega_init=5)
        assert s.raw["omega"] == 5.0 and s.raw["beta"] == 1.0
        assert "beta" not in s.trainable_names and "omega" in s.trainable_names

    def test_tanh_has_no_coefficients(self):
        s = init_activation("tanh")
        assert s.raw == {} and s.trainable_names == []

    def test_invalid_gabor_omega(self):
        with pytest.raises(ValueError):
            init_activation("softgabortanh", gabor_omega_init=4)

    def test_effective_mode(self):
        s = init_activation("softmextanh", init_mode="effective")
        assert all(math.isclose(v, 1.0, rel_tol=1e-12) for v in s.effective().values())

    def test_w_variant_beta_is_constant_on_tape(self):
        t = Tape()
        init_activation("softgausstanhw").bind(t)
        assert t.parameter_count == 1

    def test_dict_round_trip(self):
        s = init_activation("softher2tanhw")
        s.raw["alpha"] = 0.123
        assert ActivationSpec.from_dict(s.to_dict()) == s
