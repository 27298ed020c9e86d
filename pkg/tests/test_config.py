import pytest
from pydantic import ValidationError

from nh_spinwave.backend.config import Config, load_param_file, merge_params
from nh_spinwave.backend.exception.custom_exception import DomainError, NumericalFailure, SpinWaveException
from nh_spinwave.backend.models import ModelParams


class TestParamFile:
    """KEY=value parameter files."""

    def test_values_and_aliases(self, tmp_path):
        path = tmp_path / "chain.env"
        path.write_text("# published chain\nJ=1\nh=5\ngamma=0.2\ndim=1\nn-sites=200\n")
        values = load_param_file(path)
        assert values == {"J": "1", "h": "5", "gamma": "0.2", "dimension": "1", "n_sites": "200"}
        params = ModelParams(**values)
        assert params.n_sites == 200 and params.gamma == 0.2

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "chain.env"
        path.write_text("h=5\ngamma=0.2\n")
        merged = merge_params(load_param_file(path), {"gamma": -0.2, "h": None, "n-sites": 16})
        assert merged == {"h": "5", "gamma": -0.2, "n_sites": 16}

    def test_no_file(self):
        assert load_param_file(None) == {}

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.env"
        path.write_text("J=1\ntemperature=3\n")
        with pytest.raises(DomainError):
            load_param_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DomainError):
            load_param_file(tmp_path / "absent.env")

    def test_defaults(self):
        assert Config.DT == 1e-3
        assert Config.DIVERGENCE_CAP == 1e6
        assert Config.STEPS == 300


class TestModelValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [{"n_sites": 5}, {"gamma_prime": -0.1}, {"dimension": 0}, {"h": float("nan")}, {"beta": 1.0}],
    )
    def test_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            ModelParams(**kwargs)

    def test_frozen(self):
        params = ModelParams()
        with pytest.raises(ValidationError):
            params.h = 1.0


class TestExceptions:
    """Error records carry where they were raised."""

    def test_location_of_direct_raise(self):
        with pytest.raises(DomainError) as info:
            raise DomainError("bad grid")
        assert info.value.file_name.endswith("test_config.py")
        assert info.value.lineno > 0
        assert "bad grid" in str(info.value)
        assert info.value.exit_code == 1

    def test_wrapping_a_caught_error(self):
        try:
            1 / 0
        except ZeroDivisionError as e:
            wrapped = NumericalFailure("eigensolve failed", e)
        assert wrapped.exit_code == 2
        assert "ZeroDivisionError" in wrapped.traceback_str
        assert isinstance(wrapped, SpinWaveException)
        assert "NumericalFailure" in repr(wrapped)
