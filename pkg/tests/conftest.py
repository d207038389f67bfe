import numpy as np
import pytest

from fracvqa.core.config import settings


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    """Execuções dos testes nunca escrevem fora do diretório temporário."""
    root = tmp_path / "runs"
    monkeypatch.setattr(settings, "OUTPUT_ROOT", str(root))
    return root


@pytest.fixture
def tiny_config_data():
    """Sub-difusão 4×2 com (n, l) = (2, 2), backend exato."""
    return {
        "name": "tiny",
        "problem": {"kind": "subdiffusion", "alpha": 0.5, "T": 0.5, "N": 4, "M": 2},
        "ansatz": {"n": 2, "l": 2},
        "optimizer": {"method": "quasi_newton", "gradient_method": "parameter_shift"},
        "backend": {"mode": "exact"},
        "encode_restarts": 3,
        "seed": 7,
    }
