from pathlib import Path

import pytest

from config.experiment import apply_override, canonical_digest, load_experiment
from core.errors import ConfigurationError

CONFIG_DIR = Path(__file__).parent / "config"
SQUARE = {"label": "z^2", "numerator": [0, 0, 1]}


@pytest.mark.parametrize("name", ["reference.json", "mixed_degrees.json", "single_map.json"])
def test_shipped_experiments_load(name):
    config = load_experiment(CONFIG_DIR / name)
    assert config.maps
    assert len(config.digest) == 64
    assert config.build_system().alphabet_size == len(config.maps)


def test_reference_experiment_values():
    config = load_experiment(CONFIG_DIR / "reference.json")
    assert config.mode == "exact"
    assert config.lam == 4.0
    assert [m.degree for m in config.build_maps()] == [2, 2]
    assert config.build_potential().constant_value == 0.0


def test_unknown_keys_are_rejected(write_config):
    with pytest.raises(ConfigurationError, match="unknown configuration key 'analysis.k_gird'"):
        load_experiment(write_config({"maps": [SQUARE], "analysis": {"k_gird": [1]}}))


def test_overrides_use_dotted_paths(write_config):
    path = write_config({"maps": [SQUARE]})
    config = load_experiment(path, ["analysis.fit_range=[3, 9]", "band_ceiling=2.5"])
    assert config.options.fit_range == (3, 9)
    assert config.options.band_ceiling == 2.5


def test_override_without_value():
    with pytest.raises(ConfigurationError):
        apply_override({"n_max": 3}, "n_max")


def test_digest_ignores_workers_and_output_directory(write_config):
    path = write_config({"maps": [SQUARE]})
    a = load_experiment(path, ["workers=1", 'output.directory="a"'])
    b = load_experiment(path, ["workers=8", 'output.directory="b"'])
    c = load_experiment(path, ["n_max=5"])
    assert a.digest == b.digest
    assert a.digest != c.digest
    assert a.workers == 1 and b.workers == 8


def test_digest_is_key_order_independent():
    assert canonical_digest({"a": 1, "b": [1, 2]}) == canonical_digest({"b": [1, 2], "a": 1})


@pytest.mark.parametrize("document, message", [
    ({"maps": []}, "at least one map"),
    ({"maps": [SQUARE], "mode": "fast"}, "mode"),
    ({"maps": [SQUARE], "mode": "exact", "potential": {"name": "constant", "parameters": {"c": 1}}},
     "zero potential"),
    ({"maps": [SQUARE], "deterministic": False}, "deterministic"),
    ({"maps": [SQUARE], "lambda": "four"}, "lambda"),
    ({"maps": [SQUARE], "output": {"formats": ["xlsx"]}}, "formats"),
    ({"maps": [{"numerator": [0, 0, 1], "denominator": [0]}]}, "map 1"),
    ({"maps": [SQUARE], "potential": {"name": "symbol_weight", "parameters": {"beta": [1, 2]}}},
     "beta"),
])
def test_invalid_experiments(write_config, document, message):
    with pytest.raises(ConfigurationError, match=message):
        load_experiment(write_config(document))


def test_complex_coefficients(write_config):
    config = load_experiment(write_config({"maps": [{"numerator": [[0.1, 0.2], 0, 1]}]}))
    assert config.maps[0].numerator[0] == complex(0.1, 0.2)
