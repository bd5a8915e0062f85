import hashlib
import json
from fractions import Fraction

import mpmath
import numpy as np

from core.analysis import ratio_band, verify_repelling_bounds
from core.counting import exact_zero_table
from core.rational_maps import RationalMap
from storage.manager import OutputManager, format_value, jsonable


def test_format_value():
    assert format_value(None) == ""
    assert format_value(4 ** 40) == str(4 ** 40)
    assert format_value(Fraction(7, 3)) == "7/3"
    assert format_value(0.1) == "0.1"
    assert format_value(np.float64(0.25)) == "0.25"
    assert format_value(1.5 - 2j) == "1.5-2.0j"
    assert format_value(True) == "true"


def test_jsonable():
    document = jsonable({'a': (1, np.int64(2)), 'b': float('nan'), 'c': 2j, 'd': mpmath.mpf(0.5)})
    assert document == {'a': [1, 2], 'b': None, 'c': [0.0, 2.0], 'd': 0.5}


def test_manifest_lists_written_files(tmp_path):
    output = OutputManager(tmp_path, digest="abc")
    output.save_count_table(exact_zero_table((2, 2), 6))
    manifest = json.loads(output.write_manifest().read_text())
    assert manifest['config_digest'] == "abc"
    for name, digest in manifest['files'].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest


def test_count_json_keeps_exact_integers(tmp_path):
    output = OutputManager(tmp_path, formats=["json"])
    output.save_count_table(exact_zero_table((2, 2), 40))
    rows = json.loads((tmp_path / "counts.json").read_text())['rows']
    assert rows[-1]['E'] == str(4 ** 40 + 2 ** 40)
    assert not (tmp_path / "counts.csv").exists()


def test_parquet_output(tmp_path):
    output = OutputManager(tmp_path, formats=["csv"], parquet=True)
    output.save_count_table(exact_zero_table((2, 2), 5))
    assert "counts.parquet" in output.written


def test_verification_outputs(tmp_path):
    output = OutputManager(tmp_path, digest="d")
    report = ratio_band([2.0] * 10, [1.0] * 10, burn_in=1, claim="demo")
    census = verify_repelling_bounds(RationalMap.polynomial([0, 0, 1]), 2)
    output.save_verification([report], [], census)
    document = json.loads((tmp_path / "verification.json").read_text())
    assert document['pass'] is True
    assert document['reports'][0]['kappa1'] == 2.0
    assert [row['repelling'] for row in document['repelling']] == [1, 3]
    assert (tmp_path / "plot_01_demo.dat").read_text().splitlines()[3] == "# x ratio"
    assert "demo" in (tmp_path / "verification.txt").read_text()
