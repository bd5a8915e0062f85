"""
Gestionnaire des fichiers de sortie : CSV, JSON, texte, données de tracé, parquet.

Aucune sortie ne contient d'horodatage : une même configuration produit
des fichiers identiques octet pour octet.
"""
import hashlib
import json
import logging
import math
import numbers
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import mpmath
import pandas as pd

from config import settings

logger = logging.getLogger(__name__)


def format_value(value) -> str:
    """Entiers en décimal exact, fractions en p/q, réels en représentation aller-retour."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, 17)
    if isinstance(value, mpmath.mpc):
        return format_value(complex(value))
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, complex):
        sign = "+" if value.imag >= 0 else "-"
        return f"{float(value.real)!r}{sign}{abs(float(value.imag))!r}j"
    return str(value)


def jsonable(obj):
    """Conversion récursive vers des types JSON ; réels non finis → null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, numbers.Integral):
        return int(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (mpmath.mpf, mpmath.mpc)):
        return jsonable(complex(obj) if isinstance(obj, mpmath.mpc) else float(obj))
    if isinstance(obj, complex):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if isinstance(obj, numbers.Real):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, Enum):
        return obj.value
    return str(obj)


class OutputManager:
    """Écrit les résultats d'une expérience dans un dossier et tient le manifeste."""

    def __init__(self, directory, formats: Sequence[str] = tuple(settings.DEFAULT_FORMATS),
                 digest: str = "", parquet: bool = False):
        self.directory = Path(directory)
        self.formats = set(formats)
        self.digest = digest
        self.parquet = parquet
        self.written: Dict[str, str] = {}
        self.directory.mkdir(parents=True, exist_ok=True)

    # ==========================================================================
    # LOW LEVEL
    # ==========================================================================

    def _header(self, content: str) -> List[str]:
        return [
            f"# tool: {settings.TOOL_NAME} {settings.TOOL_VERSION}",
            f"# config_digest: {self.digest}",
            f"# content: {content}",
        ]

    def _envelope(self, kind: str, payload: Dict) -> Dict:
        return {
            'schema': settings.SCHEMA_VERSION,
            'tool': settings.TOOL_NAME,
            'version': settings.TOOL_VERSION,
            'config_digest': self.digest,
            'kind': kind,
            **payload,
        }

    def _write_text(self, name: str, text: str) -> Path:
        path = self.directory / name
        path.write_text(text, encoding="utf-8", newline="\n")
        self._register(path)
        logger.info(f"Saved {path}")
        return path

    def _register(self, path: Path):
        self.written[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def write_json(self, name: str, kind: str, payload: Dict) -> Path:
        document = jsonable(self._envelope(kind, payload))
        text = json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"
        return self._write_text(name, text)

    def write_csv(self, name: str, content: str, frame: pd.DataFrame) -> Path:
        body = frame.map(format_value) if hasattr(frame, 'map') else frame.applymap(format_value)
        text = "\n".join(self._header(content)) + "\n" + body.to_csv(index=False, lineterminator="\n")
        return self._write_text(name, text)

    def write_plot_data(self, name: str, content: str, columns: Sequence[str],
                        rows: Iterable[Sequence]) -> Path:
        lines = self._header(content) + ["# " + " ".join(columns)]
        lines += [" ".join(format_value(v) for v in row) for row in rows]
        return self._write_text(name, "\n".join(lines) + "\n")

    # ==========================================================================
    # COUNT TABLES
    # ==========================================================================

    def save_count_table(self, table, stem: str = "counts") -> List[Path]:
        paths = []
        frame = table.frame()
        if 'csv' in self.formats:
            paths.append(self.write_csv(f"{stem}.csv", "count table (n, E, D, C, mode)", frame))
        if 'json' in self.formats:
            rows = [{'n': n, 'E': format_value(e), 'D': format_value(d), 'C': format_value(c)}
                    for n, e, d, c in zip(frame['n'], table.E, table.D, table.C)]
            paths.append(self.write_json(f"{stem}.json", "count_table", {
                'source': table.source,
                'mode': table.mode.value,
                'degrees': list(table.degrees),
                'maps': list(table.maps),
                'potential': table.potential,
                'lambda': table.lambda_hint,
                'rows': rows,
            }))
        if 'plotdata' in self.formats:
            paths.append(self.write_plot_data(
                f"{stem}_C.dat", "closed orbit counts", ["n", "C"],
                [(n, c) for n, c in zip(frame['n'], table.C)]))
        if self.parquet:
            path = self.directory / f"{stem}.parquet"
            frame.astype({'E': str, 'D': str, 'C': str}).to_parquet(
                path, engine='pyarrow', compression='snappy', index=False)
            self._register(path)
            logger.info(f"Saved {path}")
            paths.append(path)
        return paths

    # ==========================================================================
    # ORBITS / SERIES / CENSUS
    # ==========================================================================

    def save_orbits(self, n: int, orbits: Sequence, stem: Optional[str] = None) -> List[Path]:
        stem = stem or f"orbits_n{n}"
        records = []
        for orbit in orbits:
            rep = orbit.representative
            records.append({
                'word': "-".join(str(letter) for letter in rep.word),
                'z': rep.z.to_json(),
                'multiplicity': orbit.multiplicity,
                'weight_exponent': orbit.weight_exponent,
                'members': [[list(p.word), p.z.to_json()] for p in orbit.members],
            })
        paths = []
        if 'csv' in self.formats:
            frame = pd.DataFrame([{
                'word': r['word'],
                'z': "inf" if r['z'] == "inf" else complex(*r['z']),
                'multiplicity': r['multiplicity'],
                'weight_exponent': r['weight_exponent'],
            } for r in records], columns=['word', 'z', 'multiplicity', 'weight_exponent'])
            paths.append(self.write_csv(f"{stem}.csv", f"closed orbits of length {n}", frame))
        if 'json' in self.formats:
            paths.append(self.write_json(f"{stem}.json", "closed_orbits",
                                         {'n': n, 'count': len(records), 'orbits': records}))
        return paths

    def save_series(self, records: Sequence[Dict], stem: str = "series") -> List[Path]:
        paths = []
        if 'json' in self.formats:
            paths.append(self.write_json(f"{stem}.json", "series", {'series': list(records)}))
        if 'csv' in self.formats:
            frame = pd.DataFrame([{
                'kind': r['kind'],
                'parameters': json.dumps(jsonable(r['parameters']), sort_keys=True),
                'value': r['value'],
                'truncation': json.dumps(jsonable(r.get('truncation', {})), sort_keys=True),
            } for r in records], columns=['kind', 'parameters', 'value', 'truncation'])
            paths.append(self.write_csv(f"{stem}.csv", "series evaluations", frame))
        return paths

    def save_repelling(self, rows: Sequence, map_label: str, stem: str = "repelling") -> List[Path]:
        paths = []
        records = [row.to_dict() for row in rows]
        if 'csv' in self.formats:
            paths.append(self.write_csv(f"{stem}.csv", f"repelling census of {map_label}",
                                        pd.DataFrame(records)))
        if 'json' in self.formats:
            paths.append(self.write_json(f"{stem}.json", "repelling_census",
                                         {'map': map_label, 'rows': records,
                                          'pass': all(r.passed for r in rows)}))
        return paths

    # ==========================================================================
    # VERIFICATION REPORTS
    # ==========================================================================

    def save_verification(self, reports: Sequence, checks: Sequence, census: Sequence = (),
                          stem: str = "verification") -> List[Path]:
        paths = []
        passed = (all(r.passed for r in reports) and all(c.passed for c in checks)
                  and all(row.passed for row in census))
        if 'json' in self.formats:
            paths.append(self.write_json(f"{stem}.json", "verification", {
                'pass': passed,
                'reports': [r.to_dict() for r in reports],
                'identities': [{'name': c.name, 'pass': c.passed,
                                'checked_up_to': c.checked_up_to, 'detail': c.detail}
                               for c in checks],
                'repelling': [row.to_dict() for row in census],
            }))
        paths.append(self._write_text(f"{stem}.txt", self.verification_text(reports, checks, census)))
        if 'plotdata' in self.formats:
            for i, report in enumerate(reports, start=1):
                paths.append(self.write_plot_data(
                    f"plot_{i:02d}_{report.claim}.dat", f"ratio A/B for {report.claim}",
                    ["x", "ratio"], list(report.ratios.items())))
        return paths

    def verification_text(self, reports: Sequence, checks: Sequence, census: Sequence = ()) -> str:
        lines = self._header("verification summary")
        lines.append(f"{'claim':<10} {'kappa1':>14} {'kappa2':>14} {'band':>10} {'ceiling':>8}  verdict")
        lines.append("-" * 72)
        for r in reports:
            k1 = "-" if r.kappa1 is None else f"{r.kappa1:.8g}"
            k2 = "-" if r.kappa2 is None else f"{r.kappa2:.8g}"
            band = "-" if r.band_ratio is None else f"{r.band_ratio:.6g}"
            verdict = "PASS" if r.passed else f"FAIL ({r.cause})"
            lines.append(f"{r.claim:<10} {k1:>14} {k2:>14} {band:>10} {r.band_ceiling:>8g}  {verdict}")
        for c in checks:
            verdict = "PASS" if c.passed else f"FAIL ({c.detail})"
            lines.append(f"{c.name:<34} n<={c.checked_up_to:<6} {verdict}")
        for row in census:
            note = " vacuous lower bound" if row.vacuous_lower else ""
            verdict = "PASS" if row.passed else "FAIL"
            lines.append(f"repelling n={row.n:<4} {row.lower_bound} <= {row.repelling}"
                         f" (+{row.flagged}) <= {row.upper_bound}  {verdict}{note}")
        return "\n".join(lines) + "\n"

    # ==========================================================================
    # MANIFEST
    # ==========================================================================

    def write_manifest(self) -> Path:
        files = dict(sorted(self.written.items()))
        path = self.directory / "manifest.json"
        document = self._envelope("manifest", {'files': files})
        path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8", newline="\n")
        logger.info(f"Saved {path} ({len(files)} files)")
        return path
