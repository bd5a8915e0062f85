"""
Chargement et validation d'une expérience JSON.

Le fichier est fusionné avec DEFAULTS (clés inconnues refusées), puis les
surcharges `--set clé.pointée=valeur` sont appliquées. Le digest est le
SHA-256 du JSON canonique de la configuration effective, sans `workers` ni
`output.directory`.
"""
import copy
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from config import settings
from core.analysis import VerificationOptions
from core.errors import ConfigurationError, InputError
from core.potentials import Potential, build_potential
from core.rational_maps import RationalMap
from core.skew_dynamics import SkewSystem, Tolerances

logger = logging.getLogger(__name__)

MODES = ("exact", "numeric", "auto")
PRECISIONS = ("standard", "extended")
FORMATS = ("csv", "json", "plotdata")

DEFAULTS: Dict = {
    'maps': [],
    'potential': {'name': 'zero', 'parameters': {}},
    'n_max': 8,
    'N_max': 100,
    'lambda': None,
    'mode': 'auto',
    'precision': 'standard',
    'deterministic': True,
    'workers': settings.DEFAULT_WORKERS,
    'tolerances': {
        'root_cluster': settings.ROOT_CLUSTER_TOL,
        'period_closure': settings.PERIOD_CLOSURE_TOL,
        'residual_ceiling': settings.ROOT_RESIDUAL_CEILING,
        'orbit_match': settings.ORBIT_MATCH_TOL,
    },
    'caps': {
        'max_degree': settings.MAX_DEGREE,
        'max_words': settings.MAX_WORDS,
        'zeta_terms': settings.ZETA_MAX_TERMS,
    },
    'burn_in': settings.BURN_IN,
    'band_ceiling': settings.BAND_CEILING,
    'analysis': {
        'k_grid': list(settings.DEFAULT_K_GRID),
        'tail_tol': settings.MEISSEL_TAIL_TOL,
        'z_grid': list(settings.DEFAULT_Z_GRID),
        'dirichlet_N': 40,
        'dirichlet_start': settings.DIRICHLET_WINDOW_START,
        'rho_fractions': list(settings.DEFAULT_RHO_FRACTIONS),
        'fit_range': [5, 20],
        'identity_N': 200,
    },
    'orbits': {'n': 2},
    'repelling': {'n_max': 6},
    'output': {
        'directory': settings.DEFAULT_OUTPUT_DIRECTORY,
        'formats': list(settings.DEFAULT_FORMATS),
        'parquet': False,
    },
}

DIGEST_EXCLUDED = (('workers',), ('output', 'directory'))


# ==============================================================================
# PARSING HELPERS
# ==============================================================================

def _merge(base: Dict, updates: Dict, path: str = "") -> Dict:
    merged = copy.deepcopy(base)
    for key, value in updates.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown configuration key '{where}'")
        if isinstance(base[key], dict) and key != 'potential':
            if not isinstance(value, dict):
                raise ConfigurationError(f"'{where}' must be an object")
            merged[key] = _merge(base[key], value, f"{where}.")
        else:
            merged[key] = value
    return merged


def _parse_override(text: str) -> Tuple[List[str], object]:
    if "=" not in text:
        raise ConfigurationError(f"override '{text}' must look like key.path=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_override(raw: Dict, text: str) -> Dict:
    """Applique une surcharge `a.b.c=valeur` (valeur JSON, sinon chaîne)."""
    keys, value = _parse_override(text)
    patch: Dict = value
    for key in reversed(keys):
        patch = {key: patch}
    return _merge(raw, patch)


def _coefficient(value, where: str) -> complex:
    if isinstance(value, bool):
        raise ConfigurationError(f"{where}: booleans are not coefficients")
    if isinstance(value, (int, float)):
        return complex(float(value), 0.0)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(float(value[0]), float(value[1]))
    raise ConfigurationError(f"{where}: expected a number or an [re, im] pair, got {value!r}")


def _number(raw: Dict, key: str, minimum: float, integer: bool = False):
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"'{key}' must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigurationError(f"'{key}' must be an integer, got {value!r}")
    if not value >= minimum:
        raise ConfigurationError(f"'{key}' must be >= {minimum}, got {value!r}")
    return int(value) if integer else float(value)


def canonical_digest(raw: Dict) -> str:
    trimmed = copy.deepcopy(raw)
    for path in DIGEST_EXCLUDED:
        node = trimmed
        for key in path[:-1]:
            node = node.get(key, {})
        node.pop(path[-1], None)
    canonical = json.dumps(trimmed, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ==============================================================================
# CONFIG
# ==============================================================================

@dataclass(frozen=True)
class MapSpec:
    numerator: Tuple[complex, ...]
    denominator: Tuple[complex, ...]
    label: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    maps: Tuple[MapSpec, ...]
    potential_name: str
    potential_parameters: Dict
    n_max: int
    N_max: int
    lam: Optional[float]
    mode: str
    precision: str
    tolerances: Tolerances
    max_degree: int
    max_words: int
    zeta_terms: int
    options: VerificationOptions
    orbit_n: int
    repelling_n_max: int
    output_directory: Path
    formats: Tuple[str, ...]
    parquet: bool
    workers: int
    raw: Dict
    digest: str

    def build_maps(self) -> List[RationalMap]:
        built = []
        for i, spec in enumerate(self.maps, start=1):
            try:
                built.append(RationalMap.from_coefficients(
                    spec.numerator, spec.denominator, label=spec.label or f"R{i}",
                    cluster_tol=self.tolerances.root_cluster))
            except InputError as exc:
                raise ConfigurationError(f"map {i}: {exc}") from exc
        return built

    def build_system(self) -> SkewSystem:
        return SkewSystem(self.build_maps(), self.tolerances, self.max_degree, self.max_words,
                          self.precision, self.workers)

    def build_potential(self) -> Potential:
        return build_potential(self.potential_name, self.potential_parameters, len(self.maps))

    def map_labels(self) -> Tuple[str, ...]:
        return tuple(spec.label or f"R{i}" for i, spec in enumerate(self.maps, start=1))


def _map_spec(entry, i: int) -> MapSpec:
    if not isinstance(entry, dict):
        raise ConfigurationError(f"map {i} must be an object with 'numerator'/'denominator'")
    unknown = set(entry) - {'numerator', 'denominator', 'label'}
    if unknown:
        raise ConfigurationError(f"map {i}: unknown keys {sorted(unknown)}")
    numerator = entry.get('numerator')
    denominator = entry.get('denominator', [1])
    for name, coeffs in (('numerator', numerator), ('denominator', denominator)):
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigurationError(f"map {i}: '{name}' must be a non-empty list")
    return MapSpec(
        tuple(_coefficient(c, f"map {i} numerator") for c in numerator),
        tuple(_coefficient(c, f"map {i} denominator") for c in denominator),
        str(entry.get('label', "")),
    )


def validate(raw: Dict) -> ExperimentConfig:
    """Valide la configuration effective et construit l'ExperimentConfig."""
    if not isinstance(raw['maps'], list) or not raw['maps']:
        raise ConfigurationError("configuration needs at least one map")
    maps = tuple(_map_spec(entry, i) for i, entry in enumerate(raw['maps'], start=1))

    potential = raw['potential']
    if not isinstance(potential, dict) or 'name' not in potential:
        raise ConfigurationError("'potential' must be an object with a 'name'")
    if set(potential) - {'name', 'parameters'}:
        raise ConfigurationError(f"unknown potential keys {sorted(set(potential) - {'name', 'parameters'})}")
    parameters = potential.get('parameters') or {}

    mode = raw['mode']
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "exact" and potential['name'] != "zero":
        raise ConfigurationError("mode 'exact' requires the zero potential")
    if raw['precision'] not in PRECISIONS:
        raise ConfigurationError(f"precision must be one of {PRECISIONS}, got {raw['precision']!r}")
    if raw['deterministic'] is not True:
        raise ConfigurationError("'deterministic' cannot be disabled")

    lam = raw['lambda']
    if lam is not None and (isinstance(lam, bool) or not isinstance(lam, (int, float))
                            or not math.isfinite(lam)):
        raise ConfigurationError(f"'lambda' must be a real number, got {lam!r}")

    tol = raw['tolerances']
    caps = raw['caps']
    analysis = raw['analysis']
    output = raw['output']
    formats = output['formats']
    if not isinstance(formats, list) or not set(formats) <= set(FORMATS):
        raise ConfigurationError(f"output.formats must be a subset of {FORMATS}, got {formats!r}")
    fit_range = analysis['fit_range']
    if not (isinstance(fit_range, list) and len(fit_range) == 2):
        raise ConfigurationError(f"analysis.fit_range must be [start, end], got {fit_range!r}")

    try:
        options = VerificationOptions(
            N_max=_number(raw, 'N_max', 1, integer=True),
            burn_in=_number(raw, 'burn_in', 1),
            band_ceiling=_number(raw, 'band_ceiling', 1.0),
            k_grid=tuple(float(k) for k in analysis['k_grid']),
            tail_tol=float(analysis['tail_tol']),
            z_grid=tuple(_coefficient(z, "analysis.z_grid") for z in analysis['z_grid']),
            dirichlet_N=int(analysis['dirichlet_N']),
            dirichlet_start=int(analysis['dirichlet_start']),
            rho_fractions=tuple(float(f) for f in analysis['rho_fractions']),
            fit_range=(int(fit_range[0]), int(fit_range[1])),
            identity_N=int(analysis['identity_N']),
            zeta_terms=int(caps['zeta_terms']),
        )
        tolerances = Tolerances(float(tol['root_cluster']), float(tol['period_closure']),
                                float(tol['residual_ceiling']), float(tol['orbit_match']))
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed analysis or tolerance settings: {exc}") from exc

    config = ExperimentConfig(
        maps=maps,
        potential_name=str(potential['name']),
        potential_parameters=dict(parameters),
        n_max=_number(raw, 'n_max', 1, integer=True),
        N_max=options.N_max,
        lam=None if lam is None else float(lam),
        mode=mode,
        precision=raw['precision'],
        tolerances=tolerances,
        max_degree=int(caps['max_degree']),
        max_words=int(caps['max_words']),
        zeta_terms=int(caps['zeta_terms']),
        options=options,
        orbit_n=int(raw['orbits']['n']),
        repelling_n_max=int(raw['repelling']['n_max']),
        output_directory=Path(output['directory']),
        formats=tuple(formats),
        parquet=bool(output['parquet']),
        workers=max(1, int(raw['workers'])),
        raw=raw,
        digest=canonical_digest(raw),
    )

    built = config.build_maps()
    config.build_potential()
    if all(m.degree < 2 for m in built):
        logger.warning("no map has degree >= 2: growth hypotheses of the counting theorems do not apply")
    return config


def load_experiment(path: Optional[Union[str, Path]] = None,
                    overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Lit le fichier (optionnel), applique les surcharges et valide."""
    raw = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(document, dict):
            raise ConfigurationError(f"config file {path} must hold a JSON object")
        raw = _merge(raw, document)
    for text in overrides:
        raw = apply_override(raw, text)
    config = validate(raw)
    logger.debug(f"Experiment loaded, digest {config.digest[:16]}")
    return config
