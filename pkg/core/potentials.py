"""
Potentiels f : X → ℝ évaluables le long d'une orbite.

Un potentiel reçoit le bloc de mot courant (rotation du mot périodique,
première lettre = symbole appliqué), le point de fibre et la liste des
applications.
"""
import math
from abc import ABC, abstractmethod
from typing import Callable, Dict, Optional, Sequence, Tuple

from core.errors import ConfigurationError, MultiplierUndefined, PotentialUndefined
from core.rational_maps import RationalMap, SpherePoint, derivative

Word = Tuple[int, ...]


class Potential(ABC):
    name = "potential"

    @abstractmethod
    def __call__(self, word: Word, point: SpherePoint, maps: Sequence[RationalMap]) -> float:
        ...

    @property
    def constant_value(self) -> Optional[float]:
        """Valeur si le potentiel est constant sur X, sinon None."""
        return None

    def parameters(self) -> Dict:
        return {}

    def describe(self) -> Dict:
        return {'name': self.name, 'parameters': self.parameters()}


class Zero(Potential):
    name = "zero"

    def __call__(self, word, point, maps) -> float:
        return 0.0

    @property
    def constant_value(self) -> float:
        return 0.0


class Constant(Potential):
    name = "constant"

    def __init__(self, c: float):
        if not math.isfinite(c):
            raise ConfigurationError(f"constant potential must be finite, got {c}")
        self.c = float(c)

    def __call__(self, word, point, maps) -> float:
        return self.c

    @property
    def constant_value(self) -> float:
        return self.c

    def parameters(self) -> Dict:
        return {'c': self.c}


class SymbolWeight(Potential):
    """f(ω, z) = β_{ω₁}."""
    name = "symbol_weight"

    def __init__(self, beta: Sequence[float]):
        if not beta or not all(math.isfinite(b) for b in beta):
            raise ConfigurationError(f"symbol weights must be finite reals, got {beta}")
        self.beta = tuple(float(b) for b in beta)

    def __call__(self, word, point, maps) -> float:
        return self.beta[word[0] - 1]

    def parameters(self) -> Dict:
        return {'beta': list(self.beta)}


class LogModulusDerivative(Potential):
    """f(ω, z) = log|R'_{ω₁}(z)|, indéfini à l'infini, aux points critiques et aux pôles."""
    name = "log_modulus_derivative"

    def __call__(self, word, point, maps) -> float:
        if point.infinite:
            raise PotentialUndefined("log|R'| is undefined at infinity")
        try:
            value = derivative(maps[word[0] - 1])(point.value)
        except MultiplierUndefined as exc:
            raise PotentialUndefined(f"log|R'| is undefined at a pole: {exc}") from exc
        if value == 0:
            raise PotentialUndefined(f"log|R'| is undefined at the critical point {point}")
        return math.log(abs(value))


class PlugIn(Potential):
    """Potentiel fourni par l'appelant : func(rotation du mot, point) -> réel."""
    name = "plugin"

    def __init__(self, func: Callable[[Word, SpherePoint], float], label: str = "plugin"):
        self.func = func
        self.label = label

    def __call__(self, word, point, maps) -> float:
        return float(self.func(word, point))

    def parameters(self) -> Dict:
        return {'label': self.label}


def build_potential(name: str, parameters: Optional[Dict], alphabet_size: int) -> Potential:
    """Instancie un potentiel depuis la configuration."""
    parameters = parameters or {}
    if name == "zero":
        return Zero()
    if name == "constant":
        if 'c' not in parameters:
            raise ConfigurationError("constant potential needs parameter 'c'")
        return Constant(float(parameters['c']))
    if name == "symbol_weight":
        beta = parameters.get('beta')
        if not isinstance(beta, list) or len(beta) != alphabet_size:
            raise ConfigurationError(
                f"symbol_weight needs 'beta' with {alphabet_size} values, got {beta!r}")
        return SymbolWeight([float(b) for b in beta])
    if name == "log_modulus_derivative":
        return LogModulusDerivative()
    if name == "plugin":
        raise ConfigurationError("plugin potentials are only available from Python code")
    raise ConfigurationError(f"unknown potential '{name}'")
