"""
Hiérarchie d'erreurs du compteur d'orbites.

Chaque classe porte un identifiant stable (`kind`) et le code de sortie
que la CLI renvoie quand l'erreur remonte jusqu'à elle.
"""
from typing import Optional, Sequence


class SkewOrbitError(Exception):
    """Racine de toutes les erreurs du projet."""
    kind = "error"
    exit_code = 3

    def record(self) -> dict:
        """Enregistrement machine-lisible pour stderr."""
        return {'error': self.kind, 'message': str(self), 'exit_code': self.exit_code}


# ============================================================================
# CONFIGURATION / INPUT (exit 2)
# ============================================================================

class ConfigurationError(SkewOrbitError):
    kind = "configuration_error"
    exit_code = 2


class InputError(SkewOrbitError, ValueError):
    """Précondition violée par l'appelant."""
    kind = "invalid_input"
    exit_code = 2


class EnumerationCapExceeded(InputError):
    kind = "enumeration_cap_exceeded"

    def __init__(self, message: str, cap: int):
        super().__init__(message)
        self.cap = cap


class OutsideConvergenceRegion(InputError):
    kind = "outside_convergence_region"


class OutsideRadius(InputError):
    kind = "outside_radius"


class InvalidMap(InputError):
    kind = "invalid_map"


# ============================================================================
# NUMERICAL (exit 3)
# ============================================================================

class NumericalError(SkewOrbitError):
    kind = "numerical_failure"
    exit_code = 3


class IndeterminateEvaluation(NumericalError):
    kind = "indeterminate_evaluation"


class DegenerateComposition(NumericalError):
    kind = "degenerate_composition"


class TotalDegeneration(NumericalError):
    kind = "total_degeneration"


class NoConvergence(NumericalError):
    kind = "no_convergence"

    def __init__(self, message: str, residuals: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class PeriodDetectionAmbiguous(NumericalError):
    kind = "period_detection_ambiguous"


class PotentialUndefined(NumericalError):
    kind = "potential_undefined"

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message if index is None else f"{message} (orbit index {index})")
        self.index = index


class OrbitClosureMismatch(NumericalError):
    kind = "orbit_closure_mismatch"


class MultiplierUndefined(NumericalError):
    kind = "multiplier_undefined"


class ToleranceUnreachable(NumericalError):
    kind = "tolerance_unreachable"


class TailNotCertifiable(NumericalError):
    kind = "tail_not_certifiable"


class HypothesisImplausible(NumericalError):
    kind = "hypothesis_implausible"


class LambdaNotAdmissible(NumericalError):
    kind = "lambda_not_positive"


class MissingDivisorData(NumericalError):
    kind = "missing_divisor_data"

    def __init__(self, message: str, divisor: int):
        super().__init__(message)
        self.divisor = divisor


class WindowTooShort(NumericalError):
    kind = "window_too_short"


class NonpositiveComparator(NumericalError):
    kind = "nonpositive_comparator"


# ============================================================================
# VERIFICATION (exit 1)
# ============================================================================

class VerificationFailure(SkewOrbitError):
    kind = "verification_failure"
    exit_code = 1
