"""
Alertes de vérification et enregistrements d'erreur machine-lisibles.
"""
import json
import logging
import sys
from typing import Dict, List, Optional, Sequence, TextIO

logger = logging.getLogger(__name__)


class AlertSystem:
    """Regroupe les affirmations en échec et les signale dans les logs."""

    def __init__(self, band_ceiling: Optional[float] = None):
        from config import settings
        self.band_ceiling = band_ceiling if band_ceiling is not None else settings.BAND_CEILING
        self.alerts: List[Dict] = []

    def check_reports(self, reports: Sequence, checks: Sequence = (),
                      census: Sequence = ()) -> List[Dict]:
        """Construit la liste des alertes ; une liste vide signifie que tout passe."""
        alerts = []

        for check in checks:
            if not check.passed:
                alerts.append({
                    'level': 'CRITICAL',
                    'claim': check.name,
                    'value': f"checked up to n={check.checked_up_to}",
                    'message': f"identity broken: {check.detail}",
                })

        for report in reports:
            if report.passed:
                continue
            band = "n/a" if report.band_ratio is None else f"{report.band_ratio:.4g}"
            alerts.append({
                'level': 'WARNING',
                'claim': report.claim,
                'value': f"band {band} (ceiling {report.band_ceiling:g})",
                'message': report.cause or "band check failed",
            })

        for row in census:
            if not row.passed:
                alerts.append({
                    'level': 'WARNING',
                    'claim': f"repelling n={row.n}",
                    'value': f"{row.repelling} (+{row.flagged} flagged)",
                    'message': f"outside [{row.lower_bound}, {row.upper_bound}]",
                })

        self.alerts.extend(alerts)
        if alerts:
            self._log_grouped_alerts(alerts)
        return alerts

    def _log_grouped_alerts(self, alerts: List[Dict]):
        logger.warning(f"{len(alerts)} verification alert(s)")
        for alert in alerts:
            line = f"[{alert['level']}] {alert['claim']}: {alert['value']} - {alert['message']}"
            if alert['level'] == 'CRITICAL':
                logger.error(line)
            else:
                logger.warning(line)


def emit_error_record(error, stream: Optional[TextIO] = None) -> int:
    """Écrit une ligne JSON {"error", "message", "exit_code"} et renvoie le code de sortie."""
    stream = stream or sys.stderr
    if hasattr(error, 'record'):
        record = error.record()
    else:
        record = {'error': 'internal_error', 'message': str(error), 'exit_code': 3}
    stream.write(json.dumps(record, sort_keys=True) + "\n")
    stream.flush()
    return record['exit_code']
