"""
Système de logging : sortie console, fichier optionnel dans le dossier de sortie.
"""
import logging
import sys
from pathlib import Path
from typing import Optional, Union


def setup_logging(level: Optional[str] = None,
                  log_file: Optional[Union[str, Path]] = None) -> logging.Logger:
    """Configure le logger racine ; un nouvel appel remplace les handlers existants."""
    from config import settings

    level = (level or settings.LOG_LEVEL).upper()
    logger = logging.getLogger()
    logger.setLevel(level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(settings.LOG_FORMAT, datefmt=settings.LOG_DATEFMT)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.debug(f"Logging initialized at {level}" + (f", file {log_file}" if log_file else ""))
    return logger


def log_section_header(message: str):
    """Affiche un header de section visuellement distinct."""
    logger = logging.getLogger(__name__)
    logger.info("=" * 80)
    logger.info(f"  {message}")
    logger.info("=" * 80)


def log_count_summary(table):
    """Résumé pointillé d'une CountTable."""
    logger = logging.getLogger(__name__)

    logger.info("-" * 80)
    logger.info("COUNT TABLE SUMMARY")
    logger.info("-" * 80)

    n = table.n_max
    rows = [
        ('Source', table.source),
        ('Mode', table.mode.value),
        ('Degrees', ", ".join(str(r) for r in table.degrees)),
        ('Potential', table.potential.get('name', '?')),
        ('n_max', n),
        (f'E({n})', _short(table.E_at(n))),
        (f'C({n})', _short(table.C_at(n))),
        ('Config digest', table.digest[:16] or '-'),
    ]
    for label, value in rows:
        logger.info(f"  {label:.<40} {value}")

    logger.info("-" * 80)


def _short(value) -> str:
    text = str(value)
    return text if len(text) <= 32 else f"{text[:12]}...{text[-8:]} ({len(text)} chars)"
