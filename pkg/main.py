"""
Point d'entrée CLI du compteur d'orbites.

Usage:
    python main.py count     --config config/reference.json
    python main.py orbits    --config config/reference.json --n 3
    python main.py verify    --config config/reference.json --workers 4
    python main.py series    --config config/mixed_degrees.json
    python main.py repelling --config config/single_map.json --n-max 6
    python main.py selftest  [--config ...] [--n-max 4]

Codes de sortie : 0 succès, 1 échec de vérification, 2 configuration,
3 échec numérique.
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from config import settings
from config.experiment import ExperimentConfig, load_experiment
from core.analysis import (
    corollary_suite,
    structural_checks,
    theorem_suite,
    verify_repelling_bounds,
    verify_rho,
)
from core.counting import (
    CountTable,
    SeriesValue,
    build_count_table,
    check_structural_identities,
    dirichlet_partial,
    lambda_estimate,
    meissel_sum,
    mertens_sum,
    pi_S,
    resolve_lambda,
    rho_series,
)
from core.errors import (
    ConfigurationError,
    OutsideRadius,
    SkewOrbitError,
    TailNotCertifiable,
    VerificationFailure,
)
from core.selftest import SelfTestRunner
from storage.manager import OutputManager
from utils.alerts import AlertSystem, emit_error_record
from utils.logger import log_count_summary, log_section_header, setup_logging

logger = logging.getLogger(__name__)


# ==============================================================================
# HELPERS
# ==============================================================================

def _output(config: ExperimentConfig) -> OutputManager:
    return OutputManager(config.output_directory, config.formats, config.digest, config.parquet)


def _count_table(config: ExperimentConfig) -> CountTable:
    system = config.build_system()
    table = build_count_table(system, config.build_potential(), config.n_max, config.mode,
                              config.map_labels(), config.lam)
    return table.with_digest(config.digest)


# ==============================================================================
# SUBCOMMANDS
# ==============================================================================

def cmd_count(config: ExperimentConfig, args) -> int:
    log_section_header("COUNT")
    table = _count_table(config)
    log_count_summary(table)
    for check in check_structural_identities(table):
        level = logging.INFO if check.passed else logging.WARNING
        logger.log(level, f"{check.name}: {'ok' if check.passed else check.detail}")
    output = _output(config)
    output.save_count_table(table)
    output.write_manifest()
    return 0


def cmd_orbits(config: ExperimentConfig, args) -> int:
    n = args.n if args.n is not None else config.orbit_n
    log_section_header(f"CLOSED ORBITS OF LENGTH {n}")
    system = config.build_system()
    orbits = system.closed_orbits(n, config.build_potential())
    for orbit in orbits:
        rep = orbit.representative
        logger.info(f"{''.join(map(str, rep.word))} | z={rep.z} | m={orbit.multiplicity} "
                    f"| f^n={orbit.weight_exponent:.10g}")
    logger.info(f"{len(orbits)} closed orbits, weighted count {sum(o.weight() for o in orbits):.10g}")
    output = _output(config)
    output.save_orbits(n, orbits)
    output.write_manifest()
    return 0


def cmd_verify(config: ExperimentConfig, args) -> int:
    log_section_header("VERIFY")
    table = _count_table(config)
    log_count_summary(table)
    options = config.options

    reports, checks = theorem_suite(table, config.lam, options)
    reports.append(verify_rho(table, config.lam, options.rho_fractions, options.fit_range,
                              options.band_ceiling, options.tail_tol))
    extra_reports, extra_checks = corollary_suite(table, options, config.build_system())
    reports.extend(extra_reports)
    checks.extend(extra_checks)
    checks.extend(structural_checks(table, options))

    census = []
    if len(config.maps) == 1:
        census = verify_repelling_bounds(config.build_maps()[0], config.repelling_n_max,
                                         config.tolerances, config.workers)

    for report in reports:
        band = "n/a" if report.band_ratio is None else f"{report.band_ratio:.6g}"
        logger.info(f"  {report.claim:.<40} band {band} {'PASS' if report.passed else 'FAIL'}")

    output = _output(config)
    output.save_count_table(table)
    output.save_verification(reports, checks, census)
    output.write_manifest()

    alerts = AlertSystem(options.band_ceiling).check_reports(reports, checks, census)
    if alerts:
        raise VerificationFailure(f"{len(alerts)} claim(s) failed verification")
    log_section_header("ALL CLAIMS PASSED")
    return 0


def _record(s: SeriesValue) -> dict:
    record = {'kind': s.kind.value, 'parameters': s.parameters, 'value': s.value,
              'truncation': s.truncation}
    if s.companion is not None:
        record['companion'] = s.companion
        record['checks'] = s.checks
    return record


def cmd_series(config: ExperimentConfig, args) -> int:
    log_section_header("SERIES")
    options = config.options
    table = _count_table(config)
    if table.source != "enumeration":
        table = table.extended_to(max(config.N_max, options.dirichlet_N, options.fit_range[1]))
    N = min(config.N_max, table.n_max)
    records = [{'kind': 'prime_orbit', 'parameters': {'N': N}, 'value': pi_S(table, N)},
               _record(mertens_sum(table, N, config.lam))]

    for k in options.k_grid:
        try:
            records.append(_record(meissel_sum(table, k, options.tail_tol, config.lam)))
        except TailNotCertifiable as e:
            logger.warning(f"meissel k={k}: {e}")
            records.append({'kind': 'meissel', 'parameters': {'k': k}, 'value': None,
                            'truncation': {'error': e.kind}})

    for z in options.z_grid:
        records.append(_record(dirichlet_partial(table, z, min(options.dirichlet_N, table.n_max),
                                                 config.lam, options.zeta_terms)))

    if table.n_max >= options.fit_range[1]:
        fit = lambda_estimate(table, options.fit_range)
        records.append({'kind': 'lambda_estimate', 'parameters': {'n_range': list(fit.n_range)},
                        'value': fit.value, 'truncation': {'rms_residual': fit.rms_residual}})
        lam = resolve_lambda(table, config.lam, options.fit_range)
        for f in options.rho_fractions:
            try:
                records.append(_record(rho_series(table, f / lam, lam_hat=fit.value)))
            except OutsideRadius as e:
                logger.warning(f"rho at {f}/lambda: {e}")
                records.append({'kind': 'rho_series', 'parameters': {'fraction': f}, 'value': None,
                                'truncation': {'error': e.kind}})
    else:
        logger.warning(f"table stops at n={table.n_max}, growth fit on {options.fit_range} skipped")

    for r in records:
        logger.info(f"  {r['kind']:.<24} {json.dumps(r['parameters'], default=str, sort_keys=True)}"
                    f" -> {r['value']}")
    output = _output(config)
    output.save_series(records)
    output.write_manifest()
    return 0


def cmd_repelling(config: ExperimentConfig, args) -> int:
    log_section_header("REPELLING CENSUS")
    if len(config.maps) != 1:
        raise ConfigurationError("the repelling census needs exactly one map")
    rmap = config.build_maps()[0]
    n_max = args.n_max if args.n_max is not None else config.repelling_n_max
    rows = verify_repelling_bounds(rmap, n_max, config.tolerances, config.workers)
    output = _output(config)
    output.save_repelling(rows, rmap.describe())
    output.write_manifest()
    if AlertSystem().check_reports([], [], rows):
        raise VerificationFailure("repelling census outside its bounds")
    return 0


def cmd_selftest(config: Optional[ExperimentConfig], args) -> int:
    log_section_header("SELF-TEST")
    n_max = args.n_max if args.n_max is not None else 4
    system = config.build_system() if config is not None else None
    if not SelfTestRunner(n_max, system).run_all_tests():
        raise VerificationFailure("self-test oracles disagree")
    return 0


COMMANDS = {
    'count': cmd_count,
    'orbits': cmd_orbits,
    'verify': cmd_verify,
    'series': cmd_series,
    'repelling': cmd_repelling,
    'selftest': cmd_selftest,
}


# ==============================================================================
# ENTRY POINT
# ==============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.TOOL_NAME,
        description='Periodic orbit counts of skew products over rational semigroups')
    parser.add_argument('--version', action='version',
                        version=f"{settings.TOOL_NAME} {settings.TOOL_VERSION}")
    sub = parser.add_subparsers(dest='command', required=True)

    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument('--config', type=str, help='Experiment JSON file')
        p.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                       help='Override a config key (dotted path, JSON value)')
        p.add_argument('--workers', type=int, help='Parallel word solvers')
        p.add_argument('--output-dir', type=str, help='Output directory')
        p.add_argument('--log-level', type=str, default=settings.LOG_LEVEL)
        p.add_argument('--log-file', type=str, help='Log file (default: <output>/run.log)')
        if name == 'orbits':
            p.add_argument('--n', type=int, help='Orbit length')
        if name in ('repelling', 'selftest'):
            p.add_argument('--n-max', type=int, help='Largest period')
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        overrides = list(args.set)
        if args.workers is not None:
            overrides.append(f"workers={args.workers}")
        if args.output_dir is not None:
            overrides.append(f"output.directory={json.dumps(args.output_dir)}")

        config = None
        if args.command != 'selftest' or args.config is not None:
            config = load_experiment(args.config, overrides)
            log_file = args.log_file or config.output_directory / settings.LOG_FILE_NAME
            setup_logging(args.log_level, log_file)
            logger.info(f"Config digest {config.digest}")
        elif args.log_file:
            setup_logging(args.log_level, args.log_file)

        return COMMANDS[args.command](config, args)

    except SkewOrbitError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=not isinstance(e, VerificationFailure))
        return emit_error_record(e)
    except Exception as e:
        logger.error(f"{args.command} crashed: {e}", exc_info=True)
        return emit_error_record(e)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
