import logging

from widthlab.handlers import EXIT_INVARIANT, EXIT_OK, Router, run_options, write_output
from widthlab.services.formatter import format_json, format_summary
from widthlab.services.harness import verify_theorem1

logger = logging.getLogger(__name__)

router = Router("verify", help="check both cover-to-basis constructions on random instances")


@router.command
def handle_verify(args, config) -> int:
    """Handle the verify command; exits 2 when any instance fails."""
    options = run_options(args, config)
    report = verify_theorem1(config)
    # certificates are structured, so this report is always JSON
    write_output(options, f"{config.name}_verify", format_json(report), suffix="json")

    print(format_summary(f"{config.name}: {report.instances} instances", details={
        "part 1 passes": report.part1_passes,
        "part 2 passes": report.part2_passes,
        "max reconstruction residual": report.max_reconstruction_residual,
        "max excess over delta + eps": report.max_collapse_excess,
    }))
    if not report.passed:
        logger.error(f"{report.instances - min(report.part1_passes, report.part2_passes)} instance(s) failed")
        return EXIT_INVARIANT
    return EXIT_OK
