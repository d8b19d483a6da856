import logging

from widthlab.handlers import EXIT_OK, Router, run_options, write_output
from widthlab.services.formatter import format_json, format_records_csv, format_summary
from widthlab.services.harness import fit_rate, run_sweep, theoretical_exponent
from widthlab.services.plotting import save_rate_plot

logger = logging.getLogger(__name__)

router = Router("sweep", help="error-versus-n sweep over nested greedy covers")


@router.command
def handle_sweep(args, config) -> int:
    """Handle the sweep command."""
    options = run_options(args, config)
    family = config.require_family()
    records = run_sweep(config, jobs=options.jobs, timing=options.timing)

    fit = None
    try:
        fit = fit_rate(records, theoretical=theoretical_exponent(family, config.norm.p), tol=config.solver.tol)
    except ValueError as e:
        logger.warning(f"No rate fit for {config.name}: {e}")

    if options.format == "json":
        text = format_json({"name": config.name, "records": records, "fit": fit})
    else:
        text = format_records_csv(records)
    write_output(options, f"{config.name}_sweep", text)

    if options.svg:
        save_rate_plot(records, options.out_dir / f"{config.name}_sweep.svg", fit, title=config.name)

    print(format_summary(f"{config.name}: {len(records)} sweep records", fit,
                         {"family": family.kind.value, "p": config.norm.p}))
    return EXIT_OK
