from widthlab.handlers import EXIT_OK, Router, run_options, write_output
from widthlab.services.formatter import format_json, format_rows_csv, format_summary
from widthlab.services.harness import cover_report

router = Router("cover", help="greedy covers, packings and covering bounds per epsilon")


@router.command
def handle_cover(args, config) -> int:
    """Handle the cover command."""
    options = run_options(args, config)
    report = cover_report(config)

    if options.format == "json":
        text = format_json(report)
    else:
        text = format_rows_csv(list(report.rows))
    write_output(options, f"{config.name}_cover", text)

    details = {"family": report.family, "dictionary size": report.dictionary_size}
    if report.lipschitz_ratio is not None:
        details["observed Lipschitz ratio"] = report.lipschitz_ratio
    for row in report.rows:
        details[f"cover size at {row.epsilon:g}"] = row.cover_size
    print(format_summary(f"{config.name}: covers at {len(report.rows)} radii", details=details))
    return EXIT_OK
