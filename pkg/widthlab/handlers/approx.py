from widthlab.handlers import EXIT_OK, Router, run_options, write_output
from widthlab.services.formatter import format_json, format_rows_csv, format_summary
from widthlab.services.harness import approx_report

router = Router("approx", help="convex, linear and collapse errors over greedy-cover bases")


@router.command
def handle_approx(args, config) -> int:
    """Handle the approx command."""
    options = run_options(args, config)
    rows = approx_report(config)

    if options.format == "json":
        text = format_json({"name": config.name, "rows": rows})
    else:
        text = format_rows_csv(rows)
    write_output(options, f"{config.name}_approx", text)

    worst = {}
    for row in rows:
        key = f"worst convex error at n={row.n}"
        worst[key] = max(worst.get(key, 0.0), row.convex_error)
    print(format_summary(f"{config.name}: {len(rows)} fitted targets", details=worst))
    return EXIT_OK
