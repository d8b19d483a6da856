from widthlab.exceptions import ConfigError
from widthlab.handlers import EXIT_OK, Router, run_options, write_output
from widthlab.services.formatter import format_json, format_sobolev_table, format_summary
from widthlab.services.harness import build_domain, sobolev_table

router = Router("sobolev", help="exact Sobolev widths against measured linear and convex errors")


@router.command
def handle_sobolev(args, config) -> int:
    """Handle the sobolev command."""
    options = run_options(args, config)
    spec = config.require_sobolev()
    if not config.sweep.n_values:
        raise ConfigError(f"Config {config.name!r} has no n_values for the Sobolev table")

    table = sobolev_table(spec, config.sweep.n_values, build_domain(config), tol=config.solver.tol,
                          seed=config.seed, random_targets=config.sobolev.random_targets)

    if options.format == "json":
        text = format_json({"name": config.name, "rows": table.rows, "fit": table.fit, "extremal": {
            "mass": table.extremal.mass,
            "oracle_mass": table.extremal.oracle_mass,
            "limit_mass": table.extremal.limit_mass,
            "stated_mass": table.extremal.stated_mass,
            "stated_constraint_value": table.extremal.stated_constraint_value,
            "discrepancy": table.extremal.discrepancy,
        }})
    else:
        text = format_sobolev_table(table)
    write_output(options, f"{config.name}_sobolev", text)

    print(format_summary(f"{config.name}: Sobolev r={spec.r}", table.fit, {
        "extremal l1 mass": table.extremal.mass,
        "stated mass": table.extremal.stated_mass,
        "required scale": table.rows[0].scale,
    }))
    return EXIT_OK
