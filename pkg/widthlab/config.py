from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Grids
    torus_grid_size: int = 4096
    monte_carlo_size: int = 2000
    monte_carlo_half_width: float = 1.0

    # Solvers
    solver_tol: float = 1e-9
    solver_max_iter: int = 500

    # Bounds
    haussler_constant: float = 1.0

    # Sobolev example
    fourier_cutoff: int = 256
    extremal_mass_cutoff: int = 10_000
    sobolev_mean_bound: float = 7.0

    # Node classes
    lipschitz_trials: int = 10_000

    # Output
    output_dir: str = "data"
    output_format: str = "csv"
    jobs: int = 1
    log_level: str = "INFO"

    # Report format
    is_compact_report: bool = True

    model_config = SettingsConfigDict(env_file=".env", env_prefix="WIDTHLAB_", extra="ignore")


settings = Settings()
