import logging
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from widthlab.services.harness import RateFit, RateRecord  # noqa: E402

logger = logging.getLogger(__name__)

GOLDEN_RATIO = (math.sqrt(5) - 1.0) / 2.0


def save_rate_plot(records: list[RateRecord], path: str | Path, fit: RateFit | None = None,
                   title: str = "", width: float = 8) -> Path:
    """Log-log plot of measured error, cover radius and bound against n, written as SVG."""
    path = Path(path)
    # fixed hash salt and no date keep the SVG bytes stable across runs
    plt.rcParams["svg.hashsalt"] = "widthlab"
    records = sorted(records, key=lambda record: record.n)
    ns = [r.n for r in records]

    fig, ax = plt.subplots(figsize=(width, width * GOLDEN_RATIO), facecolor="w")
    ax.loglog(ns, [r.measured_error for r in records], "o-", label="measured error")
    ax.loglog(ns, [r.epsilon_used for r in records], "s--", label="cover radius")
    bounds = [r.bound_error for r in records]
    if all(math.isfinite(b) for b in bounds):
        ax.loglog(ns, bounds, ":", label="covering bound")
    if fit is not None:
        fitted = [math.exp(fit.intercept) * n ** fit.slope for n in ns]
        ax.loglog(ns, fitted, "-", alpha=0.5, label=f"fit, slope {fit.slope:.3f}")

    ax.set_xlabel("n", fontsize=width * 2)
    ax.set_ylabel("error", fontsize=width * 2)
    ax.set_title(title, fontsize=width * 2)
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote rate plot to {path}")
    return path
