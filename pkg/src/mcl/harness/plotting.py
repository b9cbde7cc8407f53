"""PNG rendering of report data tables (non-interactive backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..errors import IoError  # noqa: E402


def render_table(table: dict, path: str, title: str = "") -> None:
    """Plot every column against the first."""
    cols = list(table["columns"])
    data = np.array(table["rows"], float).reshape(-1, len(cols))
    fig, ax = plt.subplots(figsize=(6, 4))
    for yi, ycol in enumerate(cols[1:], start=1):
        ax.plot(data[:, 0], data[:, yi], marker="o", ms=3, label=ycol)
    ax.set_xlabel(cols[0])
    ax.legend(fontsize=7)
    ax.set_title(title, fontsize=9)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=110)
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    finally:
        plt.close(fig)
