import logging
import os
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from vreatlas.Ingest import read_cost_curve

# Fixed ids and no timestamp so identical curves give identical SVG bytes
SVG_RC = {
    "svg.hashsalt": "vreatlas",
    "svg.fonttype": "none",
    "path.simplify": False,
}

CURVE_GID = "cost-curve"

def emit_plot(curve_csv: str, svg_path: Optional[str] = None, title: Optional[str] = None) -> str:
    """
    Renders a cost-curve CSV as an SVG line plot.

    The curve is drawn as one line through (cumulative TWh, LCOE) with the
    SVG group id "cost-curve". matplotlib writes that line as a single
    <path> whose data is one M command followed by an L per further site,
    the same open polyline with one vertex per curve point. An empty CSV
    gives empty axes and a warning.

    Parameters:
    - curve_csv (str): File with cumulative_TWh, lcoe_GBP_per_kWh, site_id.
    - svg_path (str): Output file; defaults to the CSV path with .svg.
    - title (str): Plot title; defaults to the file name.

    Returns:
    - str: Path of the SVG file.
    """
    curve = read_cost_curve(curve_csv)
    svg_path = svg_path or os.path.splitext(curve_csv)[0] + ".svg"
    title = title if title is not None else os.path.splitext(os.path.basename(curve_csv))[0]

    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        if curve.empty:
            logging.warning(f"Cost curve {curve_csv} is empty; writing an empty plot")
        else:
            ax.plot(
                curve["cumulative_TWh"].to_numpy(dtype=float),
                curve["lcoe_GBP_per_kWh"].to_numpy(dtype=float),
                color="tab:blue",
                linewidth=1.5,
                gid=CURVE_GID,
            )
        ax.set_xlabel("Cumulative annual energy (TWh)")
        ax.set_ylabel("LCOE (£/kWh)")
        ax.set_title(title)
        ax.grid(True, linewidth=0.5, alpha=0.5)
        fig.tight_layout()
        os.makedirs(os.path.dirname(os.path.abspath(svg_path)), exist_ok=True)
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logging.info(f"Cost curve plot saved to: {os.path.abspath(svg_path)}")
    return svg_path
