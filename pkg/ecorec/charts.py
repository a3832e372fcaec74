"""
Line charts of per-epoch experiment curves, written as SVG.

Output is byte-stable for identical inputs: the SVG id salt is fixed and no creation date is embedded.
"""

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

SVG_SALT = 'ecorec'


def plot_curves(path, curves, ylabel, title=None):
    """
    Plot one line per series against the epoch index.

    Parameters
    ----------
    path : str
        Output SVG file.
    curves : dict
        Series label -> (epochs, values), plotted in key order.
    ylabel : str
    title : str, optional
    """
    with plt.rc_context({'svg.hashsalt': SVG_SALT, 'svg.fonttype': 'none'}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, (epochs, values) in curves.items():
            ax.plot(epochs, values, marker='o', markersize=3, label=label)
        ax.set_xlabel('epoch')
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if curves:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format='svg', metadata={'Date': None})
        plt.close(fig)
