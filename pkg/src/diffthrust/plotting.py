"""PNG figures for the CLI reports. Uses the non-interactive Agg backend."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .aircraft import STATE_LABELS  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}
STATE_UNITS = ("deg", "deg/s", "deg", "deg/s")


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def pole_map(analyses, path):
    """Poles of each labelled ModalAnalysis on one complex plane."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 4.5))
        for (label, analysis), marker in zip(analyses.items(), "xo+s"):
            p = analysis.poles
            ax.plot(p.real, p.imag, marker, ms=8, mfc="none", label=label)
        ax.axvline(0.0, color="k", lw=0.8)
        ax.set_xlabel("real [1/s]")
        ax.set_ylabel("imag [rad/s]")
        ax.legend()
        return _save(fig, path)


def engine_response(trace, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.plot(trace.t, trace.command, "--", label="command")
        ax.plot(trace.t, trace.available, label="available")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("thrust [lbf]")
        ax.legend(loc="lower right")
        return _save(fig, path)


def state_history(trace, path, reference=True):
    """Four lateral states of the damaged plant, with the reference model overlaid."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(8, 5.5), sharex=True)
        for i, ax in enumerate(axes.flat):
            ax.plot(trace.t, np.degrees(trace.damaged_state[:, i]), label="plant")
            if reference:
                ax.plot(trace.t, np.degrees(trace.model_state[:, i]), "--", label="model")
            ax.set_ylabel(f"{STATE_LABELS[i]} [{STATE_UNITS[i]}]")
        for ax in axes[1]:
            ax.set_xlabel("time [s]")
        axes[0, 0].legend()
        return _save(fig, path)


def tracking_error(trace, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for i in range(4):
            ax.plot(trace.t, trace.error[:, i], label=f"e{i + 1}")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("plant minus model")
        ax.legend(ncol=4)
        return _save(fig, path)


def control_effort(trace, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
        ax1.plot(trace.t, np.degrees(trace.aileron_cmd))
        ax1.set_ylabel("aileron [deg]")
        ax2.plot(trace.t, trace.dT_effort, label="delivered")
        ax2.plot(trace.t, trace.dT_avail, "--", label="engine output")
        ax2.set_ylabel("differential thrust [lbf]")
        ax2.set_xlabel("time [s]")
        ax2.legend()
        return _save(fig, path)


def monte_carlo(report, path):
    """Error envelope across runs plus a histogram of settling times."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        lo, med, hi = report.error_envelope.T
        ax1.fill_between(report.t, lo, hi, alpha=0.3, label="min..max")
        ax1.plot(report.t, med, label="median")
        ax1.set_xlabel("time [s]")
        ax1.set_ylabel("max |e_i|")
        ax1.legend()
        st = np.array([r.settle_time for r in report.runs])
        finite = st[np.isfinite(st)]
        if finite.size:
            ax2.hist(finite, bins=min(40, max(5, int(math.sqrt(finite.size)))))
        ax2.axvline(report.settle_by, color="k", ls="--", lw=0.8)
        ax2.set_xlabel("settling time [s]")
        ax2.set_ylabel("runs")
        ax2.set_title(f"{st.size - finite.size} of {st.size} runs never settle", fontsize=9)
        return _save(fig, path)
