"""Case-study reports and their figures.

A report is a flat, ordered dictionary of scalars plus the trajectories
behind the figures.  :func:`write_report` writes ``report.json``, one CSV
per trajectory and a PNG per figure into a directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cases, gcsc, matlib, sim
from .errors import Rejection, Shortfall
from .lyapriccati import evaluate_costs, optimal_team_cost
from .model import aggregate

# values printed alongside the case studies; reported next to ours
FIVE_AGENT_REFERENCE = {"J_alpha": 0.2153, "J_GC": 1.0768, "J_OPT": 1.0269, "eta2": 1.0486,
                        "corollary_bound": 1.2173}
MICROGRID_REFERENCE = {"J_alpha": 1.2972, "J_OPT": 4.9275, "J_GC": 5.1308, "eta2": 1.0413,
                       "tracking_cost_printed": 8.2992, "tracking_cost_baseline": 9.7500}


@dataclass
class CaseStudyReport:
    name: str
    scalars: dict
    reference: dict
    verify_printed: dict
    synthesis: dict
    trajectories: dict = field(default_factory=dict)  # label -> Trajectory
    synthesized: gcsc.SynthesisResult | None = None

    @property
    def ok(self) -> bool:
        return self.verify_printed.get("status") == "Certificate" and self.synthesis.get("status") == "ok"

    def to_dict(self) -> dict:
        return {
            "case": self.name,
            "scalars": self.scalars,
            "reference": self.reference,
            "verify_printed": self.verify_printed,
            "synthesis": self.synthesis,
        }


def _verify_summary(gain, problem) -> dict:
    try:
        cert = gcsc.verify(gain, problem)
    except Rejection as exc:
        return {"status": exc.reason, "message": str(exc), **_floats(exc.diagnostics)}
    return {"status": "Certificate", "lmi_margin": cert.lmi_margin,
            "bound_value": cert.bound_value, "bound_limit": cert.bound_limit}


def _synth_summary(problem):
    try:
        res = gcsc.synthesize(problem)
    except Shortfall as exc:
        return {"status": "Shortfall", "stage": exc.stage, "message": str(exc), **_floats(exc.diagnostics)}, None
    Qa, Ra, B = aggregate(problem.game, problem.alpha)
    F = res.gain.F
    A_cl = problem.game.A + B @ F
    J_quad = sim.simulated_cost(A_cl, Qa + F.T @ Ra @ F, problem.x0)
    return {
        "status": "ok",
        "J_alpha": res.J_alpha,
        "J_alpha_quadrature": J_quad,
        "J_GC": res.costs.team,
        "stage1_margin": res.stage1_margin,
        "stage2_margin": res.stage2_margin,
        "certificate_margin": res.certificate.lmi_margin,
        "hurwitz_margin": matlib.hurwitz_margin(A_cl),
        "F": F.tolist(),
    }, res


def _floats(d: dict) -> dict:
    return {k: v for k, v in d.items() if isinstance(v, (int, float, str))}


def case_five_agent(synthesize: bool = True, T: float = 8.0, h: float = 1e-3) -> CaseStudyReport:
    problem = cases.five_agent_problem()
    game = problem.game
    printed = cases.five_agent_printed_gain()
    costs = evaluate_costs(printed, game, problem.alpha, problem.x0)
    J_opt = optimal_team_cost(game, problem.x0)
    scalars = {
        "J_i": costs.per_player.tolist(),
        "J_alpha": costs.weighted,
        "J_GC": costs.team,
        "J_OPT": J_opt,
        "eta2": costs.team / J_opt,
        "corollary_bound": game.N * problem.delta / J_opt,
        "delta": problem.delta,
    }
    A_cl = game.A + game.B @ printed.F
    trajs = {"printed": sim.simulate(A_cl, problem.x0, T, h, printed.F)}
    scalars["final_state_norm_printed"] = float(np.linalg.norm(trajs["printed"].x[-1]))
    synth, res = _synth_summary(problem) if synthesize else ({"status": "skipped"}, None)
    if res is not None:
        trajs["synthesized"] = sim.simulate(game.A + game.B @ res.gain.F, problem.x0, T, h, res.gain.F)
        synth["final_state_norm"] = float(np.linalg.norm(trajs["synthesized"].x[-1]))
    return CaseStudyReport("five-agent", scalars, dict(FIVE_AGENT_REFERENCE),
                           _verify_summary(printed, problem), synth, trajs, res)


def _voltages(traj: sim.Trajectory) -> np.ndarray:
    """Terminal voltages of the four generators from relative states."""
    xi = traj.x @ cases.microgrid_tracking_map().T
    return cases.MICROGRID_REF[0] + xi[:, 0::2]


def case_microgrid(synthesize: bool = True, T: float = 0.4, h: float = 1e-4) -> CaseStudyReport:
    problem = cases.microgrid_problem()
    game = problem.game
    printed = cases.microgrid_printed_gain()
    baseline = cases.microgrid_baseline_gain()
    costs = evaluate_costs(printed, game, problem.alpha, problem.x0)
    J_opt = optimal_team_cost(game, problem.x0)
    scalars = {
        "J_i": costs.per_player.tolist(),
        "J_alpha": costs.weighted,
        "J_GC": costs.team,
        "J_OPT": J_opt,
        "eta2": costs.team / J_opt,
        "corollary_bound": game.N * problem.delta / J_opt,
        "tracking_cost_printed": cases.microgrid_tracking_cost(printed.F),
        "tracking_cost_baseline": cases.microgrid_tracking_cost(baseline),
        "delta": problem.delta,
    }
    trajs = {
        "printed": sim.simulate(game.A + game.B @ printed.F, problem.x0, T, h, printed.F),
        "baseline": sim.simulate(game.A + game.B @ baseline, problem.x0, T, h, baseline),
    }
    for label in ("printed", "baseline"):
        err = np.abs(_voltages(trajs[label])[-1] - cases.MICROGRID_REF[0]).max()
        scalars[f"voltage_error_{label}"] = float(err)
    synth, res = _synth_summary(problem) if synthesize else ({"status": "skipped"}, None)
    if res is not None:
        synth["tracking_cost"] = cases.microgrid_tracking_cost(res.gain.F)
        trajs["synthesized"] = sim.simulate(game.A + game.B @ res.gain.F, problem.x0, T, h, res.gain.F)
    return CaseStudyReport("microgrid", scalars, dict(MICROGRID_REFERENCE),
                           _verify_summary(printed, problem), synth, trajs, res)


# --------------------------------------------------------------------------
# output


def dump_json(data, path) -> None:
    """JSON with keys in insertion order and full float precision."""
    Path(path).write_text(json.dumps(data, indent=2, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_states(traj: sim.Trajectory, path, title: str = "", labels=None) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    labels = labels or [f"$x_{{{i + 1}}}$" for i in range(traj.x.shape[1])]
    for i in range(traj.x.shape[1]):
        ax.plot(traj.t, traj.x[:, i], lw=1.2, label=labels[i])
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_voltages(trajs: dict, path) -> None:
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(trajs), figsize=(4 * len(trajs), 3.2), sharey=True, squeeze=False)
    for ax, (label, tr) in zip(axes[0], trajs.items()):
        v = _voltages(tr)
        for i in range(v.shape[1]):
            ax.plot(tr.t, v[:, i], lw=1.2, label=f"generator {i + 1}")
        ax.axhline(cases.MICROGRID_REF[0], color="k", ls=":", lw=0.8)
        ax.set_title(label)
        ax.set_xlabel("t [s]")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("terminal voltage")
    axes[0][0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_frontier(frontier: np.ndarray, disagreement, alpha_star, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.plot(frontier[:, 1], frontier[:, 2], lw=1.2, label="weighted optimum")
    ax.plot(*disagreement, "ks", label="disagreement")
    k = int(np.argmin(np.abs(frontier[:, 0] - alpha_star[0])))
    ax.plot(frontier[k, 1], frontier[k, 2], "ro", label=f"alpha_1 = {alpha_star[0]:.4f}")
    ax.set_xlabel("$J_1$")
    ax.set_ylabel("$J_2$")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_scan(scan, path) -> None:
    plt = _pyplot()
    a = np.array([r.alpha[0] for r in scan.rows])
    r = np.array([r.sc1_residual for r in scan.rows])
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.semilogy(a, r, ".-", lw=1)
    ax.axhline(scan.tol, color="r", ls="--", lw=0.8, label="tolerance")
    ax.set_xlabel(r"$\alpha_1$")
    ax.set_ylabel("SC1 residual")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(report: CaseStudyReport, outdir) -> list[Path]:
    """Write JSON, trajectory CSVs and figures; returns the written paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.json"]
    dump_json(report.to_dict(), written[0])
    for label, tr in report.trajectories.items():
        p = out / f"trajectory_{label}.csv"
        tr.to_csv(p)
        written.append(p)
    if report.name == "microgrid":
        p = out / "voltages.png"
        plot_voltages(report.trajectories, p)
        written.append(p)
    else:
        for label, tr in report.trajectories.items():
            p = out / f"states_{label}.png"
            plot_states(tr, p, title=f"{report.name}: {label} gain")
            written.append(p)
    return written
