"""Table-shaped text reports plus machine-readable JSON sidecars.

Every emitter writes ``<path>.txt`` (or ``.csv`` for heatmaps) with numbers
at two decimals and ``<path>.json`` at full precision. Output bytes depend
only on the inputs.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .affinity import AffinityEstimate
from .choo_siow import SurplusSurface
from .errors import AssortMatchError, ValidationError
from .max_score import ScoreFit
from .spectral import NormalizedSeries, SaliencyDecomposition

LAYOUTS = ("table5", "table6", "table7", "table9", "heatmap", "policy")


class IoFailure(AssortMatchError, OSError):
    pass


def fmt(x) -> str:
    out = f"{float(x):.2f}"
    return "0.00" if out == "-0.00" else out


def to_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Mapping):
        return {(k if isinstance(k, str) else ",".join(map(str, k)) if isinstance(k, tuple) else str(k)): to_jsonable(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def dumps(data) -> str:
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n"


def _grid(rows, header=None) -> str:
    table = ([header] if header else []) + rows
    widths = [max(len(r[c]) for r in table if c < len(r)) for c in range(max(len(r) for r in table))]
    lines = []
    for k, r in enumerate(table):
        cells = [r[c].ljust(widths[c]) if c == 0 else r[c].rjust(widths[c]) for c in range(len(r))]
        lines.append("  ".join(cells).rstrip())
        if header and k == 0:
            lines.append("-" * len(lines[-1]))
    return "\n".join(lines) + "\n"


def render_table5(est: AffinityEstimate) -> str:
    names = est.names
    sig = est.significant
    rows = []
    for i, nm in enumerate(names):
        vals = []
        for j in range(len(names)):
            v = fmt(est.B[i, j])
            vals.append(f"**{v}**" if sig[i, j] else v)
        rows.append([f"M {nm}"] + vals)
        if est.standard_errors is not None:
            rows.append([""] + [f"({fmt(se)})" for se in est.standard_errors[i]])
    head = f"Estimated affinity matrix (rows: men, columns: women); N = {est.n}"
    notes = []
    if est.standard_errors is not None:
        reps = 0 if est.bootstrap_draws is None else est.bootstrap_draws.shape[0] + est.bootstrap_failures
        notes.append(f"Standard errors in parentheses from {reps} bootstrap replications")
        notes.append("(" + str(est.bootstrap_failures) + " failed). ** marks |estimate| / SE >= 1.96.")
    notes.append(f"Converged: {est.converged}; max moment residual {np.max(np.abs(est.moment_residuals)):.3e}.")
    return head + "\n\n" + _grid(rows, ["", *[f"W {nm}" for nm in names]]) + "\n" + "\n".join(notes) + "\n"


def render_table6(dec: SaliencyDecomposition, names) -> str:
    O = len(dec.lambdas)
    header = ["Attribute"]
    for k in range(O):
        header += [f"Index {k + 1} men", f"Index {k + 1} women"]
    rows = []
    for a, nm in enumerate(names):
        row = [nm]
        for k in range(O):
            row += [fmt(dec.U_load[k, a]), fmt(dec.V_load[k, a])]
        rows.append(row)
    lam_row = ["Singular value"]
    share_row = ["Share"]
    for k in range(O):
        lam_row += [fmt(dec.lambdas[k]), ""]
        share_row += [fmt(dec.shares[k]), ""]
    rows += [lam_row, share_row]
    return "Saliency analysis: loadings and singular values\n\n" + _grid(rows, header)


def render_table7(series: NormalizedSeries) -> str:
    diag = series.diagonals()
    header = [""] + list(series.labels)
    rows = [[nm] + [fmt(vals[lab]) if lab in vals else "" for lab in series.labels] for nm, vals in diag.items()]
    rows.append(["Sigma"] + [fmt(s) for s in series.sigma])
    return "Normalized diagonal elements of the affinity matrices\n\n" + _grid(rows, header)


def render_table9(fits: Mapping[str, ScoreFit]) -> str:
    stages = list(fits)
    labels = []
    for f in fits.values():
        for lab in f.labels:
            if lab not in labels:
                labels.append(lab)
    header = ["Variable"]
    for st in stages:
        header += [f"{st} Mean", f"{st} 95% CI"]
    rows = []
    for lab in labels:
        row = [lab]
        for st in stages:
            f = fits[st]
            if lab in f.labels:
                k = f.labels.index(lab)
                row += [fmt(f.mean[k]), f"[{fmt(f.lower[k])}, {fmt(f.upper[k])}]"]
            else:
                row += ["", ""]
        rows.append(row)
    notes = [
        f"{st}: {f.runs} runs, population {f.population}, {f.iterations} generations, "
        f"{f.n_inequalities} inequalities, best score {f.best_score}"
        for st, f in fits.items()
    ]
    return "Matching maximum score estimates\n\n" + _grid(rows, header) + "\n" + "\n".join(notes) + "\n"


def render_heatmap(surface: SurplusSurface) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["male\\female", *surface.col_labels])
    for i, lab in enumerate(surface.row_labels):
        w.writerow([lab, *[repr(float(v)) for v in surface.phi[i]]])
    return buf.getvalue()


def render_policy(rows: Mapping[str, object]) -> str:
    header = ["Scenario", "dn/ds het", "dn/ds hom", "ratio", "dlf/ds het", "dlf/ds hom", "ratio"]
    out = []
    for label, eff in rows.items():
        out.append([
            label,
            f"{eff.dn_ds_heterogeneous:.4f}",
            f"{eff.dn_ds_homogeneous:.4f}",
            f"{eff.dn_ds_ratio:.4f}",
            f"{eff.dlf_ds_heterogeneous:.4f}",
            f"{eff.dlf_ds_homogeneous:.4f}",
            f"{eff.dlf_ds_ratio:.4f}",
        ])
    return "Childcare effects: preference mixture vs. mean preference\n\n" + _grid(out, header)


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def emit_report(result, layout: str, path, names=None) -> list[Path]:
    """Write the human table and its JSON sidecar; returns the written paths.

    ``result`` must match ``layout``: an AffinityEstimate (table5), a
    SaliencyDecomposition with ``names`` (table6), a NormalizedSeries
    (table7), a ScoreFit or stage->ScoreFit mapping (table9), a
    SurplusSurface (heatmap) or a label->MixtureEffects mapping (policy).
    """
    if layout not in LAYOUTS:
        raise ValidationError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    base = Path(path)
    text_ext = ".txt"
    sidecar = result
    if layout == "table5":
        if not isinstance(result, AffinityEstimate):
            raise ValidationError("table5 needs an AffinityEstimate")
        text = render_table5(result)
        sidecar = {k: v for k, v in dataclasses.asdict(result).items() if k != "bootstrap_draws"}
        sidecar["significant"] = result.significant
    elif layout == "table6":
        if not isinstance(result, SaliencyDecomposition) or names is None:
            raise ValidationError("table6 needs a SaliencyDecomposition and attribute names")
        text = render_table6(result, names)
        sidecar = {"names": list(names), **dataclasses.asdict(result)}
    elif layout == "table7":
        if not isinstance(result, NormalizedSeries):
            raise ValidationError("table7 needs a NormalizedSeries")
        text = render_table7(result)
    elif layout == "table9":
        fits = {(result.stage or "All"): result} if isinstance(result, ScoreFit) else dict(result)
        if not all(isinstance(f, ScoreFit) for f in fits.values()):
            raise ValidationError("table9 needs ScoreFit results")
        text = render_table9(fits)
        sidecar = {
            st: {
                "labels": f.labels,
                "mean": f.mean,
                "lower": f.lower,
                "upper": f.upper,
                "pinned": {f.spec.label(pos): v for pos, v in f.spec.fixed.items()},
                "run_thetas": f.run_thetas,
                "run_scores": f.run_scores,
                "best_score": f.best_score,
                "best_theta": f.best_theta,
                "n_inequalities": f.n_inequalities,
                "runs": f.runs,
                "population": f.population,
                "iterations": f.iterations,
                "seed": f.seed,
                "kind": f.spec.kind,
                "domain": f.spec.domain,
            }
            for st, f in fits.items()
        }
    elif layout == "heatmap":
        if not isinstance(result, SurplusSurface):
            raise ValidationError("heatmap needs a SurplusSurface")
        text = render_heatmap(result)
        text_ext = ".csv"
    else:
        text = render_policy(result)
    table_path = base.with_suffix(text_ext)
    json_path = base.with_suffix(".json")
    _write(table_path, text)
    _write(json_path, dumps(sidecar))
    return [table_path, json_path]


def write_matrix_csv(path, M, row_names, col_names=None):
    col_names = row_names if col_names is None else col_names
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["attribute", *col_names])
    for name, row in zip(row_names, np.asarray(M, dtype=np.float64)):
        w.writerow([name, *[repr(float(v)) for v in row]])
    _write(Path(path), buf.getvalue())


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def read_matrix_csv(path):
    """Read a square or rectangular matrix; header row and row labels are optional."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise ValidationError(f"{path} holds no matrix")
    header = None
    if not all(_is_number(c) for c in rows[0][1:]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    row_names = None
    if rows and not _is_number(rows[0][0]):
        row_names = [r[0].strip() for r in rows]
        rows = [r[1:] for r in rows]
    col_names = None
    if header is not None:
        col_names = header[1:] if row_names is not None else header
    try:
        M = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric matrix entry ({exc})") from None
    if M.ndim != 2 or M.size == 0:
        raise ValidationError(f"{path}: ragged or empty matrix")
    names = row_names or col_names or [f"x{k + 1}" for k in range(M.shape[0])]
    cols = col_names or names
    if len(cols) != M.shape[1] or len(names) != M.shape[0]:
        raise ValidationError(f"{path}: labels do not match the matrix shape {M.shape}")
    return M, list(names), list(cols)
