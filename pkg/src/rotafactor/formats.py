"""Reading and writing matrices and result tables."""

from __future__ import annotations

import csv
import io
import json
import math
from enum import Enum
from pathlib import Path

import numpy as np

from .rotation import RotationSolution
from .simulation import ConditionResult


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    MARKDOWN = "markdown"


class MatrixFileError(ValueError):
    """A matrix file is malformed; the message names the file and line."""


def read_matrix(path) -> np.ndarray:
    """
    Parse a numeric CSV matrix (rows = variables, columns = factors).

    Cells are comma separated with '.' as decimal point. A single header line
    starting with '#' is allowed as the first line; blank lines are ignored.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MatrixFileError(f"{path}: cannot read file ({exc.strerror})") from None
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if rows or lineno != 1:
                raise MatrixFileError(f"{path}, line {lineno}: header allowed only on the first line")
            continue
        cells = [c.strip() for c in stripped.split(",")]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise MatrixFileError(
                f"{path}, line {lineno}: row has {len(cells)} columns, expected {width}"
            )
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise MatrixFileError(f"{path}, line {lineno}: non-numeric cell") from None
        if not all(math.isfinite(v) for v in values):
            raise MatrixFileError(f"{path}, line {lineno}: non-finite cell")
        rows.append(values)
    if not rows:
        raise MatrixFileError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def format_matrix_csv(m: np.ndarray, header: str | None = None, decimals: int | None = None) -> str:
    """CSV text for ``m``; full precision (17 significant digits) unless ``decimals`` is given."""
    fmt = "{:.17g}" if decimals is None else "{:.%df}" % decimals
    lines = [] if header is None else [f"# {header}"]
    lines += [",".join(fmt.format(float(v)) for v in row) for row in np.atleast_2d(m)]
    return "\n".join(lines) + "\n"


def write_matrix(path, m: np.ndarray, header: str | None = None) -> None:
    Path(path).write_text(format_matrix_csv(m, header))


def solution_dict(sol: RotationSolution) -> dict:
    return {
        "pattern": sol.pattern.tolist(),
        "phi": sol.phi.tolist(),
        "congruence": sol.congruence,
        "per_factor_congruence": sol.per_factor_congruence.tolist(),
        "kappa": sol.kappa,
        "ridge_applied": sol.ridge_applied,
    }


def _md_matrix(m: np.ndarray, labels: list[str], col_prefix: str = "F") -> list[str]:
    q = m.shape[1]
    lines = ["| | " + " | ".join(f"{col_prefix}{j + 1}" for j in range(q)) + " |"]
    lines.append("|---" * (q + 1) + "|")
    for label, row in zip(labels, m):
        lines.append(f"| {label} | " + " | ".join(f"{round(float(v), 2) + 0.0:.2f}" for v in row) + " |")
    return lines


def format_solution(sol: RotationSolution, fmt: OutputFormat) -> str:
    name = sol.method.upper()
    q = sol.phi.shape[0]
    if fmt is OutputFormat.JSON:
        return json.dumps(solution_dict(sol), indent=2) + "\n"
    if fmt is OutputFormat.CSV:
        parts = [
            format_matrix_csv(sol.pattern, f"{name} pattern (2 decimals)", decimals=2),
            format_matrix_csv(sol.pattern, f"{name} pattern"),
            format_matrix_csv(sol.phi, f"{name} phi"),
            f"# {name} congruence\n{sol.congruence:.17g}\n",
            "# per-factor congruence\n" + ",".join(f"{c:.17g}" for c in sol.per_factor_congruence) + "\n",
            f"# kappa,ridge_applied\n{sol.kappa:.17g},{sol.ridge_applied:.17g}\n",
        ]
        return "".join(parts)
    variables = [f"X{i + 1}" for i in range(sol.pattern.shape[0])]
    factors = [f"F{j + 1}" for j in range(q)]
    lines = [f"## {name} rotation", "", "Pattern:", ""]
    lines += _md_matrix(sol.pattern, variables)
    lines += ["", "Factor inter-correlations:", ""]
    lines += _md_matrix(sol.phi, factors)
    lines += [
        "",
        f"Mean congruence with target: {sol.congruence:.3f}",
        "Per-factor congruence: " + ", ".join(f"{c:.3f}" for c in sol.per_factor_congruence),
        f"Condition number kappa: {sol.kappa:.4g}",
        f"Ridge applied: {sol.ridge_applied:.2f}",
        "",
        "Full-precision pattern:",
        "",
        "```",
        format_matrix_csv(sol.pattern).rstrip("\n"),
        "```",
        "",
    ]
    return "\n".join(lines)


# -- simulation results -----------------------------------------------------

RESULT_COLUMNS = [
    "n", "p", "q", "per_factor", "level", "rho",
    "reps_requested", "reps_valid", "extraction_failures", "rotation_failures",
    "ot_congruence_mean", "ot_congruence_sd", "omt_congruence_mean", "omt_congruence_sd",
    "ot_phi_mean", "ot_phi_sd", "omt_phi_mean", "omt_phi_sd", "bias_ot", "bias_omt",
]


def result_row(res: ConditionResult) -> dict:
    c = res.condition
    return {
        "n": c.n, "p": c.p, "q": c.q, "per_factor": c.per_factor, "level": c.level.value, "rho": c.rho,
        "reps_requested": res.replications_requested, "reps_valid": res.replications_valid,
        "extraction_failures": res.extraction_failures, "rotation_failures": res.rotation_failures,
        "ot_congruence_mean": res.ot_congruence_mean, "ot_congruence_sd": res.ot_congruence_sd,
        "omt_congruence_mean": res.omt_congruence_mean, "omt_congruence_sd": res.omt_congruence_sd,
        "ot_phi_mean": res.ot_phi_mean, "ot_phi_sd": res.ot_phi_sd,
        "omt_phi_mean": res.omt_phi_mean, "omt_phi_sd": res.omt_phi_sd,
        "bias_ot": res.bias_ot, "bias_omt": res.bias_omt,
    }


def _cell(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def results_csv(results: list[ConditionResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for res in results:
        row = result_row(res)
        writer.writerow([_cell(row[k]) for k in RESULT_COLUMNS])
    return buf.getvalue()


def results_json(results: list[ConditionResult]) -> str:
    rows = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in result_row(r).items()}
            for r in results]
    return json.dumps(rows, indent=2) + "\n"


def _two(v: float) -> str:
    if math.isnan(v):
        return "n/a"
    s = f"{v:.2f}"
    # psychometric convention: drop the leading zero
    return s.replace("0.", ".", 1) if abs(v) < 1 else s


def results_markdown(results: list[ConditionResult], reps: int, seed: int) -> str:
    """Summary table with one row per design cell and OT/OMT columns per rho."""
    rhos = sorted({r.condition.rho for r in results})
    shapes: dict[tuple, dict[float, ConditionResult]] = {}
    for res in results:
        c = res.condition
        shapes.setdefault((c.per_factor, c.q, c.level.value, c.n), {})[c.rho] = res

    header = ["n", "p", "q", "λ"]
    for rho in rhos:
        header += [f"OT cong. / φ = {_two(rho)}", f"OMT cong. / φ = {_two(rho)}"]
    lines = [
        "# Congruence with target and mean factor inter-correlations",
        "",
        f"Replications per condition: {reps}; seed: {seed}. Cells show mean (SD) of the",
        "mean congruence with the target / mean factor inter-correlation over valid replications.",
        "",
        "| " + " | ".join(header) + " |",
        "|" + "---|" * len(header),
    ]
    for (pf, q, level, n), by_rho in shapes.items():
        cells = [str(n), str(q * pf), str(q), "λ.50" if level == "low" else "λ.70"]
        for rho in rhos:
            res = by_rho.get(rho)
            if res is None:
                cells += ["", ""]
                continue
            cells.append(f"{_two(res.ot_congruence_mean)} ({_two(res.ot_congruence_sd)}) / "
                         f"{_two(res.ot_phi_mean)} ({_two(res.ot_phi_sd)})")
            cells.append(f"{_two(res.omt_congruence_mean)} ({_two(res.omt_congruence_sd)}) / "
                         f"{_two(res.omt_phi_mean)} ({_two(res.omt_phi_sd)})")
        lines.append("| " + " | ".join(cells) + " |")

    lines += ["", "## Bias of mean factor inter-correlations", "",
              "| n | p | q | λ | φ | OT bias | OMT bias | valid reps |", "|---|---|---|---|---|---|---|---|"]
    for res in results:
        c = res.condition
        lines.append(
            f"| {c.n} | {c.p} | {c.q} | {'λ.50' if c.level.value == 'low' else 'λ.70'} | {_two(c.rho)} | "
            f"{res.bias_ot:+.3f} | {res.bias_omt:+.3f} | {res.replications_valid}/{res.replications_requested} |"
        )
    return "\n".join(lines) + "\n"
