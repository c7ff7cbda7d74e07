"""Bridge to an external LP solver: MPS out, solution file in.

The command template must contain ``{mps}`` and ``{solution}``.  The
``HUBGRAPH_SOLVER_CMD`` environment variable overrides the template for every
call, which lets CI substitute a stub.  Whatever the solver claims, residuals
are recomputed locally from the returned primal vector.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..assemble import FEASIBLE, INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, SparseLP, Solution, map_solution
from ..mps import col_name, emit_mps, emit_name_map

ENV_COMMAND = "HUBGRAPH_SOLVER_CMD"
DEFAULT_COMMAND = f"{shlex.quote(sys.executable)} -m hubgraph.solve.lp_runner {{mps}} {{solution}}"

_STATUS_WORDS = {
    "optimal": OPTIMAL,
    "infeasible": INFEASIBLE,
    "primal_infeasible": INFEASIBLE,
    "unbounded": UNBOUNDED,
    "dual_infeasible": UNBOUNDED,
    "iteration-limit": ITERATION_LIMIT,
    "iteration_limit": ITERATION_LIMIT,
    "time_limit": ITERATION_LIMIT,
    "feasible": FEASIBLE,
}


class ExternalSolverError(RuntimeError):
    def __init__(self, message: str, stdout: str = "", stderr: str = "", returncode: int | None = None):
        self.stdout = stdout
        self.stderr = stderr
        self.returncode = returncode
        detail = ""
        if stdout.strip():
            detail += "\n--- stdout ---\n" + stdout.strip()[-4000:]
        if stderr.strip():
            detail += "\n--- stderr ---\n" + stderr.strip()[-4000:]
        super().__init__(message + detail)


class SolutionFileError(ExternalSolverError):
    pass


@dataclass
class ParsedSolution:
    status: str | None
    objective: float | None
    values: dict


def parse_basic(text: str) -> ParsedSolution:
    """``status <word>`` and ``objective <v>`` lines (optional), then ``name value``."""
    status = None
    objective = None
    values: dict[str, float] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key = parts[0].lower()
        if key == "status":
            if len(parts) < 2:
                raise SolutionFileError(f"solution line {n}: status without a keyword")
            word = "_".join(parts[1:]).lower()
            if word not in _STATUS_WORDS:
                raise SolutionFileError(f"solution line {n}: unknown status {' '.join(parts[1:])!r}")
            status = _STATUS_WORDS[word]
            continue
        if len(parts) != 2:
            raise SolutionFileError(f"solution line {n}: expected 'name value', got {line!r}")
        try:
            v = float(parts[1])
        except ValueError:
            raise SolutionFileError(f"solution line {n}: malformed number {parts[1]!r}") from None
        if key == "objective":
            objective = v
            continue
        if parts[0] in values:
            raise SolutionFileError(f"solution line {n}: column {parts[0]} given twice")
        values[parts[0]] = v
    return ParsedSolution(status, objective, values)


def parse_highs_native(text: str) -> ParsedSolution:
    """The plain-text solution file written by the HiGHS command-line tool."""
    lines = [ln.strip() for ln in text.splitlines()]
    status = None
    objective = None
    values: dict[str, float] = {}
    i = 0
    while i < len(lines):
        line = lines[i]
        if line == "Model status" and i + 1 < len(lines):
            word = lines[i + 1].lower().replace(" ", "_")
            status = _STATUS_WORDS.get(word, word)
            i += 2
            continue
        if line.startswith("Objective") and objective is None:
            try:
                objective = float(line.split()[-1])
            except ValueError:
                pass
        if line.startswith("# Columns"):
            count = int(line.split()[-1])
            for k in range(count):
                parts = lines[i + 1 + k].split()
                if len(parts) < 2:
                    raise SolutionFileError(f"malformed column line {lines[i + 1 + k]!r}")
                values[parts[0]] = float(parts[1])
            break
        i += 1
    return ParsedSolution(status, objective, values)


DIALECTS: dict[str, Callable[[str], ParsedSolution]] = {
    "basic": parse_basic,
    "highs": parse_highs_native,
}


@dataclass(frozen=True)
class ExternalSolverConfig:
    command: str = DEFAULT_COMMAND
    dialect: str = "basic"
    timeout: float = 3600.0

    def __post_init__(self):
        check_template(self.command)
        if self.dialect not in DIALECTS:
            raise ValueError(f"unknown solution dialect {self.dialect!r}; known: {sorted(DIALECTS)}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


def check_template(command: str):
    for key in ("{mps}", "{solution}"):
        if key not in command:
            raise ValueError(f"solver command template lacks the {key} placeholder: {command!r}")


def effective_command(cfg: ExternalSolverConfig) -> str:
    override = os.environ.get(ENV_COMMAND)
    if override:
        check_template(override)
        return override
    return cfg.command


def label_text(label) -> str:
    node, var, t = label
    name = f"{node}.{var}" if node else str(var)
    return name if t is None else f"{name}[{t}]"


def solution_vector(lp: SparseLP, values: dict) -> np.ndarray:
    """Order parsed values by column; names may be mangled or readable labels."""
    x = np.empty(lp.n_cols)
    for j in range(lp.n_cols):
        key = col_name(j)
        if key in values:
            x[j] = values[key]
            continue
        alt = label_text(lp.col_labels[j]) if j < len(lp.col_labels) else None
        if alt is not None and alt in values:
            x[j] = values[alt]
            continue
        raise SolutionFileError(f"column {key} not present in solution file")
    return x


def solve_external(lp: SparseLP, cfg: ExternalSolverConfig | None = None,
                   workdir: str | os.PathLike = ".") -> Solution:
    cfg = cfg or ExternalSolverConfig()
    work = Path(workdir)
    work.mkdir(parents=True, exist_ok=True)
    mps_path = work / "model.mps"
    sol_path = work / "model.sol"
    mps_path.write_text(emit_mps(lp))
    (work / "model.names.tsv").write_text(emit_name_map(lp))
    if sol_path.exists():
        sol_path.unlink()

    template = effective_command(cfg)
    args = [a.replace("{mps}", str(mps_path)).replace("{solution}", str(sol_path)) for a in shlex.split(template)]
    try:
        proc = subprocess.run(args, capture_output=True, text=True, timeout=cfg.timeout, cwd=work)
    except subprocess.TimeoutExpired as exc:
        raise ExternalSolverError(f"external solver timed out after {cfg.timeout:g} s",
                                  _text(exc.stdout), _text(exc.stderr)) from None
    except OSError as exc:
        raise ExternalSolverError(f"cannot start external solver {args[0]!r}: {exc}") from None
    if proc.returncode != 0:
        raise ExternalSolverError(f"external solver exited with status {proc.returncode}",
                                  proc.stdout, proc.stderr, proc.returncode)
    if not sol_path.exists():
        raise SolutionFileError("external solver wrote no solution file", proc.stdout, proc.stderr)
    parsed = DIALECTS[cfg.dialect](sol_path.read_text())

    status = parsed.status or OPTIMAL
    info = {"solver_command": template, "reported_objective": parsed.objective, "solver_stdout": proc.stdout}
    if status in (INFEASIBLE, UNBOUNDED):
        x = np.zeros(lp.n_cols)
        try:
            x = solution_vector(lp, parsed.values)
        except SolutionFileError:
            pass
        objective = None if status == INFEASIBLE else -np.inf
        return map_solution(lp, x, objective=objective, status=status, **info)
    x = solution_vector(lp, parsed.values)
    return map_solution(lp, x, objective=lp.objective(x), status=status, **info)


def _text(v) -> str:
    if v is None:
        return ""
    return v.decode(errors="replace") if isinstance(v, bytes) else v
