"""Execution-time and memory model for one sequence-parallel group.

A group of degree ``d`` holding sequences of lengths ``s_k`` costs

    comp   = (1/d) * sum(alpha1*s^2 + alpha2*s) + beta1
    comm   = (1/(d*v)) * sum(alpha3*s) + beta2
    memory = (sum(s)/d) * m_token + m_ms

where ``v`` is the group's interconnect bandwidth. Attention dominates the
quadratic term, projections/MLP the linear term; All-to-All volume per device
shrinks with the degree. Coefficients come from profiling; this module also
fits them from profile records by least squares.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import CostCoefficients, SeqplanError, ValidationError


class UnderdeterminedError(SeqplanError):
    """Profile data lacks the variation needed to identify the coefficients."""


@dataclass(frozen=True)
class GroupLoad:
    """Lengths assigned to one group (with multiplicity), plus its geometry."""

    token_lengths: tuple[int, ...]
    degree: int
    bandwidth: float

    def __init__(self, token_lengths: Sequence[int], degree: int, bandwidth: float):
        if degree < 1:
            raise ValidationError("degree must be >= 1")
        object.__setattr__(self, "token_lengths", tuple(int(s) for s in token_lengths))
        object.__setattr__(self, "degree", int(degree))
        object.__setattr__(self, "bandwidth", float(bandwidth))


@dataclass(frozen=True)
class ProfileRecord:
    """One profiled group execution."""

    token_lengths: tuple[int, ...]
    degree: int
    bandwidth: float
    measured_comp_time: float
    measured_comm_time: float
    measured_peak_memory: float

    def __post_init__(self):
        if self.measured_comp_time < 0 or self.measured_comm_time < 0 or self.measured_peak_memory < 0:
            raise ValidationError("measurements must be non-negative")


def memory_bytes(load: GroupLoad, coeffs: CostCoefficients) -> int:
    """Per-device memory of a group: activations plus model states.

    Integer-exact when the memory coefficients are whole bytes; otherwise
    rounded half-up to whole bytes. An empty load prices a selected group
    that received no sequences (model states only).
    """
    tokens = sum(load.token_lengths)
    d = load.degree
    if float(coeffs.m_token).is_integer() and float(coeffs.m_ms).is_integer():
        num = tokens * int(coeffs.m_token)
        return (2 * num + d) // (2 * d) + int(coeffs.m_ms)
    return int(np.floor(tokens * coeffs.m_token / d + coeffs.m_ms + 0.5))


def comp_time(load: GroupLoad, coeffs: CostCoefficients) -> float:
    """Computation seconds for a group (quadratic attention + linear rest)."""
    if not load.token_lengths:
        raise ValidationError("cannot cost an empty load")
    total = 0.0
    for s in load.token_lengths:
        total += coeffs.alpha1 * s * s + coeffs.alpha2 * s
    return total / load.degree + coeffs.beta1


def comm_time(load: GroupLoad, coeffs: CostCoefficients) -> float:
    """All-to-All seconds for a group; volume per device is tokens/degree."""
    if not load.token_lengths:
        raise ValidationError("cannot cost an empty load")
    if load.bandwidth <= 0:
        raise ValidationError("bandwidth must be positive")
    total = 0.0
    for s in load.token_lengths:
        total += coeffs.alpha3 * s
    return total / (load.degree * load.bandwidth) + coeffs.beta2


def group_time(load: GroupLoad, coeffs: CostCoefficients) -> float:
    return comp_time(load, coeffs) + comm_time(load, coeffs) + coeffs.zero_overhead


def counts_comp_time(limits: Sequence[int], counts: Sequence[int], degree: int,
                     coeffs: CostCoefficients) -> float:
    """comp_time over bucketed lengths given as (limit, count) pairs.

    Canonical accumulation order shared by the planner, its brute-force
    oracle, and the baselines, so re-evaluated times compare bit-for-bit.
    """
    total = 0.0
    for s, c in zip(limits, counts):
        total += c * (coeffs.alpha1 * s * s + coeffs.alpha2 * s)
    return total / degree + coeffs.beta1


def counts_comm_time(limits: Sequence[int], counts: Sequence[int], degree: int,
                     bandwidth: float, coeffs: CostCoefficients) -> float:
    total = 0.0
    for s, c in zip(limits, counts):
        total += c * (coeffs.alpha3 * s)
    return total / (degree * bandwidth) + coeffs.beta2


def counts_memory(limits: Sequence[int], counts: Sequence[int], degree: int,
                  coeffs: CostCoefficients) -> float:
    tokens = 0
    for s, c in zip(limits, counts):
        tokens += s * c
    return tokens * coeffs.m_token / degree + coeffs.m_ms


@dataclass(frozen=True)
class FitResult:
    coefficients: CostCoefficients
    max_rel_error: float
    comp_rel_error: float
    comm_rel_error: float
    mem_rel_error: float
    clamped: tuple[str, ...]
    warnings: tuple[str, ...]


def _rel_errors(pred: np.ndarray, meas: np.ndarray) -> np.ndarray:
    out = np.zeros_like(pred)
    for i, (p, m) in enumerate(zip(pred, meas)):
        if m == 0 and p == 0:
            out[i] = 0.0
        else:
            out[i] = abs(p - m) / max(abs(m), 1e-12)
    return out


def _lstsq_nonneg(design: np.ndarray, y: np.ndarray, names: Sequence[str], label: str,
                  allow_underdetermined: bool):
    """Relative (1/y weighted) least squares with non-negativity clamping.

    Profiling noise is multiplicative, so residuals are minimized relative to
    each measurement; this also matches the relative-error residual report.
    Rank-deficient systems either raise (default) or fall back to the
    minimum-norm solution with a warning.
    """
    warnings: list[str] = []
    scale = np.maximum(np.abs(y), 1e-12)
    sol, _, rank, _ = np.linalg.lstsq(design / scale[:, None], y / scale, rcond=None)
    if rank < design.shape[1]:
        if not allow_underdetermined:
            raise UnderdeterminedError(
                f"{label} fit is underdetermined (design rank {rank} < {design.shape[1]}): "
                f"profiles lack independent variation in {', '.join(names)}"
            )
        warnings.append(f"{label} fit rank-deficient; using minimum-norm solution")
    clamped = []
    sol = np.asarray(sol, dtype=float)
    for i, name in enumerate(names):
        if sol[i] < 0:
            sol[i] = 0.0
            clamped.append(name)
    return sol, clamped, warnings


def fit_coefficients(records: Sequence[ProfileRecord],
                     allow_underdetermined: bool = False) -> FitResult:
    """Fit all model coefficients from profile records.

    Compute, communication, and memory channels are fitted independently by
    ordinary least squares on their linear forms. Negative solutions are
    clamped to zero and reported in ``clamped``. Requires at least three
    records with distinct total token counts and two distinct degrees unless
    ``allow_underdetermined`` accepts a minimum-norm fit.
    """
    records = list(records)
    if not allow_underdetermined:
        totals = {sum(r.token_lengths) for r in records}
        degrees = {r.degree for r in records}
        if len(records) < 3 or len(totals) < 3:
            raise UnderdeterminedError(
                f"need >= 3 records with distinct total token counts, got {len(totals)} distinct totals"
            )
        if len(degrees) < 2:
            raise UnderdeterminedError("need >= 2 distinct degrees in the profile records")
    if not records:
        raise UnderdeterminedError("no profile records given")

    sq = np.array([sum(s * s for s in r.token_lengths) / r.degree for r in records])
    lin = np.array([sum(r.token_lengths) / r.degree for r in records])
    comm_x = np.array([sum(r.token_lengths) / (r.degree * r.bandwidth) for r in records])
    ones = np.ones(len(records))

    y_comp = np.array([r.measured_comp_time for r in records])
    y_comm = np.array([r.measured_comm_time for r in records])
    y_mem = np.array([r.measured_peak_memory for r in records])

    comp_sol, comp_clamped, w1 = _lstsq_nonneg(
        np.column_stack([sq, lin, ones]), y_comp, ("alpha1", "alpha2", "beta1"),
        "compute", allow_underdetermined)
    comm_sol, comm_clamped, w2 = _lstsq_nonneg(
        np.column_stack([comm_x, ones]), y_comm, ("alpha3", "beta2"),
        "communication", allow_underdetermined)
    mem_sol, mem_clamped, w3 = _lstsq_nonneg(
        np.column_stack([lin, ones]), y_mem, ("m_token", "m_ms"),
        "memory", allow_underdetermined)

    coeffs = CostCoefficients(
        alpha1=comp_sol[0], alpha2=comp_sol[1], beta1=comp_sol[2],
        alpha3=comm_sol[0], beta2=comm_sol[1],
        m_token=mem_sol[0], m_ms=mem_sol[1],
    )

    pred_comp = np.column_stack([sq, lin, ones]) @ np.array([coeffs.alpha1, coeffs.alpha2, coeffs.beta1])
    pred_comm = np.column_stack([comm_x, ones]) @ np.array([coeffs.alpha3, coeffs.beta2])
    pred_mem = np.column_stack([lin, ones]) @ np.array([coeffs.m_token, coeffs.m_ms])
    comp_err = float(np.max(_rel_errors(pred_comp, y_comp)))
    comm_err = float(np.max(_rel_errors(pred_comm, y_comm)))
    mem_err = float(np.max(_rel_errors(pred_mem, y_mem)))

    return FitResult(
        coefficients=coeffs,
        max_rel_error=max(comp_err, comm_err, mem_err),
        comp_rel_error=comp_err,
        comm_rel_error=comm_err,
        mem_rel_error=mem_err,
        clamped=tuple(comp_clamped + comm_clamped + mem_clamped),
        warnings=tuple(w1 + w2 + w3),
    )


PROFILE_HEADER = ["tokens", "degree", "bandwidth", "comp_s", "comm_s", "mem_bytes"]


def read_profile_csv(path) -> list[ProfileRecord]:
    """Parse a profile CSV (semicolon-separated, comma-separated token list)."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=";")
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty profile file") from None
        if [h.strip() for h in header] != PROFILE_HEADER:
            raise ValidationError(
                f"{path}: expected header {';'.join(PROFILE_HEADER)!r}, got {';'.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 6:
                raise ValidationError(f"{path}:{lineno}: expected 6 fields, got {len(row)}")
            try:
                lengths = [int(t) for t in row[0].split(",") if t.strip()]
                records.append(ProfileRecord(
                    token_lengths=tuple(lengths),
                    degree=int(row[1]),
                    bandwidth=float(row[2]),
                    measured_comp_time=float(row[3]),
                    measured_comm_time=float(row[4]),
                    measured_peak_memory=float(row[5]),
                ))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return records


def write_profile_csv(path, records: Sequence[ProfileRecord]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=";", lineterminator="\n")
        writer.writerow(PROFILE_HEADER)
        for r in records:
            writer.writerow([
                ",".join(str(s) for s in r.token_lengths),
                r.degree,
                r.bandwidth,
                r.measured_comp_time,
                r.measured_comm_time,
                r.measured_peak_memory,
            ])
