"""Well-posedness condition k_tilde > C R^2 with R = M_tau1 / (2 N_tau).

C lumps the analysis constants (Poincare and trace constants of both
subdomains) for which no computable estimates exist, so it is a user input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .io import report_text, write_csv, write_report


class WellPosednessError(ValueError):
    """Inputs for which the condition is undefined."""


@dataclass(frozen=True)
class WellPosednessReport:
    k_tilde: float
    N_tau: float
    M_tau1: float
    R: float
    R2: float
    C: float
    margin: float
    verdict: str
    max_admissible_C: float

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.max_admissible_C)

    def items(self) -> dict:
        return {
            "k_tilde": self.k_tilde,
            "N_tau": self.N_tau,
            "M_tau1": self.M_tau1,
            "R": self.R,
            "R2": self.R2,
            "C": self.C,
            "margin": self.margin,
            "verdict": self.verdict,
            "max_admissible_C": self.max_admissible_C,
            "C_unbounded": self.unbounded,
        }

    def text(self) -> str:
        return report_text(self.items())

    CSV_HEADER = ("k_tilde", "N_tau", "M_tau1", "R", "R2", "C", "margin", "verdict", "max_admissible_C")

    def csv_row(self) -> tuple:
        return tuple(self.items()[k] for k in self.CSV_HEADER)

    def write(self, report_path=None, csv_path=None) -> None:
        if report_path is not None:
            write_report(report_path, self.items())
        if csv_path is not None:
            write_csv(csv_path, self.CSV_HEADER, [self.csv_row()])


def _validate(k_tilde: float, N_tau: float, C: float = 1.0) -> None:
    if N_tau == 0:
        raise WellPosednessError("N_tau = 0: the ratio R = M_tau1/(2 N_tau) is undefined")
    if not k_tilde > 0:
        raise WellPosednessError("k_tilde must be positive")
    if not C > 0:
        raise WellPosednessError("the lumped constant C must be positive")


def ratio(N_tau: float, M_tau1: float) -> float:
    if N_tau == 0:
        raise WellPosednessError("N_tau = 0: the ratio R = M_tau1/(2 N_tau) is undefined")
    return M_tau1 / (2.0 * N_tau)


def max_admissible_C(k_tilde: float, N_tau: float, M_tau1: float) -> float:
    """Supremum of C for which the condition holds; ``inf`` when R = 0."""
    _validate(k_tilde, N_tau)
    R = ratio(N_tau, M_tau1)
    if R == 0:
        return math.inf
    return k_tilde / (R * R)


def check(k_tilde: float, N_tau: float, M_tau1: float, C: float = 1.0) -> WellPosednessReport:
    """Evaluate k_tilde > C R^2 (strict)."""
    _validate(k_tilde, N_tau, C)
    R = ratio(N_tau, M_tau1)
    R2 = R * R
    margin = k_tilde - C * R2
    return WellPosednessReport(
        k_tilde=float(k_tilde), N_tau=float(N_tau), M_tau1=float(M_tau1), R=R, R2=R2, C=float(C),
        margin=margin, verdict="holds" if margin > 0 else "violated",
        max_admissible_C=max_admissible_C(k_tilde, N_tau, M_tau1),
    )


def sweep_C(k_tilde: float, N_tau: float, M_tau1: float, C_values) -> list:
    """One report per C, for tabulating the decision boundary."""
    return [check(k_tilde, N_tau, M_tau1, C) for C in C_values]
