"""Residual bookkeeping shared by the structure checks and the identity verifier."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class IdentityId(str, Enum):
    SYM_PSI2 = "SYM_PSI2"
    PSI_CUBE = "PSI_CUBE"
    NABLA_ETA = "NABLA_ETA"
    DETA_CPSI = "DETA_CPSI"
    NABLA_XI = "NABLA_XI"
    NABLA_PSI = "NABLA_PSI"
    NABLA_PSI_SQ = "NABLA_PSI_SQ"
    R_XI = "R_XI"
    R_PHI_COMMUTE = "R_PHI_COMMUTE"
    P_IDENTITY = "P_IDENTITY"
    PHI4 = "PHI4"
    PHI_SECTIONAL_SUM = "PHI_SECTIONAL_SUM"

    def __str__(self):
        return self.value


# formula each identity checks, echoed into reports
FORMULAS = {
    IdentityId.SYM_PSI2: "g(psi^2 X, Y) = g(X, psi^2 Y)",
    IdentityId.PSI_CUBE: "psi^3 = -psi",
    IdentityId.NABLA_ETA: "(nabla_X eta)(Y) = (c/2) Psi(X, Y)",
    IdentityId.DETA_CPSI: "d eta = c Psi",
    IdentityId.NABLA_XI: "nabla_X xi = -(c/2) psi X",
    IdentityId.NABLA_PSI: "(nabla_X psi)Y = (c/2)(eta(Y) psi^2 X - g(psi^2 X, Y) xi)",
    IdentityId.NABLA_PSI_SQ: "(nabla_X psi^2)Y = (c/2)(Psi(X, Y) xi - eta(Y) psi X)",
    IdentityId.R_XI: "R_XY xi = (c^2/4)(eta(X) psi^2 Y - eta(Y) psi^2 X)",
    IdentityId.R_PHI_COMMUTE: "R_XY phi Z - phi R_XY Z = (c^2/4)(five psi/eta terms)",
    IdentityId.P_IDENTITY: "g(R_XY phi Z, W) + g(R_XY Z, phi W) = -P(X, Y, Z, W)",
    IdentityId.PHI4: "g(R_{phiX phiY} phi Z, phi W) = g(R_XY Z, W) + (c^2/4)(four Psi terms), X..W horizontal",
    IdentityId.PHI_SECTIONAL_SUM: "H_1(X) + H_2(X) + H_3(X) = (3c^2/4) g(X_E4l, X_E4l)^2, X horizontal",
}

# identities whose right-hand side carries a factor of c, or which involve psi
# (only defined for rank 4l+3); all are reported vacuous when c = 0
C_WEIGHTED = frozenset(IdentityId)


@dataclass
class ResidualStat:
    """Worst residual of one identity over a batch of trials.

    ``scale`` is the largest magnitude among the individual terms entering the
    identity, floored at 1, and ``normalized = max_abs / scale``.
    """

    identity: str
    alpha: int | None = None
    max_abs: float = 0.0
    scale: float = 1.0
    normalized: float = 0.0
    n_trials: int = 0
    vacuous: bool = False
    worst_args: list = field(default_factory=list, repr=False)

    def add(self, residual, *terms, args=None):
        """Record one trial. ``residual`` and ``terms`` are scalars or vectors."""
        r = float(np.max(np.abs(residual), initial=0.0))
        t = max([float(np.max(np.abs(x), initial=0.0)) for x in terms] + [1.0])
        self.n_trials += 1
        if r > self.max_abs or self.n_trials == 1:
            self.worst_args = [] if args is None else [np.asarray(a).tolist() for a in args]
        self.max_abs = max(self.max_abs, r)
        self.scale = max(self.scale, t)
        self.normalized = self.max_abs / self.scale
        return self

    def merge(self, other):
        if other.max_abs > self.max_abs:
            self.worst_args = other.worst_args
        self.max_abs = max(self.max_abs, other.max_abs)
        self.scale = max(self.scale, other.scale)
        self.normalized = self.max_abs / self.scale
        self.n_trials += other.n_trials
        self.vacuous = self.vacuous or other.vacuous
        return self

    def passed(self, tol):
        return self.vacuous or self.normalized <= tol
