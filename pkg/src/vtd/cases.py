"""Registry of the twelve convergence-study configurations.

Every case runs VTD(6, 3) on the ``paper-nonlinear`` problem over N = 32..1024
uniform steps of the window (0, 16); cases differ only in the integrator and
interpolation nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import yaml

from .errors import UnknownCase

DEFAULT_STEPS = (32, 64, 128, 256, 512, 1024)
# the tabulated reference errors are reproduced on (0, 16)
STUDY_T_END = "16"
_FOUR = "explicit:[-3/4,-1/4,1/4,3/4]"
_SIX_EQUI = "explicit:[-1,-3/5,-1/5,1/5,3/5,1]"


@dataclass(frozen=True)
class CaseConfig:
    name: str
    integrator: str
    cascade: tuple = ()
    r: int = 6
    k: int = 3
    steps: tuple = DEFAULT_STEPS
    bits: int | None = None
    problem: str = "paper-nonlinear"
    t_end: str | None = STUDY_T_END
    description: str = ""
    tabulated: tuple = ("linf", "w1inf", "mesh")

    def __post_init__(self):
        steps = tuple(int(n) for n in self.steps)
        if not steps or any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError(f"step list must be non-empty and strictly increasing: {steps}")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "cascade", tuple(self.cascade))
        if not 0 <= self.k <= self.r:
            raise ValueError(f"need 0 <= k <= r, got r={self.r}, k={self.k}")

    def with_overrides(self, steps=None, bits=None) -> "CaseConfig":
        changes = {}
        if steps:
            changes["steps"] = tuple(steps)
        if bits:
            changes["bits"] = bits
        return replace(self, **changes) if changes else self


CASES: dict[str, CaseConfig] = {
    c.name: c
    for c in [
        CaseConfig("case1", _FOUR, ("radau_left:3",), description="4 equispaced-interior nodes, left Radau(3) interpolation"),
        CaseConfig("case2a", _FOUR, ("gauss:5",), tabulated=("linf",)),
        CaseConfig("case2a*", _FOUR, ("explicit:[-5/6,-13/23,1/10,12/17,4/5]",), tabulated=("linf",)),
        CaseConfig("case2b", _FOUR, (_FOUR,), tabulated=("linf",)),
        CaseConfig("case2c", _SIX_EQUI, (_SIX_EQUI,), tabulated=("linf",)),
        CaseConfig("case3a", "gauss:6", ("explicit:[-1,-1/2,1/4,3/4,1]",), tabulated=("linf", "w1inf")),
        CaseConfig("case3b", "gauss:6", ("radau_left:3",), tabulated=("linf", "w1inf")),
        CaseConfig("case3c", "gauss:6", ("gauss:5",)),
        CaseConfig("case4a", "gauss:6", ("lobatto:5",), tabulated=("linf", "mesh")),
        CaseConfig("case4b", "gauss:6", ("gauss:6",), tabulated=("linf", "mesh")),
        CaseConfig("case4c", "gauss:4", ("gauss:4",), tabulated=("linf", "mesh")),
        CaseConfig("case4d", "gauss:6", ("gauss:3",), tabulated=("linf", "mesh")),
    ]
}


def get_case(name: str) -> CaseConfig:
    key = name.strip().lower()
    if key not in CASES:
        raise UnknownCase(f"unknown case {name!r}; known: {', '.join(CASES)}")
    return CASES[key]


def load_config(path) -> list[CaseConfig]:
    """Read one or more YAML documents, each describing a case.

    Keys: ``name``, ``integrator``, ``cascade`` (list, omitted = identity),
    ``r``, ``k``, ``steps``, ``bits``, ``problem``, ``t_end`` (null keeps the
    problem's own horizon).
    """
    with open(path, encoding="utf-8") as fh:
        docs = [d for d in yaml.safe_load_all(fh) if d]
    out = []
    for doc in docs:
        cascade = doc.get("cascade") or ()
        if isinstance(cascade, str):
            cascade = () if cascade == "identity" else (cascade,)
        out.append(
            CaseConfig(
                name=str(doc["name"]),
                integrator=str(doc["integrator"]),
                cascade=tuple(str(s) for s in cascade),
                r=int(doc.get("r", 6)),
                k=int(doc.get("k", 3)),
                steps=tuple(doc.get("steps", DEFAULT_STEPS)),
                bits=doc.get("bits"),
                problem=str(doc.get("problem", "paper-nonlinear")),
                t_end=None if doc.get("t_end", STUDY_T_END) is None else str(doc.get("t_end", STUDY_T_END)),
                tabulated=tuple(doc.get("tabulated", ("linf", "w1inf", "mesh"))),
            )
        )
    return out
