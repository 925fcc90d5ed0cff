"""Traces of state trajectories and satisfaction checks for finite runs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .abstraction import DUMMY, label_state
from .geometry import GeometryError, Workspace
from .ltl import Formula, Plan, word_satisfies

PASS = "pass"
FAIL = "fail"
INCOMPLETE = "incomplete"


class EmptyTrace(ValueError):
    pass


@dataclass
class Trace:
    """Stutter-free letters (region indices) and the step where each starts.

    ``constant`` marks a trace whose last letter repeats forever, which is how
    an observed trajectory that ends inside a region is read.
    """

    letters: list
    steps: list
    constant: bool = False

    def __str__(self):
        body = " ".join(f"p{a}" for a in self.letters)
        return body + (" ..." if self.constant else "")


def trajectory_of_interest(ws: Workspace, states) -> tuple[np.ndarray, list]:
    """Labeled states only, with their original indices."""
    keep = []
    labels = []
    for k, x in enumerate(np.atleast_2d(np.asarray(states, dtype=float))):
        lab = label_state(ws, x)
        if lab != DUMMY:
            keep.append(k)
            labels.append(lab)
    return np.asarray(keep, dtype=int), labels


def extract_trace(ws: Workspace, states) -> Trace:
    """Trace of a finite state sequence.

    Consecutive duplicate labels and unlabeled states are dropped. The final
    letter is read as eventually constant when the last state is labeled.
    """
    idx, labels = trajectory_of_interest(ws, states)
    if len(labels) == 0:
        raise EmptyTrace("no labeled states")
    letters, steps = [labels[0]], [int(idx[0])]
    for k, lab in zip(idx[1:], labels[1:]):
        if lab != letters[-1]:
            letters.append(lab)
            steps.append(int(k))
    n = len(np.atleast_2d(states))
    return Trace(letters, steps, constant=bool(idx[-1] == n - 1))


@dataclass
class Verdict:
    status: str
    reason: str = ""
    divergence: Optional[int] = None
    trace: Optional[Trace] = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS


def check_run(formula: Formula, plan: Plan, ws: Workspace, run_states, cycles: int = 2) -> Verdict:
    """Evidence that a finite run realizes ``plan`` and therefore ``formula``.

    The run passes when (a) the plan's word satisfies the formula, (b) every
    state is in the free space, (c) the run's trace is a prefix of the plan's
    stutter-free trace, and (d) the run covered the plan prefix plus ``cycles``
    suffix periods. An eventually constant plan instead needs the run to end
    in the final region.
    """
    prefix, cycle = plan.lasso()
    if not word_satisfies(formula, prefix, cycle):
        return Verdict(FAIL, "plan word does not satisfy the formula")
    try:
        trace = extract_trace(ws, run_states)
    except GeometryError as exc:
        return Verdict(FAIL, str(exc))
    except EmptyTrace as exc:
        return Verdict(INCOMPLETE, str(exc))
    constant = len(set(plan.suffix)) == 1
    if constant:
        expected = plan.collapsed_letters(len(plan.prefix) + 1)
        needed = len(expected)
    else:
        needed = len(plan.collapsed_letters(len(plan.prefix))) + cycles * len(plan.suffix)
        expected = plan.collapsed_letters(max(needed, len(trace.letters)))
    for pos, (a, b) in enumerate(zip(trace.letters, expected)):
        if a != b:
            return Verdict(FAIL, f"trace diverges from the plan at letter {pos}: p{a} instead of p{b}",
                           divergence=pos, trace=trace)
    if len(trace.letters) > len(expected):
        pos = len(expected)
        return Verdict(FAIL, f"trace continues past the plan at letter {pos}", divergence=pos, trace=trace)
    if len(trace.letters) < needed:
        return Verdict(INCOMPLETE, f"run covers {len(trace.letters)} of {needed} required letters", trace=trace)
    if constant and not trace.constant:
        return Verdict(INCOMPLETE, "run does not end inside the final region", trace=trace)
    return Verdict(PASS, "trace follows the plan", trace=trace,
                   details={"letters": len(trace.letters), "required": needed})
