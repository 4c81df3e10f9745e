"""Partition covariates by how they can ever relate to treatment and outcome.

All quantified d-separation statements ("for every conditioning set" /
"for some conditioning set") are decided structurally through the
realizably-open-path search in :mod:`.graph`; subset enumeration exists only
as the brute-force oracle in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .graph import CausalDag, exists_open_given_some_conditioning


@dataclass(frozen=True)
class VariableClassification:
    """Covariate partition plus the single-witness suboptimality flags.

    ``precision``: never connectable to the treatment, connectable to the
    outcome.  ``extended_confounding``: connectable to both.  ``irrelevant``:
    never connectable to the outcome.  The three partition the covariates.
    Suboptimal entries are (variable, witness) pairs; each witness satisfies
    the defining separations and is the lowest-index qualifying node.
    """

    precision: tuple[int, ...]
    extended_confounding: tuple[int, ...]
    irrelevant: tuple[int, ...]
    suboptimal_precision: tuple[tuple[int, int], ...] = ()
    suboptimal_confounding: tuple[tuple[int, int], ...] = ()

    @property
    def suboptimal_precision_vars(self) -> frozenset[int]:
        return frozenset(v for v, _ in self.suboptimal_precision)

    @property
    def suboptimal_confounding_vars(self) -> frozenset[int]:
        return frozenset(v for v, _ in self.suboptimal_confounding)


def classify(g: CausalDag, force: bool = False) -> VariableClassification:
    """Classify every covariate and flag the suboptimal ones."""
    gp = g.without_treatment_edge
    precision: list[int] = []
    confounding: list[int] = []
    irrelevant: list[int] = []
    for v in g.covariates:
        to_outcome = exists_open_given_some_conditioning(
            gp, v, g.outcome, force=force
        )
        if not to_outcome:
            irrelevant.append(v)
            continue
        to_treatment = exists_open_given_some_conditioning(
            gp, v, g.treatment, force=force
        )
        (confounding if to_treatment else precision).append(v)
    cls = VariableClassification(tuple(precision), tuple(confounding), tuple(irrelevant))
    return replace(
        cls,
        suboptimal_precision=suboptimal_precision(g, cls, force=force),
        suboptimal_confounding=suboptimal_confounding(g, cls, force=force),
    )


def suboptimal_precision(
    g: CausalDag, cls: VariableClassification, force: bool = False
) -> tuple[tuple[int, int], ...]:
    """Precision variables shadowed by a single other precision variable.

    P is flagged when some other precision variable P* blocks every path from
    P to the outcome no matter what else is conditioned on; adjusting for P*
    instead is then never worse.
    """
    gp = g.without_treatment_edge
    flagged: list[tuple[int, int]] = []
    for p in cls.precision:
        for witness in cls.precision:
            if witness == p:
                continue
            if not exists_open_given_some_conditioning(
                gp, p, g.outcome, forced_in=(witness,), force=force
            ):
                flagged.append((p, witness))
                break
    return tuple(flagged)


def suboptimal_confounding(
    g: CausalDag, cls: VariableClassification, force: bool = False
) -> tuple[tuple[int, int], ...]:
    """Extended confounding variables shadowed by a single other one.

    W is flagged when some other extended confounding variable W* satisfies,
    for every further conditioning set: W is separated from the outcome given
    W*, and W* is separated from the treatment given W.
    """
    gp = g.without_treatment_edge
    flagged: list[tuple[int, int]] = []
    for w in cls.extended_confounding:
        for witness in cls.extended_confounding:
            if witness == w:
                continue
            if exists_open_given_some_conditioning(
                gp, w, g.outcome, forced_in=(witness,), force=force
            ):
                continue
            if exists_open_given_some_conditioning(
                gp, witness, g.treatment, forced_in=(w,), force=force
            ):
                continue
            flagged.append((w, witness))
            break
    return tuple(flagged)
