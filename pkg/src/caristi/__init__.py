"""Exact-arithmetic fixed-point solvers, Caristi and Ekeland machinery, and function codes."""

from .codes import (
    BaireCode,
    BorelCode,
    Clause,
    ContinuousCode,
    Enumeration,
    LscClause,
    LscCode,
    borel_to_continuous,
    clean_normalize,
    continuous_to_borel,
    eval_baire,
    eval_borel_membership,
    eval_continuous,
    eval_lsc,
    interval_lsc_code,
    kb_compare,
    kb_linearize,
    lipschitz_code,
    lsc_to_monotone_limit,
    monotone_limit_to_lsc,
)
from .envelope import critical_transfer_check, delta_critical_violations, ekeland_descent, envelope
from .gadgets import (
    BaireGadget,
    CantorGadget,
    FiniteTree,
    InjectionTable,
    IntervalGadget,
    path_defect_potential,
)
from .metric import BAIRE, CANTOR, UNIT_INTERVAL, Ball, FiniteSpace, IntervalSpace, Point, Seq
from .rationals import fmt, rat
from .solvers import (
    CaristiSystem,
    UltrametricProblem,
    banach_caristi_iterate,
    priess_crampe_solve,
    verify_caristi,
)

cantor_gadget = CantorGadget
baire_gadget = BaireGadget
interval_gadget = IntervalGadget

__version__ = "0.1.0"
