"""Verification and incremental re-verification of multiagent FSA plans."""

from .algebra import ActionAlphabet, AtomSet, AtomUniverse, lift, lift_action
from .automaton import UNDEFINED, PlanFSA, is_complete, load_plan, dump_plan, simulate
from .checker import (
    ErrorKind, ErrorMode, ErrorReport, Status, VerificationContext, Verdict,
    inc_at_ni, inc_gen_i, inc_gen_r, inc_i_ni, total_at, total_i,
)
from .errors import ContractViolation, InputError, OracleBoundExceeded, ParseError
from .operators import (
    Method, OperatorSchema, PropertyClass, SafetyVerdict, Situation, TableEdit,
    apply_edit, classify_edit, most_favorable, random_edit, sml_lookup,
)
from .product import ProductFSA, inc_product, inc_product_ni, product_with_property, total_product
from .property import (
    InvarianceProperty, ResponseProperty, neg_fsa, parse_properties, parse_property,
)

__all__ = [name for name in dir() if not name.startswith("_")]
