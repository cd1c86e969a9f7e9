from .algebra import AffineExpr, AffineMap, VarId, VarKind
from .constraints import InequalitySystem, LinearConstraint
from .network import Activation, Layer, Network
from .preimage import BranchBudget, Preimage, SignPattern, SolutionBranch

__all__ = [
    "AffineExpr", "AffineMap", "VarId", "VarKind",
    "InequalitySystem", "LinearConstraint",
    "Activation", "Layer", "Network",
    "BranchBudget", "Preimage", "SignPattern", "SolutionBranch",
]
