from gaest.formulae.expr import (
    FUNCTIONS, VARIABLES, BinOp, Call, Neg, Num, Var, evaluate, parse_expression, to_text, variables_of,
)
from gaest.formulae.library import (
    FormulaResult, FormulaSpec, baseline_estimates, eval_formula, example_library_path, load_library,
)

__all__ = [
    "FUNCTIONS", "VARIABLES", "BinOp", "Call", "Neg", "Num", "Var", "evaluate", "parse_expression",
    "to_text", "variables_of", "FormulaResult", "FormulaSpec", "baseline_estimates", "eval_formula",
    "example_library_path", "load_library",
]
