//! Exact symbolic calculus for `D = (1/sin z) d/dz` and `L = (1/z) d/dz`.

mod expr;
mod laurent;
mod lcosh;
mod phi;

pub use expr::{Hyp, Rational, TermKey, TrigExpr, TrigTerm};
pub use laurent::{expand_at_zero, ZeroSeries, DEFAULT_CUT};
pub use lcosh::{dk_cosh, l_cosh, log_dk_cosh, log_l_cosh_scaled};
pub use phi::{phi_table, PhiCache, PhiStack, PhiTable, PhiValues, DEFAULT_ORDER_CAP, MAX_ORDER};

/// `D` applied to an expression.
pub fn apply_d(e: &TrigExpr) -> TrigExpr {
    e.apply_d()
}

/// `d/dz` applied to an expression.
pub fn differentiate(e: &TrigExpr) -> TrigExpr {
    e.differentiate()
}
