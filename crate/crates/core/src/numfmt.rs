//! Shortest round-trip decimal formatting for numeric output.

/// `f64` rendered with the fewest digits that parse back to the same value.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
