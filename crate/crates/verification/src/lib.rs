//! Holds the `acceptance` test target, which runs every end-to-end check on
//! the MSC fixture and prints one PASS/FAIL line per criterion:
//!
//! ```text
//! cargo test -p msequiv-verification --test acceptance
//! ```
