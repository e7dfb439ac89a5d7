//! Home of the `acceptance` test target. Run it with
//! `cargo test -p trendbias-validation --test acceptance`.
