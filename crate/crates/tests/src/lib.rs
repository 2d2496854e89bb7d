//! Acceptance suite for the skelmap workspace; see `tests/acceptance.rs`.
