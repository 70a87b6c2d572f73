//! Browser demo bindings.

pub fn placeholder() {}
