//! Holds the `acceptance` test target, kept in its own package so it runs
//! after the unit and property suites of the other crates.
