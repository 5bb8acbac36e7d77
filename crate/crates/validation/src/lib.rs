//! Holds the `acceptance` test target, which prints one PASS/FAIL line per
//! criterion and exits with status 1 when any criterion fails.
