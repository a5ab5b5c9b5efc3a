//! Shared setup for the criterion benchmarks.

use std::path::Path;

use tieflow::{load_case, Case, Network};

/// Loads a bundled fixture by file name.
pub fn fixture(name: &str) -> (Case, Network) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    let case = load_case(&path).expect("bundled fixture parses");
    let net = Network::new(case.system.clone()).expect("bundled fixture is connected");
    (case, net)
}
