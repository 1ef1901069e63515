//! Regenerate the bundled fixture codes: `cargo run --release --example make_fixtures`.

use prbp_core::ldpc::construct::{build_fixture, four_cycles, FIXTURES};
use prbp_core::ldpc::write_alist;

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).expect("create fixtures dir");
    for spec in FIXTURES {
        let h = build_fixture(spec).unwrap_or_else(|| panic!("construction failed for {}", spec.file));
        let info = h.info();
        println!(
            "{}: N={} M={} K={} rate={:.4} four-cycles={}",
            spec.file,
            info.n,
            info.m,
            info.k,
            info.rate,
            four_cycles(&h)
        );
        std::fs::write(dir.join(spec.file), write_alist(&h)).expect("write alist");
    }
}
