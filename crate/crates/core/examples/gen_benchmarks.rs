// SPDX-License-Identifier: Apache-2.0
//! Regenerate the synthetic benchmark files under `benchmarks/`.

use std::path::Path;

use lite_core::benchmarks::{generate, SYNTHETIC};

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("benchmarks");
    for spec in &SYNTHETIC {
        let path = dir.join(format!("{}.bench", spec.name));
        std::fs::write(&path, generate(spec))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
