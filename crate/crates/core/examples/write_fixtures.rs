//! Regenerates the bundled fixtures under `fixtures/` at the workspace root.
//!
//!     cargo run -p loscure --example write_fixtures

use std::fs::File;
use std::path::Path;

use loscure::sim::SimulationConfig;
use loscure::synthetic::{generate_linelist, write_linelist, SyntheticSpec};

fn main() -> loscure::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    std::fs::create_dir_all(&dir)?;

    let spec = SyntheticSpec::default();
    let records = generate_linelist(&spec);
    write_linelist(&records, File::create(dir.join("synthetic_linelist.csv"))?)?;
    std::fs::write(
        dir.join("synthetic_spec.json"),
        serde_json::to_string_pretty(&spec)? + "\n",
    )?;

    let config = SimulationConfig::default();
    std::fs::write(dir.join("default.json"), config.to_json_pretty()? + "\n")?;

    println!(
        "wrote {} synthetic records to {}",
        records.len(),
        dir.display()
    );
    Ok(())
}
