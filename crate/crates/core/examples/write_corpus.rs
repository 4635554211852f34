//! Regenerates the JSON files under `corpus/` from the bundled scenes.

use std::path::PathBuf;

fn main() -> translab::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "corpus".into()));
    std::fs::create_dir_all(&dir)?;
    for s in translab::corpus::scenes::<f64>()? {
        std::fs::write(dir.join(format!("{}.json", s.id)), s.to_json() + "\n")?;
    }
    Ok(())
}
