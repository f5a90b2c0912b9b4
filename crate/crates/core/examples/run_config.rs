//! Resolve a run configuration the way the command line does: file, then
//! `CLEAR_*` environment variables, then explicit overrides.
//!
//! ```bash
//! CLEAR_TRAIN_EPOCHS=12 cargo run --example run_config
//! ```

use clear::config::Config;

pub fn main() -> clear::Result<()> {
    let file = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("config/example.toml");
    let overrides = vec![("eval.methods".to_string(), "baseline,clear".to_string())];
    let cfg = Config::resolve(Some(&file), std::env::vars(), &overrides)?;
    print!("{}", cfg.to_toml());
    Ok(())
}
