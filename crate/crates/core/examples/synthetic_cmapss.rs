//! Writes simulated fleets in the NASA file layout, with the published unit counts.
//!
//! `cargo run -p fedrul-core --example synthetic_cmapss -- <dir> [seed]`

use std::path::PathBuf;

use fedrul::cmapss::synthetic::{generate, rul_text, to_whitespace_text, FleetSpec};
use fedrul::cmapss::Split;
use fedrul::AgentId;

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/synthetic".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    std::fs::create_dir_all(&dir)?;
    for agent in AgentId::ALL {
        let spec = FleetSpec::new(
            agent,
            agent.expected_units(Split::Train),
            agent.expected_units(Split::Test),
            seed + agent.index() as u64,
        );
        let fleet = generate(&spec);
        let name = agent.name();
        std::fs::write(
            dir.join(format!("train_{name}.txt")),
            to_whitespace_text(&fleet.train),
        )?;
        std::fs::write(
            dir.join(format!("test_{name}.txt")),
            to_whitespace_text(&fleet.test),
        )?;
        std::fs::write(
            dir.join(format!("RUL_{name}.txt")),
            rul_text(&fleet.test_rul),
        )?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
