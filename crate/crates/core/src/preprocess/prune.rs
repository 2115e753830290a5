use rand::Rng as _;

use super::PreprocessError;
use crate::cmapss::TimeSeriesTable;
use crate::rng::{derive_seed, seeded, stream};

/// Random tail removal for training units, so that run-to-failure trajectories
/// look more like the truncated test trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneConfig {
    /// Probability that a unit is pruned at all.
    pub prune_chance: f64,
    /// Fraction of rows removed by a moderate prune.
    pub p: f64,
    /// Probability of a heavy prune (checked before `prune_chance`).
    pub pplus: f64,
    /// Fraction of rows removed by a heavy prune.
    pub heavy_fraction: f64,
    pub seed: u64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            prune_chance: 0.3,
            p: 0.4,
            pplus: 0.1,
            heavy_fraction: 0.75,
            seed: 0,
        }
    }
}

impl PruneConfig {
    /// No unit is ever pruned.
    pub fn disabled() -> Self {
        Self {
            prune_chance: 0.0,
            pplus: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let fractions = [
            ("prune_chance", self.prune_chance),
            ("p", self.p),
            ("pplus", self.pplus),
            ("heavy_fraction", self.heavy_fraction),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(PreprocessError::BadConfig(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        if self.pplus > self.prune_chance {
            return Err(PreprocessError::BadConfig(format!(
                "pplus {} exceeds prune_chance {}",
                self.pplus, self.prune_chance
            )));
        }
        Ok(())
    }

    /// Rows a unit of `rows` rows keeps for a uniform `draw`.
    pub fn rows_kept(&self, rows: usize, draw: f64) -> usize {
        let dropped = if draw <= self.pplus {
            (rows as f64 * self.heavy_fraction) as usize
        } else if draw <= self.prune_chance {
            (rows as f64 * self.p) as usize
        } else {
            0
        };
        rows - dropped.min(rows)
    }

    /// The unit's single uniform draw, derived from the seed and the unit id.
    pub fn draw(&self, unit: u32) -> f64 {
        seeded(derive_seed(self.seed, &[stream::PRUNE, u64::from(unit)])).random::<f64>()
    }
}

/// Drops trailing rows per unit; surviving rows keep their RUL labels.
pub fn prune_units(
    table: &TimeSeriesTable,
    cfg: &PruneConfig,
) -> Result<TimeSeriesTable, PreprocessError> {
    cfg.validate()?;
    let keep: Vec<usize> = table
        .units()
        .iter()
        .map(|span| cfg.rows_kept(span.len(), cfg.draw(span.unit)))
        .collect();
    Ok(table.truncate_units(&keep))
}
