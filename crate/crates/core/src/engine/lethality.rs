//! Neutralization probability as a piecewise-linear function of miss distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes `(miss distance m, probability)` with strictly increasing distance.
///
/// Below the first node the curve is flat at the first probability; past
/// the last node it is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PHitTable(pub Vec<(f64, f64)>);

impl Default for PHitTable {
    /// Plateau out to half a meter, then decay to zero at three meters.
    fn default() -> Self {
        PHitTable(vec![
            (0.0, 0.95),
            (0.5, 0.95),
            (1.0, 0.60),
            (2.0, 0.15),
            (3.0, 0.0),
        ])
    }
}

impl PHitTable {
    pub fn validate(&self) -> Result<()> {
        let nodes = &self.0;
        if nodes.is_empty() {
            return Err(Error::Validation(
                "p_hit_table must have at least one node".into(),
            ));
        }
        if nodes
            .iter()
            .any(|&(d, p)| !d.is_finite() || !(0.0..=1.0).contains(&p))
        {
            return Err(Error::Validation(
                "p_hit_table probabilities must lie in [0, 1] and distances be finite".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Validation(
                "p_hit_table distances must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.0
    }

    /// Hit probability at miss distance `d`.
    pub fn p_hit(&self, d: f64) -> f64 {
        let nodes = &self.0;
        let (first_d, first_p) = nodes[0];
        let (last_d, last_p) = nodes[nodes.len() - 1];
        if d <= first_d {
            return first_p;
        }
        if d > last_d {
            return 0.0;
        }
        if d == last_d {
            return last_p;
        }
        // First node strictly beyond d; d > first_d so hi >= 1.
        let hi = nodes.partition_point(|&(x, _)| x <= d);
        let (x0, y0) = nodes[hi - 1];
        if x0 == d {
            return y0;
        }
        let (x1, y1) = nodes[hi];
        y0 + (d - x0) * (y1 - y0) / (x1 - x0)
    }
}

/// Hit probability for `distance` under `table`.
pub fn p_hit(distance: f64, table: &PHitTable) -> f64 {
    table.p_hit(distance)
}
