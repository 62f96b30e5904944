//! Uniform phenotype grid and grid-sampled distribution functions.

use crate::error::{Result, SimError};

/// Uniform discretization of the truncated phenotype domain `[v_min, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhenotypeGrid {
    v_min: f64,
    v_max: f64,
    n_points: usize,
    dv: f64,
}

impl PhenotypeGrid {
    pub fn new(v_min: f64, v_max: f64, n_points: usize) -> Result<Self> {
        if !(v_min.is_finite() && v_max.is_finite()) || v_min >= v_max {
            return Err(SimError::config(
                "v_min",
                format!("domain [{v_min}, {v_max}] must satisfy v_min < v_max"),
            ));
        }
        if n_points < 3 {
            return Err(SimError::config("dv", "grid needs at least 3 nodes"));
        }
        let dv = (v_max - v_min) / (n_points - 1) as f64;
        Ok(Self {
            v_min,
            v_max,
            n_points,
            dv,
        })
    }

    /// Builds a grid from a requested spacing; the range must be an integer
    /// multiple of `dv` (to 1e-9 relative).
    pub fn with_spacing(v_min: f64, v_max: f64, dv: f64) -> Result<Self> {
        if !(dv > 0.0) || !dv.is_finite() {
            return Err(SimError::config(
                "dv",
                format!("spacing {dv} must be positive"),
            ));
        }
        let cells = (v_max - v_min) / dv;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(SimError::config(
                "dv",
                format!(
                    "domain length {} is not a multiple of dv = {dv}",
                    v_max - v_min
                ),
            ));
        }
        Self::new(v_min, v_max, rounded as usize + 1)
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        self.v_min + k as f64 * self.dv
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.node(k))
    }

    /// Index of the cell `[node - dv/2, node + dv/2)` containing `v`.
    pub fn cell_of(&self, v: f64) -> Option<usize> {
        let k = ((v - self.v_min) / self.dv + 0.5).floor();
        if k >= 0.0 && (k as usize) < self.n_points {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Trapezium rule for samples taken at the grid nodes.
    pub fn trapezium(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let n = values.len();
        let interior: f64 = values.iter().sum();
        self.dv * (interior - 0.5 * (values[0] + values[n - 1]))
    }

    /// Trapezium rule for `weight(v) * values`.
    pub fn trapezium_weighted(&self, values: &[f64], weight: impl Fn(f64) -> f64) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let n = values.len();
        let mut acc = 0.0;
        for (k, &f) in values.iter().enumerate() {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            acc += w * weight(self.node(k)) * f;
        }
        self.dv * acc
    }

    /// Trapezium quadrature weight of node `k`.
    #[inline]
    pub fn quadrature_weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.n_points {
            0.5 * self.dv
        } else {
            self.dv
        }
    }

    pub fn same_as(&self, other: &PhenotypeGrid) -> bool {
        self.n_points == other.n_points
            && (self.v_min - other.v_min).abs() <= 1e-12 * self.v_min.abs().max(1.0)
            && (self.v_max - other.v_max).abs() <= 1e-12 * self.v_max.abs().max(1.0)
    }
}

/// A phenotype distribution function sampled on a grid at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionState {
    pub grid: PhenotypeGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DistributionState {
    pub fn zeros(grid: PhenotypeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            time: 0.0,
        }
    }

    pub fn from_fn(grid: PhenotypeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(f).collect(),
            time: 0.0,
        }
    }

    /// Trapezium mass, the density of the population.
    pub fn density(&self) -> f64 {
        self.grid.trapezium(&self.values)
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|f| f * f).collect();
        self.grid.trapezium(&sq).max(0.0).sqrt()
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid node where the distribution attains its maximum.
    pub fn mode(&self) -> f64 {
        let (k, _) =
            self.values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &f)| {
                    if f > best.1 {
                        (k, f)
                    } else {
                        best
                    }
                });
        self.grid.node(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_node_hits_v_max() {
        let g = PhenotypeGrid::with_spacing(-15.0, 15.0, 0.025).unwrap();
        assert_eq!(g.len(), 1201);
        let last = g.node(g.len() - 1);
        assert!((last - 15.0).abs() <= 1e-12 * 15.0);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(PhenotypeGrid::new(1.0, 1.0, 10).is_err());
        assert!(PhenotypeGrid::new(0.0, 1.0, 2).is_err());
        assert!(PhenotypeGrid::with_spacing(0.0, 1.0, 0.3).is_err());
        assert!(PhenotypeGrid::with_spacing(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn trapezium_is_exact_for_linear() {
        let g = PhenotypeGrid::new(-1.0, 3.0, 9).unwrap();
        let vals: Vec<f64> = g.nodes().map(|v| 2.0 * v + 1.0).collect();
        // ∫_{-1}^{3} (2v+1) dv = [v² + v] = 12 - 0 = 12
        assert!((g.trapezium(&vals) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn cells_cover_nodes() {
        let g = PhenotypeGrid::new(0.0, 1.0, 11).unwrap();
        assert_eq!(g.cell_of(0.0), Some(0));
        assert_eq!(g.cell_of(0.04), Some(0));
        assert_eq!(g.cell_of(0.06), Some(1));
        assert_eq!(g.cell_of(1.0), Some(10));
        assert_eq!(g.cell_of(1.2), None);
        assert_eq!(g.cell_of(-0.2), None);
    }
}
