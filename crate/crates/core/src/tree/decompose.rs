use rayon::prelude::*;

use super::TreeOnGrid;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, LocalField};
use crate::numerics::Accumulator;

/// The parts `g_t = f_t − f̃_t`, each stored on the cells of `Ω_t`.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub parts: Vec<LocalField>,
    /// `∫ g_t`.
    pub integrals: Vec<f64>,
    /// `∫ f_t = ∫ f φ_t`.
    pub local_integrals: Vec<f64>,
    /// `∫_{W_t} Σ_{k⪰t} f_k`.
    pub subtree_integrals: Vec<f64>,
}

impl DecompositionResult {
    /// `Σ_t g_t` as a grid function; equals `f` up to rounding.
    pub fn reconstruct(&self, tog: &TreeOnGrid) -> Result<GridFunction> {
        let mut out = GridFunction::zeros(tog.grid().clone(), tog.mask().clone(), 1)?;
        for part in &self.parts {
            out.add_local(part);
        }
        Ok(out)
    }
}

impl TreeOnGrid {
    fn check_scalar(&self, f: &GridFunction) -> Result<()> {
        if **f.grid() != **self.grid() {
            return Err(Error::InvalidParameter("function and tree live on different grids".into()));
        }
        if f.components() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: f.components() });
        }
        if let Some(c) = f.masked_cells().find(|&c| !f.value(c)[0].is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at cell {c}")));
        }
        Ok(())
    }

    /// `φ_t = χ_{Ω_t} / Σ_s χ_{Ω_s}` on the cells of every `Ω_t`.
    pub fn partition_of_unity(&self) -> Result<Vec<LocalField>> {
        if let Some(cell) = (0..self.grid().len()).find(|&c| self.mask()[c] && self.cover_count(c) == 0) {
            return Err(Error::CoverGap { cell });
        }
        Ok((0..self.tree().len())
            .into_par_iter()
            .map(|t| {
                let cells = self.omega_cells(t).clone();
                let values = cells.iter().map(|c| 1.0 / self.cover_count(c) as f64).collect();
                LocalField { cells, components: 1, values }
            })
            .collect())
    }

    /// Splits `f` into parts supported in the subdomains: `g_t = f_t − f̃_t`
    /// with `f_t = f φ_t` and
    /// `f̃_t = χ_{B_t} S_t/|B_t| − Σ_{s_p = t} χ_{B_s} S_s/|B_s|`, where
    /// `S_t = ∫_{W_t} Σ_{k⪰t} f_k` (no first term at the root).
    pub fn decompose(&self, f: &GridFunction) -> Result<DecompositionResult> {
        self.check_scalar(f)?;
        self.require_structure()?;
        let tree = self.tree();
        let dv = self.grid().cell_measure();

        let local_integrals: Vec<f64> = (0..tree.len())
            .into_par_iter()
            .map(|t| {
                let mut acc = Accumulator::new();
                for c in self.omega_cells(t).iter() {
                    acc.add(f.value(c)[0] / self.cover_count(c) as f64);
                }
                acc.value() * dv
            })
            .collect();

        let mut subtree_integrals = local_integrals.clone();
        for t in tree.post_order() {
            let mut acc = Accumulator::new();
            acc.add(local_integrals[t]);
            for &s in tree.children(t) {
                acc.add(subtree_integrals[s]);
            }
            subtree_integrals[t] = acc.value();
        }
        // Density carried by each connector.
        let flux: Vec<f64> =
            (0..tree.len()).map(|t| if t == tree.root() { 0.0 } else { subtree_integrals[t] / self.connector_measure(t) }).collect();

        let parts: Vec<LocalField> = (0..tree.len())
            .into_par_iter()
            .map(|t| {
                let cells = self.omega_cells(t).clone();
                let mut values: Vec<f64> = cells.iter().map(|c| f.value(c)[0] / self.cover_count(c) as f64).collect();
                if t != tree.root() {
                    for c in self.connector_cells(t).iter() {
                        let i = cells.position(c).expect("connector inside its subdomain");
                        values[i] -= flux[t];
                    }
                }
                for &s in tree.children(t) {
                    for c in self.connector_cells(s).iter() {
                        let i = cells.position(c).expect("child connector inside the parent subdomain");
                        values[i] += flux[s];
                    }
                }
                LocalField { cells, components: 1, values }
            })
            .collect();

        let integrals = parts.iter().map(|g| g.integral(dv)[0]).collect();
        Ok(DecompositionResult { parts, integrals, local_integrals, subtree_integrals })
    }
}
