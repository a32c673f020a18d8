use super::TreeOnGrid;
use crate::error::Result;
use crate::grid::GridFunction;

impl TreeOnGrid {
    /// `Tf = Σ_{t≠a} χ_{B_t} |W_t|⁻¹ ∫_{W_t} |f|`.
    pub fn hardy_operator(&self, f: &GridFunction) -> Result<GridFunction> {
        let abs: Vec<f64> = (0..self.grid().len()).map(|c| f.value(c).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let averages = self.subtree_union_integrals(&abs);
        let mut out = GridFunction::zeros(self.grid().clone(), self.mask().clone(), 1)?;
        let tree = self.tree();
        for t in 0..tree.len() {
            if t == tree.root() {
                continue;
            }
            let avg = averages[t] / self.subtree_measure(t);
            for c in self.connector_cells(t).iter() {
                out.values_mut()[c] += avg;
            }
        }
        Ok(out)
    }

    /// `ω = |B_t|/|W_t|` on the cells of `B_t`, 1 elsewhere on the mask.
    pub fn tree_weight(&self) -> GridFunction {
        let mut w = vec![0.0; self.grid().len()];
        for (c, m) in self.mask().iter().enumerate() {
            if *m {
                w[c] = 1.0;
            }
        }
        let tree = self.tree();
        for t in 0..tree.len() {
            if t == tree.root() {
                continue;
            }
            let value = self.connector_measure(t) / self.subtree_measure(t);
            for c in self.connector_cells(t).iter() {
                w[c] = value;
            }
        }
        GridFunction::from_values(self.grid().clone(), self.mask().clone(), 1, w).expect("shapes match")
    }
}
