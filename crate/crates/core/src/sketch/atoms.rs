use crate::error::{ensure, Result};

/// Discrete spectral distribution: eigenvalue atoms with probability weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAtoms {
    atoms: Vec<(f64, f64)>,
}

impl SpectralAtoms {
    /// Validates `(value, weight)` pairs. Weights must be non-negative and
    /// sum to one within 1e-12; values must be non-negative.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        ensure!(!atoms.is_empty(), Data, "spectral distribution has no atoms");
        for &(v, w) in &atoms {
            ensure!(v.is_finite() && v >= 0.0, Data, "atom value {v} must be finite and >= 0");
            ensure!(w.is_finite() && w >= 0.0, Data, "atom weight {w} must be finite and >= 0");
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        ensure!((total - 1.0).abs() <= 1e-12, Data, "atom weights sum to {total}, not 1");
        Ok(Self { atoms })
    }

    /// Point mass at `value`.
    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    /// Empirical distribution of the given eigenvalues (equal weights).
    /// Tiny negative round-off is clamped to zero.
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        ensure!(!values.is_empty(), Data, "no eigenvalues");
        let w = 1.0 / values.len() as f64;
        let mut atoms: Vec<(f64, f64)> = values.iter().map(|&v| (v.max(0.0), w)).collect();
        renormalize(&mut atoms);
        Self::new(atoms)
    }

    /// Groups equal values and weights them by multiplicity.
    pub fn from_counts<I: IntoIterator<Item = f64>>(values: I) -> Result<Self> {
        let mut vals: Vec<f64> = values.into_iter().collect();
        ensure!(!vals.is_empty(), Data, "no values");
        vals.sort_by(f64::total_cmp);
        let total = vals.len() as f64;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for v in vals {
            match atoms.last_mut() {
                Some(last) if last.0 == v => last.1 += 1.0,
                _ => atoms.push((v, 1.0)),
            }
        }
        for a in &mut atoms {
            a.1 /= total;
        }
        renormalize(&mut atoms);
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `∫ x^k dπ`.
    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|(v, w)| w * v.powi(k)).sum()
    }

    /// `ρ₂ / ρ₁²`; equals one exactly for a point mass.
    pub fn concentration_ratio(&self) -> f64 {
        let m1 = self.moment(1);
        self.moment(2) / (m1 * m1)
    }

    pub fn max_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).fold(0.0, f64::max)
    }
}

// Pushes the summation error into the last weight.
fn renormalize(atoms: &mut [(f64, f64)]) {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if let Some(last) = atoms.last_mut() {
        last.1 += 1.0 - total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SpectralAtoms::new(vec![(1.0, 0.5), (2.0, 0.5)]).is_ok());
        assert!(SpectralAtoms::new(vec![(1.0, 0.5)]).is_err());
        assert!(SpectralAtoms::new(vec![(-1.0, 1.0)]).is_err());
        assert!(SpectralAtoms::new(vec![]).is_err());
    }

    #[test]
    fn grouped_counts() {
        let a = SpectralAtoms::from_counts([2.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.atoms(), &[(0.0, 0.25), (1.0, 0.25), (2.0, 0.5)]);
        assert_eq!(a.moment(1), 1.25);
    }

    #[test]
    fn point_mass_ratio_is_one() {
        assert_eq!(SpectralAtoms::point(1.0).concentration_ratio(), 1.0);
        let spread = SpectralAtoms::from_counts([1.0, 3.0]).unwrap();
        assert!(spread.concentration_ratio() > 1.0);
    }
}
