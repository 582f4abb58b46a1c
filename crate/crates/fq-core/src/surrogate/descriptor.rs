//! Fixed-length configuration descriptors.
//!
//! Features are built from inverse pair distances and radial basis
//! expansions, pooled per unordered species pair, so vectors are invariant
//! under global translation, rotation, and permutation of identical
//! particles by construction.

use crate::error::{CoreError, Result};
use crate::model::terms::pair_distance;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSpec {
    pub n_rbf: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// RBF width as a multiple of the center spacing.
    pub width_factor: f64,
}

impl Default for DescriptorSpec {
    fn default() -> Self {
        Self {
            n_rbf: 8,
            r_min: 0.4,
            r_max: 4.0,
            width_factor: 1.0,
        }
    }
}

/// Descriptor evaluator bound to one particle layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorMap {
    pub dim: usize,
    pub species: Vec<u32>,
    pub spec: DescriptorSpec,
    /// Sorted unique unordered species pairs; one feature block per group.
    groups: Vec<(u32, u32)>,
    /// Particle pairs per group.
    pairs: Vec<Vec<(usize, usize)>>,
}

impl DescriptorMap {
    pub fn new(dim: usize, species: Vec<u32>, spec: DescriptorSpec) -> Result<Self> {
        if species.len() < 2 {
            return Err(CoreError::InvalidArgument(
                "descriptors need at least two particles".into(),
            ));
        }
        if spec.n_rbf == 0 || !(spec.r_min > 0.0) || !(spec.r_max > spec.r_min) {
            return Err(CoreError::InvalidArgument(format!(
                "bad descriptor spec: {spec:?}"
            )));
        }
        let mut groups: Vec<(u32, u32)> = Vec::new();
        for i in 0..species.len() {
            for j in i + 1..species.len() {
                let key = (species[i].min(species[j]), species[i].max(species[j]));
                if !groups.contains(&key) {
                    groups.push(key);
                }
            }
        }
        groups.sort_unstable();
        let mut pairs = vec![Vec::new(); groups.len()];
        for i in 0..species.len() {
            for j in i + 1..species.len() {
                let key = (species[i].min(species[j]), species[i].max(species[j]));
                let g = groups.iter().position(|k| *k == key).expect("key present");
                pairs[g].push((i, j));
            }
        }
        Ok(Self {
            dim,
            species,
            spec,
            groups,
            pairs,
        })
    }

    /// Features per group: sum 1/r, sum 1/r^2, and `n_rbf` Gaussian bins.
    pub fn n_features(&self) -> usize {
        self.groups.len() * (2 + self.spec.n_rbf)
    }

    pub fn n_coords(&self) -> usize {
        self.species.len() * self.dim
    }

    fn centers(&self) -> Vec<f64> {
        let n = self.spec.n_rbf;
        if n == 1 {
            return vec![0.5 * (self.spec.r_min + self.spec.r_max)];
        }
        let step = (self.spec.r_max - self.spec.r_min) / (n - 1) as f64;
        (0..n).map(|c| self.spec.r_min + c as f64 * step).collect()
    }

    fn rbf_width(&self) -> f64 {
        let n = self.spec.n_rbf.max(2);
        let step = (self.spec.r_max - self.spec.r_min) / (n - 1) as f64;
        self.spec.width_factor * step
    }

    pub fn featurize(&self, coords: &[f64]) -> Result<Vec<f64>> {
        Ok(self.featurize_impl(coords, false)?.0)
    }

    /// Features and the Jacobian `d feature / d coordinate`
    /// (`n_features x n_coords`).
    pub fn featurize_jacobian(&self, coords: &[f64]) -> Result<(Vec<f64>, Array2<f64>)> {
        let (f, j) = self.featurize_impl(coords, true)?;
        Ok((f, j.expect("jacobian requested")))
    }

    fn featurize_impl(
        &self,
        coords: &[f64],
        want_jacobian: bool,
    ) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
        if coords.len() != self.n_coords() {
            return Err(CoreError::InvalidArgument(format!(
                "expected {} coordinates, got {}",
                self.n_coords(),
                coords.len()
            )));
        }
        let centers = self.centers();
        let width = self.rbf_width();
        let block = 2 + self.spec.n_rbf;
        let mut features = vec![0.0; self.n_features()];
        let mut jac = want_jacobian.then(|| Array2::<f64>::zeros((self.n_features(), coords.len())));

        for (g, group_pairs) in self.pairs.iter().enumerate() {
            for &(i, j) in group_pairs {
                let (r2, dx) = pair_distance(self.dim, coords, i, j);
                if r2 < 1e-24 {
                    return Err(CoreError::SingularConfiguration { i, j });
                }
                let r = r2.sqrt();
                let inv = 1.0 / r;
                let base = g * block;
                features[base] += inv;
                features[base + 1] += inv * inv;
                // df/dr for each feature of this pair
                let mut dfdr = vec![0.0; block];
                dfdr[0] = -inv * inv;
                dfdr[1] = -2.0 * inv * inv * inv;
                for (c, &mu) in centers.iter().enumerate() {
                    let z = (r - mu) / width;
                    let val = (-0.5 * z * z).exp();
                    features[base + 2 + c] += val;
                    dfdr[2 + c] = val * (-z / width);
                }
                if let Some(jac) = jac.as_mut() {
                    for d in 0..self.dim {
                        let drdx = dx[d] * inv; // dr/dx_i = (x_i - x_j)/r
                        for (fi, &g_r) in dfdr.iter().enumerate() {
                            jac[(base + fi, i * self.dim + d)] += g_r * drdx;
                            jac[(base + fi, j * self.dim + d)] -= g_r * drdx;
                        }
                    }
                }
            }
        }
        Ok((features, jac))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_3p() -> DescriptorMap {
        DescriptorMap::new(2, vec![0, 0, 1], DescriptorSpec::default()).unwrap()
    }

    #[test]
    fn rigid_rotation_leaves_features_unchanged() {
        let map = map_3p();
        let coords = [0.0, 0.0, 1.1, 0.2, -0.4, 0.9];
        let f0 = map.featurize(&coords).unwrap();
        for k in 1..=100 {
            let theta = k as f64 * 0.061;
            let (c, s) = (theta.cos(), theta.sin());
            let (tx, ty) = (0.37 * k as f64, -0.21 * k as f64);
            let mut rotated = [0.0; 6];
            for p in 0..3 {
                let (x, y) = (coords[2 * p], coords[2 * p + 1]);
                rotated[2 * p] = c * x - s * y + tx;
                rotated[2 * p + 1] = s * x + c * y + ty;
            }
            let f1 = map.featurize(&rotated).unwrap();
            for (a, b) in f0.iter().zip(f1.iter()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b} at rotation {k}");
            }
        }
    }

    #[test]
    fn swapping_identical_particles_is_invariant() {
        let map = map_3p();
        let coords = [0.0, 0.0, 1.1, 0.2, -0.4, 0.9];
        // Particles 0 and 1 share a species.
        let swapped = [1.1, 0.2, 0.0, 0.0, -0.4, 0.9];
        let f0 = map.featurize(&coords).unwrap();
        let f1 = map.featurize(&swapped).unwrap();
        assert_eq!(f0, f1);
    }

    #[test]
    fn distinct_configurations_get_distinct_vectors() {
        let map = map_3p();
        let fixtures: Vec<[f64; 6]> = vec![
            [0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.2, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.3, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0, 0.4, 1.4],
            [0.1, 0.1, 0.9, -0.2, -0.5, 0.8],
        ];
        let vecs: Vec<Vec<f64>> = fixtures
            .iter()
            .map(|c| map.featurize(c).unwrap())
            .collect();
        for a in 0..vecs.len() {
            for b in a + 1..vecs.len() {
                let dist: f64 = vecs[a]
                    .iter()
                    .zip(vecs[b].iter())
                    .map(|(x, y)| (x - y).powi(2))
                    .sum();
                assert!(dist > 1e-12, "fixtures {a} and {b} collide");
            }
        }
    }

    #[test]
    fn coincident_particles_are_an_error() {
        let map = map_3p();
        let coords = [0.5, 0.5, 0.5, 0.5, 1.0, 1.0];
        assert!(matches!(
            map.featurize(&coords),
            Err(CoreError::SingularConfiguration { .. })
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let map = map_3p();
        let coords = [0.05, -0.1, 1.15, 0.25, -0.45, 0.85];
        let (_, jac) = map.featurize_jacobian(&coords).unwrap();
        let h = 1e-6;
        for c in 0..coords.len() {
            let mut plus = coords.to_vec();
            let mut minus = coords.to_vec();
            plus[c] += h;
            minus[c] -= h;
            let fp = map.featurize(&plus).unwrap();
            let fm = map.featurize(&minus).unwrap();
            for fi in 0..fp.len() {
                let fd = (fp[fi] - fm[fi]) / (2.0 * h);
                assert!(
                    (jac[(fi, c)] - fd).abs() < 1e-6 * jac[(fi, c)].abs().max(1.0),
                    "feature {fi}, coord {c}: {} vs {fd}",
                    jac[(fi, c)]
                );
            }
        }
    }
}
